#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "tactile/skin.hpp"

namespace tactile {

enum class AfferentKind { SA1, RA1 };

std::string to_string(AfferentKind kind);
AfferentKind afferent_kind_from_string(const std::string& s);

constexpr int kGrid = 19;
constexpr int kCells = kGrid * kGrid;
constexpr int kCentralCell = (kGrid / 2) * kGrid + kGrid / 2;

struct TactileImage {
    AfferentKind kind = AfferentKind::SA1;
    long frame_index = 0;
    std::array<double, kCells> values{};  // SA-I in mm, RA-I in mm/s

    double at(int row, int col) const { return values[row * kGrid + col]; }
    bool operator==(const TactileImage&) const = default;
};

struct AfferentSeries {
    std::vector<TactileImage> sa1;
    std::vector<TactileImage> ra1;  // ra1[k] compares frames k and k+1
    double dt = 1.0 / 30.0;
};

TactileImage sa1_image(const MarkerField& frame);
TactileImage ra1_image(const MarkerField& frame_t, const MarkerField& frame_prev, double dt);

AfferentSeries afferent_series(const std::vector<MarkerField>& frames, double dt);

TactileImage peak_frame(const AfferentSeries& series, AfferentKind kind);

double total_response(const TactileImage& image);
// Standard deviation over mean (+1e-9) of the cell values.
double spatial_contrast(const TactileImage& image);

// Ring k collects cells whose centre lies at round(distance / pitch) = k.
std::vector<double> ring_means(const TactileImage& image, int rings = 10);

// Reads the frame-sequence CSV written by write_frames_csv. Frame -1, when
// present, is the rest frame; otherwise the first frame is taken as rest.
std::vector<MarkerField> read_frames_csv(std::istream& in);
AfferentSeries ingest_marker_csv(const std::string& path, double dt);

void write_image_csv(std::ostream& out, const TactileImage& image);
void write_image_csv(const std::string& path, const TactileImage& image);
// 8-bit PGM scaled so the image maximum maps to 255; the scale and units go
// into a JSON sidecar next to it (<path>.json).
void write_image_pgm(const std::string& path, const TactileImage& image);

}  // namespace tactile
