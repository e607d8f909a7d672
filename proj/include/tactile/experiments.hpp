#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tactile/afferents.hpp"
#include "tactile/skin.hpp"
#include "tactile/stimuli.hpp"

namespace tactile {

// ---- Exp 1a: normal press on a flat plate -------------------------------

struct Exp1aConfig {
    double start_clearance = 2.0;  // mm
    double max_indentation = 2.5;  // mm
    double hold_duration = 3.0;    // s
    double frame_rate = 30.0;      // Hz
};

enum class Phase { approach, hold, release };
std::string to_string(Phase p);

struct PhaseMarks {
    long press_start = 0;
    long hold_start = 0;
    long release_start = 0;
    long end = 0;  // last frame
};

struct Exp1aResult {
    double speed = 0.0;
    double dt = 0.0;
    std::vector<double> t;            // s, per frame
    std::vector<double> indentation;  // mm, per frame
    std::vector<Phase> phase;
    std::vector<double> sa1_total;    // per frame
    std::vector<double> ra1_total;    // per frame; frame 0 has no predecessor and reads 0
    AfferentSeries series;
    PhaseMarks marks;
};

Exp1aResult run_exp1a(const SensorGeometry& geometry, const SkinParameters& params, double speed,
                      const Exp1aConfig& config, std::uint64_t seed);

void write_exp1a_csv(std::ostream& out, const Exp1aResult& result);

// ---- Exp 1b: spatial response profiles ----------------------------------

struct Exp1bConfig {
    double step = 0.2;             // mm between sweep positions
    double max_indentation = 1.0;  // mm
    double approach_speed = 1.25;  // mm/s, ~0.8 s press
    double hold_duration = 0.5;    // s
    double frame_rate = 30.0;      // Hz
    double margin = 1.0;           // mm of free space beyond the contact reach
};

struct SpatialResponseProfile {
    std::string stimulus;
    std::vector<double> positions;  // mm
    std::vector<double> sa1;        // mean central SA-I over the press, mm
    std::vector<double> ra1;        // mean central RA-I over the press, mm/s
};

// Half-width of the sensor footprint that touches a flat surface at this depth.
double contact_reach(const SensorGeometry& geometry, double indentation);

SpatialResponseProfile run_exp1b(const SensorGeometry& geometry, const SkinParameters& params,
                                 const StimulusProfile& grating, const Exp1bConfig& config, std::uint64_t seed);

// Keeps every factor-th position, anchored on position 0.
SpatialResponseProfile decimate(const SpatialResponseProfile& profile, int factor);

void write_srp_csv(std::ostream& out, const SpatialResponseProfile& profile);

// ---- Exp 2: grating orientation dataset ---------------------------------

enum class Split : std::uint8_t { train = 0, val = 1, test_A = 2, test_B = 3 };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

using Image32 = std::array<float, kCells>;

struct LabeledSample {
    Image32 sa1{};
    Image32 ra1{};
    double psi = 0.0;
    double phi = 0.0;
    double theta = 0.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double period = 0.0;
    Split split = Split::train;
    std::uint64_t seed = 0;

    bool operator==(const LabeledSample&) const = default;
};

struct PoseRanges {
    double psi = 90.0;    // deg
    double phi = 2.0;     // deg
    double theta = 2.0;   // deg
    double x = 2.5;       // mm
    double y = 2.5;       // mm
    double z = 0.15;      // mm
};

struct DatasetSpec {
    std::vector<double> train_periods = {1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
    std::vector<double> test_periods = {0.0, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
    double groove_depth = 1.5;
    int samples_per_grating = 200;   // train + val
    int test_per_condition = 60;
    double val_fraction = 0.25;
    double test_psi_a = -45.0;
    double test_psi_b = 45.0;
    PoseRanges ranges;
    double start_clearance = 0.3;
    double max_indentation = 2.5;
    double approach_speed = 5.0;
    double hold_duration = 1.0;
    double frame_rate = 30.0;
    double max_failure_fraction = 0.01;
    std::uint64_t seed = 1;

    static DatasetSpec desk();
    static DatasetSpec paper();
    void validate() const;
};

struct Dataset {
    DatasetSpec spec;
    std::vector<LabeledSample> samples;
    int failures = 0;

    std::size_t count(Split s) const;
    std::vector<const LabeledSample*> select(Split s) const;
    bool operator==(const Dataset& o) const { return samples == o.samples && failures == o.failures; }
};

Dataset collect_exp2(const SensorGeometry& geometry, const SkinParameters& params, const DatasetSpec& spec);

// Simulates one Exp 2 press and returns the independent SA-I / RA-I peak frames.
std::pair<TactileImage, TactileImage> exp2_peak_images(const SensorGeometry& geometry, const SkinParameters& params,
                                                       const DatasetSpec& spec, double period, const Pose& pose,
                                                       std::uint64_t seed);

// Files <base>.manifest.json and <base>.bin. Returns the content hash.
std::string save_dataset(const Dataset& dataset, const std::string& base);
Dataset load_dataset(const std::string& base);
std::string dataset_hash(const Dataset& dataset);

}  // namespace tactile
