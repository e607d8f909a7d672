#include "tactile/afferents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tactile/errors.hpp"

namespace tactile {

std::string to_string(AfferentKind kind) { return kind == AfferentKind::SA1 ? "SA1" : "RA1"; }

AfferentKind afferent_kind_from_string(const std::string& s) {
    if (s == "SA1" || s == "sa1") return AfferentKind::SA1;
    if (s == "RA1" || s == "ra1") return AfferentKind::RA1;
    throw InvalidArgument("unknown afferent kind '" + s + "' (expected SA1 or RA1)");
}

namespace {

void check_field(const MarkerField& f) {
    if (f.positions.size() != static_cast<std::size_t>(kCells) || f.rest.size() != static_cast<std::size_t>(kCells))
        throw InvalidArgument("marker field must hold 361 markers with a rest reference");
}

}  // namespace

TactileImage sa1_image(const MarkerField& frame) {
    check_field(frame);
    TactileImage img;
    img.kind = AfferentKind::SA1;
    img.frame_index = frame.frame_index;
    for (int i = 0; i < kCells; ++i)
        img.values[i] = std::hypot(frame.positions[i].x - frame.rest[i].x, frame.positions[i].y - frame.rest[i].y);
    return img;
}

TactileImage ra1_image(const MarkerField& frame_t, const MarkerField& frame_prev, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be > 0");
    if (frame_t.positions.size() != static_cast<std::size_t>(kCells) ||
        frame_prev.positions.size() != static_cast<std::size_t>(kCells))
        throw InvalidArgument("marker fields must hold 361 markers");
    TactileImage img;
    img.kind = AfferentKind::RA1;
    img.frame_index = frame_t.frame_index;
    for (int i = 0; i < kCells; ++i)
        img.values[i] = std::hypot(frame_t.positions[i].x - frame_prev.positions[i].x,
                                   frame_t.positions[i].y - frame_prev.positions[i].y) / dt;
    return img;
}

AfferentSeries afferent_series(const std::vector<MarkerField>& frames, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be > 0");
    AfferentSeries s;
    s.dt = dt;
    s.sa1.reserve(frames.size());
    for (const auto& f : frames) s.sa1.push_back(sa1_image(f));
    for (std::size_t k = 1; k < frames.size(); ++k) s.ra1.push_back(ra1_image(frames[k], frames[k - 1], dt));
    return s;
}

double total_response(const TactileImage& image) {
    double s = 0.0;
    for (double v : image.values) s += v;
    return s;
}

double spatial_contrast(const TactileImage& image) {
    const double mean = total_response(image) / kCells;
    double var = 0.0;
    for (double v : image.values) var += (v - mean) * (v - mean);
    return std::sqrt(var / kCells) / (mean + 1e-9);
}

TactileImage peak_frame(const AfferentSeries& series, AfferentKind kind) {
    const auto& imgs = kind == AfferentKind::SA1 ? series.sa1 : series.ra1;
    if (imgs.empty()) throw InvalidArgument("peak_frame needs a non-empty series");
    std::size_t best = 0;
    double best_total = total_response(imgs[0]);
    for (std::size_t k = 1; k < imgs.size(); ++k) {
        const double t = total_response(imgs[k]);
        if (t > best_total) {
            best_total = t;
            best = k;
        }
    }
    return imgs[best];
}

std::vector<double> ring_means(const TactileImage& image, int rings) {
    std::vector<double> sum(rings, 0.0);
    std::vector<int> count(rings, 0);
    const int c = kGrid / 2;
    for (int r = 0; r < kGrid; ++r)
        for (int k = 0; k < kGrid; ++k) {
            const int ring = static_cast<int>(std::lround(std::hypot(r - c, k - c)));
            if (ring < rings) {
                sum[ring] += image.at(r, k);
                ++count[ring];
            }
        }
    for (int i = 0; i < rings; ++i) sum[i] = count[i] ? sum[i] / count[i] : 0.0;
    return sum;
}

std::vector<MarkerField> read_frames_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty marker file", 1);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "frame,marker_row,marker_col,x_mm,y_mm") throw ParseError("unexpected header '" + line + "'", lineno);

    struct Frame {
        long index;
        std::size_t first_line;
        std::vector<Vec2> pos;
        std::vector<std::uint8_t> seen;
        int count = 0;
    };
    std::vector<Frame> frames;
    auto finish = [&](const Frame& f, std::size_t at_line) {
        if (f.count != kCells)
            throw ParseError("frame " + std::to_string(f.index) + " has " + std::to_string(f.count) +
                                 " markers, expected 361",
                             at_line);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        if (cols.size() != 5) throw ParseError("expected 5 columns", lineno);
        long frame;
        int row, col;
        double x, y;
        try {
            std::size_t p = 0;
            frame = std::stol(cols[0], &p);
            if (p != cols[0].size()) throw std::invalid_argument("frame");
            row = std::stoi(cols[1], &p);
            if (p != cols[1].size()) throw std::invalid_argument("row");
            col = std::stoi(cols[2], &p);
            if (p != cols[2].size()) throw std::invalid_argument("col");
            x = std::stod(cols[3], &p);
            if (p != cols[3].size()) throw std::invalid_argument("x");
            y = std::stod(cols[4], &p);
            if (p != cols[4].size()) throw std::invalid_argument("y");
        } catch (const std::exception&) {
            throw ParseError("malformed row '" + line + "'", lineno);
        }
        if (!std::isfinite(x) || !std::isfinite(y)) throw ParseError("non-finite marker position", lineno);
        if (row < 1 || row > kGrid || col < 1 || col > kGrid) throw ParseError("marker index out of range", lineno);
        if (frames.empty() || frames.back().index != frame) {
            if (!frames.empty()) {
                if (frame < frames.back().index) throw ParseError("frame indices must increase", lineno);
                finish(frames.back(), lineno - 1);
            }
            if (frame < -1) throw ParseError("frame index below -1", lineno);
            frames.push_back({frame, lineno, std::vector<Vec2>(kCells), std::vector<std::uint8_t>(kCells, 0), 0});
        }
        Frame& f = frames.back();
        const int k = (row - 1) * kGrid + (col - 1);
        if (f.seen[k]) throw ParseError("duplicate marker in frame " + std::to_string(frame), lineno);
        f.seen[k] = 1;
        f.pos[k] = {x, y};
        ++f.count;
    }
    if (frames.empty()) throw ParseError("no frames", lineno);
    finish(frames.back(), lineno);

    std::vector<Vec2> rest;
    std::size_t begin = 0;
    if (frames.front().index == -1) {
        rest = frames.front().pos;
        begin = 1;
        if (frames.size() == 1) throw ParseError("file holds only a rest frame", lineno);
    } else {
        rest = frames.front().pos;
    }
    std::vector<MarkerField> out;
    for (std::size_t k = begin; k < frames.size(); ++k) {
        MarkerField m;
        m.frame_index = frames[k].index;
        m.positions = std::move(frames[k].pos);
        m.rest = rest;
        m.in_contact.assign(kCells, 0);
        out.push_back(std::move(m));
    }
    return out;
}

AfferentSeries ingest_marker_csv(const std::string& path, double dt) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open marker file: " + path);
    return afferent_series(read_frames_csv(in), dt);
}

void write_image_csv(std::ostream& out, const TactileImage& image) {
    out.precision(17);
    for (int r = 0; r < kGrid; ++r) {
        for (int c = 0; c < kGrid; ++c) out << (c ? "," : "") << image.at(r, c);
        out << '\n';
    }
}

void write_image_csv(const std::string& path, const TactileImage& image) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path);
    write_image_csv(out, image);
}

void write_image_pgm(const std::string& path, const TactileImage& image) {
    const double mx = *std::max_element(image.values.begin(), image.values.end());
    const double scale = mx > 0.0 ? 255.0 / mx : 0.0;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path);
    out << "P5\n" << kGrid << ' ' << kGrid << "\n255\n";
    for (double v : image.values) out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * scale))));
    nlohmann::json side = {{"kind", to_string(image.kind)},
                           {"frame_index", image.frame_index},
                           {"units", image.kind == AfferentKind::SA1 ? "mm" : "mm/s"},
                           {"value_per_level", scale > 0.0 ? 1.0 / scale : 0.0},
                           {"max_value", mx}};
    std::ofstream js(path + ".json");
    if (!js) throw InvalidArgument("cannot write " + path + ".json");
    js << side.dump(2) << '\n';
}

}  // namespace tactile
