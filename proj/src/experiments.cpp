#include "tactile/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "tactile/config.hpp"
#include "tactile/errors.hpp"
#include "tactile/hash.hpp"
#include "tactile/parallel.hpp"
#include "tactile/rng.hpp"

namespace tactile {

using nlohmann::json;

std::string to_string(Phase p) {
    switch (p) {
        case Phase::approach: return "approach";
        case Phase::hold: return "hold";
        case Phase::release: return "release";
    }
    return "?";
}

Exp1aResult run_exp1a(const SensorGeometry& geometry, const SkinParameters& params, double speed,
                      const Exp1aConfig& config, std::uint64_t seed) {
    if (!(speed > 0.0) || !std::isfinite(speed)) throw InvalidArgument("press speed must be > 0");
    PressTrajectory tr;
    tr.start_clearance = config.start_clearance;
    tr.max_indentation = config.max_indentation;
    tr.approach_speed = speed;
    tr.hold_duration = config.hold_duration;
    tr.frame_rate = config.frame_rate;
    tr.include_release = true;

    Exp1aResult r;
    r.speed = speed;
    r.dt = 1.0 / config.frame_rate;
    const auto frames = simulate_press(geometry, params, make_flat_plate(), Pose{}, tr, seed);
    r.series = afferent_series(frames, r.dt);
    r.marks.press_start = 0;
    r.marks.hold_start = tr.hold_start_frame();
    r.marks.release_start = tr.release_start_frame();
    r.marks.end = static_cast<long>(frames.size()) - 1;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const long kk = static_cast<long>(k);
        r.t.push_back(k * r.dt);
        r.indentation.push_back(frames[k].indentation);
        r.phase.push_back(kk < r.marks.hold_start ? Phase::approach
                          : kk < r.marks.release_start ? Phase::hold
                                                       : Phase::release);
        r.sa1_total.push_back(total_response(r.series.sa1[k]));
        r.ra1_total.push_back(k == 0 ? 0.0 : total_response(r.series.ra1[k - 1]));
    }
    return r;
}

void write_exp1a_csv(std::ostream& out, const Exp1aResult& r) {
    out.precision(10);
    out << "t_s,phase,sa1_total,ra1_total\n";
    for (std::size_t k = 0; k < r.t.size(); ++k)
        out << r.t[k] << ',' << to_string(r.phase[k]) << ',' << r.sa1_total[k] << ',' << r.ra1_total[k] << '\n';
}

double contact_reach(const SensorGeometry& geometry, double indentation) {
    if (indentation <= 0.0) return 0.0;
    if (geometry.dome_height <= indentation) return geometry.rim_radius() * std::sqrt(2.0);
    return geometry.rim_radius() * std::sqrt(indentation / geometry.dome_height);
}

SpatialResponseProfile run_exp1b(const SensorGeometry& geometry, const SkinParameters& params,
                                 const StimulusProfile& grating, const Exp1bConfig& config, std::uint64_t seed) {
    if (grating.kind() != StimulusKind::aperiodic) throw InvalidArgument("Exp 1b needs an aperiodic grating");
    if (!(config.step > 0.0)) throw InvalidArgument("sweep step must be > 0");
    PressTrajectory tr;
    tr.start_clearance = 0.0;
    tr.max_indentation = config.max_indentation;
    tr.approach_speed = config.approach_speed;
    tr.hold_duration = config.hold_duration;
    tr.frame_rate = config.frame_rate;
    tr.include_release = false;
    tr.validate();

    const double lim = grating.width() / 2.0 + contact_reach(geometry, config.max_indentation) + config.margin;
    const long n = static_cast<long>(std::ceil(lim / config.step - 1e-9));
    const std::size_t count = static_cast<std::size_t>(2 * n + 1);

    SpatialResponseProfile srp;
    srp.stimulus = grating.name();
    srp.positions.resize(count);
    srp.sa1.resize(count);
    srp.ra1.resize(count);
    const int center = geometry.center_index();
    const double dt = 1.0 / config.frame_rate;
    parallel_for(count, [&](std::size_t i) {
        const long k = static_cast<long>(i) - n;
        Pose pose;
        pose.x = k * config.step;
        std::vector<MarkerField> frames;
        try {
            frames = simulate_press(geometry, params, grating, pose, tr,
                                    derive_seed(seed, {0x1b, static_cast<std::uint64_t>(i)}));
        } catch (const SolverFailure& e) {
            throw SolverFailure(std::string(e.what()) + " at sweep position " + std::to_string(pose.x) + " mm",
                                e.residual(), e.frame());
        }
        double sa = 0.0, ra = 0.0;
        for (std::size_t f = 0; f < frames.size(); ++f) {
            const Vec2 d = frames[f].displacement(center);
            sa += std::hypot(d.x, d.y);
            if (f > 0) {
                const Vec2& p = frames[f].positions[center];
                const Vec2& q = frames[f - 1].positions[center];
                ra += std::hypot(p.x - q.x, p.y - q.y) / dt;
            }
        }
        srp.positions[i] = pose.x;
        srp.sa1[i] = sa / frames.size();
        srp.ra1[i] = frames.size() > 1 ? ra / (frames.size() - 1) : 0.0;
    });
    return srp;
}

SpatialResponseProfile decimate(const SpatialResponseProfile& p, int factor) {
    if (factor < 1) throw InvalidArgument("decimation factor must be >= 1");
    if (p.positions.empty()) return p;
    // anchor on the position closest to 0
    std::size_t zero = 0;
    for (std::size_t i = 1; i < p.positions.size(); ++i)
        if (std::fabs(p.positions[i]) < std::fabs(p.positions[zero])) zero = i;
    SpatialResponseProfile out;
    out.stimulus = p.stimulus;
    for (std::size_t i = zero % factor; i < p.positions.size(); i += factor) {
        out.positions.push_back(p.positions[i]);
        out.sa1.push_back(p.sa1[i]);
        out.ra1.push_back(p.ra1[i]);
    }
    return out;
}

void write_srp_csv(std::ostream& out, const SpatialResponseProfile& p) {
    out.precision(10);
    out << "position_mm,sa1,ra1\n";
    for (std::size_t i = 0; i < p.positions.size(); ++i) out << p.positions[i] << ',' << p.sa1[i] << ',' << p.ra1[i] << '\n';
}

// ---- Exp 2 ---------------------------------------------------------------

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test_A: return "test_A";
        case Split::test_B: return "test_B";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test_A") return Split::test_A;
    if (s == "test_B") return Split::test_B;
    throw InvalidArgument("unknown split '" + s + "'");
}

DatasetSpec DatasetSpec::desk() { return DatasetSpec{}; }

DatasetSpec DatasetSpec::paper() {
    DatasetSpec s;
    s.samples_per_grating = 1000;
    s.test_per_condition = 300;
    return s;
}

void DatasetSpec::validate() const {
    if (train_periods.empty()) throw InvalidArgument("no training gratings");
    for (double p : train_periods)
        if (!(p >= 0.0)) throw InvalidArgument("grating periods must be >= 0");
    for (double p : test_periods)
        if (!(p >= 0.0)) throw InvalidArgument("grating periods must be >= 0");
    if (samples_per_grating < 2) throw InvalidArgument("samples_per_grating must be >= 2");
    if (test_per_condition < 0) throw InvalidArgument("test_per_condition must be >= 0");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw InvalidArgument("val_fraction must lie in (0, 1)");
    if (!(ranges.psi >= 0.0 && ranges.psi <= 90.0)) throw InvalidArgument("psi range must lie in [0, 90]");
    if (ranges.phi < 0 || ranges.theta < 0 || ranges.x < 0 || ranges.y < 0 || ranges.z < 0)
        throw InvalidArgument("pose ranges must be >= 0");
    if (!(max_indentation > 0.0) || !(approach_speed > 0.0) || !(frame_rate > 0.0))
        throw InvalidArgument("press parameters must be > 0");
    if (!(max_failure_fraction >= 0.0)) throw InvalidArgument("max_failure_fraction must be >= 0");
}

std::size_t Dataset::count(Split s) const {
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [&](const auto& x) { return x.split == s; }));
}

std::vector<const LabeledSample*> Dataset::select(Split s) const {
    std::vector<const LabeledSample*> out;
    for (const auto& x : samples)
        if (x.split == s) out.push_back(&x);
    return out;
}

namespace {

Image32 to_image32(const TactileImage& img) {
    Image32 out;
    for (int i = 0; i < kCells; ++i) out[i] = static_cast<float>(img.values[i]);
    return out;
}

struct Job {
    double period;
    Split split;
    bool fixed_psi;
    double psi;
    std::uint64_t seed;
};

}  // namespace

std::pair<TactileImage, TactileImage> exp2_peak_images(const SensorGeometry& geometry, const SkinParameters& params,
                                                       const DatasetSpec& spec, double period, const Pose& pose,
                                                       std::uint64_t seed) {
    PressTrajectory tr;
    tr.start_clearance = spec.start_clearance;
    tr.max_indentation = spec.max_indentation;
    tr.approach_speed = spec.approach_speed;
    tr.hold_duration = spec.hold_duration;
    tr.frame_rate = spec.frame_rate;
    tr.include_release = false;
    const auto grating = make_periodic_grating(period, spec.groove_depth, 0.0);
    const auto frames = simulate_press(geometry, params, grating, pose, tr, seed);
    const auto series = afferent_series(frames, 1.0 / spec.frame_rate);
    return {peak_frame(series, AfferentKind::SA1), peak_frame(series, AfferentKind::RA1)};
}

Dataset collect_exp2(const SensorGeometry& geometry, const SkinParameters& params, const DatasetSpec& spec) {
    spec.validate();
    std::vector<Job> jobs;
    for (std::size_t g = 0; g < spec.train_periods.size(); ++g) {
        const int n = spec.samples_per_grating;
        const int n_val = static_cast<int>(std::lround(n * spec.val_fraction));
        // stratified split: shuffle indices per grating, first n_val go to validation
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        Rng rng(spec.seed, {0x5b, g});
        for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(static_cast<std::uint64_t>(i) + 1)]);
        std::vector<Split> split(n, Split::train);
        for (int i = 0; i < n_val; ++i) split[idx[i]] = Split::val;
        for (int i = 0; i < n; ++i)
            jobs.push_back({spec.train_periods[g], split[i], false, 0.0,
                            derive_seed(spec.seed, {0x7a, g, static_cast<std::uint64_t>(i)})});
    }
    for (std::size_t g = 0; g < spec.test_periods.size(); ++g)
        for (int cond = 0; cond < 2; ++cond)
            for (int i = 0; i < spec.test_per_condition; ++i)
                jobs.push_back({spec.test_periods[g], cond == 0 ? Split::test_A : Split::test_B, true,
                                cond == 0 ? spec.test_psi_a : spec.test_psi_b,
                                derive_seed(spec.seed, {0x7e, g, static_cast<std::uint64_t>(cond),
                                                        static_cast<std::uint64_t>(i)})});

    std::vector<LabeledSample> out(jobs.size());
    std::vector<std::uint8_t> failed(jobs.size(), 0);
    parallel_for(jobs.size(), [&](std::size_t k) {
        const Job& job = jobs[k];
        Rng rng(job.seed, {1});
        const PoseRanges& R = spec.ranges;
        LabeledSample s;
        s.psi = rng.uniform(-R.psi, R.psi);
        s.phi = rng.uniform(-R.phi, R.phi);
        s.theta = rng.uniform(-R.theta, R.theta);
        s.x = rng.uniform(-R.x, R.x);
        s.y = rng.uniform(-R.y, R.y);
        s.z = rng.uniform(-R.z, R.z);
        if (job.fixed_psi) s.psi = job.psi;
        s.period = job.period;
        s.split = job.split;
        s.seed = job.seed;
        const Pose pose{s.psi, s.phi, s.theta, s.x, s.y, s.z};
        try {
            const auto [sa, ra] = exp2_peak_images(geometry, params, spec, job.period, pose, derive_seed(job.seed, {2}));
            s.sa1 = to_image32(sa);
            s.ra1 = to_image32(ra);
        } catch (const SolverFailure&) {
            failed[k] = 1;
        }
        out[k] = s;
    });

    Dataset ds;
    ds.spec = spec;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (failed[k]) ++ds.failures;
        else ds.samples.push_back(out[k]);
    }
    if (ds.failures > spec.max_failure_fraction * static_cast<double>(jobs.size()))
        throw std::runtime_error("Exp 2 collection aborted: " + std::to_string(ds.failures) + " of " +
                                 std::to_string(jobs.size()) + " presses failed to converge");
    return ds;
}

// ---- persistence -----------------------------------------------------------

namespace {

constexpr int kDatasetVersion = 1;
constexpr std::size_t kSampleBytes = 2 * kCells * sizeof(float);

void put_f32(std::string& buf, float v) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

float get_f32(const unsigned char* p) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(p[b]) << (8 * b);
    return std::bit_cast<float>(u);
}

std::string payload(const Dataset& ds) {
    std::string buf;
    buf.reserve(ds.samples.size() * kSampleBytes);
    for (const auto& s : ds.samples) {
        for (float v : s.sa1) put_f32(buf, v);
        for (float v : s.ra1) put_f32(buf, v);
    }
    return buf;
}

json records(const Dataset& ds) {
    json arr = json::array();
    for (const auto& s : ds.samples)
        arr.push_back({{"psi", s.psi}, {"phi", s.phi}, {"theta", s.theta}, {"x", s.x}, {"y", s.y}, {"z", s.z},
                       {"period", s.period}, {"split", to_string(s.split)}, {"seed", s.seed}});
    return arr;
}

std::string content_hash(const std::string& bin, const json& recs, int failures) {
    Sha256 h;
    h.update(bin);
    h.update(recs.dump());
    h.update(std::to_string(failures));
    return h.hex_digest();
}

}  // namespace

std::string dataset_hash(const Dataset& ds) { return content_hash(payload(ds), records(ds), ds.failures); }

std::string save_dataset(const Dataset& ds, const std::string& base) {
    const std::string bin = payload(ds);
    const json recs = records(ds);
    const std::string hash = content_hash(bin, recs, ds.failures);
    const std::string bin_name = std::filesystem::path(base + ".bin").filename().string();
    json m = {{"format", "tactile-dataset"},
              {"version", kDatasetVersion},
              {"spec", ds.spec},
              {"sample_count", ds.samples.size()},
              {"counts",
               {{"train", ds.count(Split::train)},
                {"val", ds.count(Split::val)},
                {"test_A", ds.count(Split::test_A)},
                {"test_B", ds.count(Split::test_B)}}},
              {"failures", ds.failures},
              {"bin_file", bin_name},
              {"bin_bytes", bin.size()},
              {"image_layout", "per sample: SA1 then RA1, 19x19 row-major float32 little-endian"},
              {"content_sha256", hash},
              {"samples", recs}};
    {
        std::ofstream out(base + ".bin", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + base + ".bin");
        out.write(bin.data(), static_cast<std::streamsize>(bin.size()));
        if (!out) throw std::runtime_error("failed writing " + base + ".bin");
    }
    std::ofstream out(base + ".manifest.json");
    if (!out) throw std::runtime_error("cannot write " + base + ".manifest.json");
    out << m.dump(1) << '\n';
    return hash;
}

Dataset load_dataset(const std::string& base) {
    std::ifstream min(base + ".manifest.json");
    if (!min) throw InvalidArgument("dataset manifest not found: " + base + ".manifest.json");
    json m;
    try {
        m = json::parse(min);
    } catch (const json::exception& e) {
        throw CorruptionError(std::string("unreadable dataset manifest: ") + e.what());
    }
    if (!m.is_object() || m.value("format", "") != "tactile-dataset") throw CorruptionError("not a dataset manifest");
    if (!m.contains("version") || !m["version"].is_number_integer()) throw CorruptionError("manifest lacks a version");
    if (m["version"].get<int>() != kDatasetVersion)
        throw VersionError("dataset schema version " + m["version"].dump() + " is not supported (expected " +
                           std::to_string(kDatasetVersion) + ")");

    Dataset ds;
    std::size_t n = 0;
    std::string expected;
    try {
        ds.spec = m.at("spec").get<DatasetSpec>();
        ds.failures = m.at("failures").get<int>();
        n = m.at("sample_count").get<std::size_t>();
        expected = m.at("content_sha256").get<std::string>();
        const json& recs = m.at("samples");
        if (recs.size() != n) throw CorruptionError("manifest sample count does not match its records");
        ds.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const json& r = recs[i];
            auto& s = ds.samples[i];
            s.psi = r.at("psi").get<double>();
            s.phi = r.at("phi").get<double>();
            s.theta = r.at("theta").get<double>();
            s.x = r.at("x").get<double>();
            s.y = r.at("y").get<double>();
            s.z = r.at("z").get<double>();
            s.period = r.at("period").get<double>();
            s.split = split_from_string(r.at("split").get<std::string>());
            s.seed = r.at("seed").get<std::uint64_t>();
        }
    } catch (const json::exception& e) {
        throw CorruptionError(std::string("malformed dataset manifest: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw CorruptionError(std::string("malformed dataset manifest: ") + e.what());
    }

    std::ifstream bin(base + ".bin", std::ios::binary);
    if (!bin) throw CorruptionError("dataset payload missing: " + base + ".bin");
    std::string buf((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    if (buf.size() != n * kSampleBytes)
        throw CorruptionError("dataset payload holds " + std::to_string(buf.size()) + " bytes, manifest expects " +
                              std::to_string(n * kSampleBytes));
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    for (auto& s : ds.samples) {
        for (auto& v : s.sa1) {
            v = get_f32(p);
            p += 4;
        }
        for (auto& v : s.ra1) {
            v = get_f32(p);
            p += 4;
        }
    }
    if (content_hash(buf, records(ds), ds.failures) != expected) throw CorruptionError("dataset content hash mismatch");
    return ds;
}

}  // namespace tactile
