// Runs the ten acceptance criteria at their pinned tolerances and prints one
// PASS/FAIL line per criterion.
// Usage: acceptance [work_dir] [criterion...] [--known-fail N]...
// A criterion listed with --known-fail still prints FAIL but does not set the
// exit code, unless it threw.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "tactile/afferents.hpp"
#include "tactile/decoder.hpp"
#include "tactile/experiments.hpp"
#include "tactile/rng.hpp"
#include "tactile/sdt.hpp"
#include "tactile/skin.hpp"

using namespace tactile;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSeed = 1;  // default master seed, fixed before any run

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

fs::path g_work;

SkinParameters noiseless() {
    SkinParameters p;
    p.noise_sigma = 0.0;
    return p;
}

double max_over(const std::vector<double>& v, long from, long to) {
    return *std::max_element(v.begin() + from, v.begin() + to);
}

// ---- 1: adaptation shapes ----

void adaptation(Outcome& o) {
    const SensorGeometry g;
    const Exp1aConfig cfg;
    const auto r = run_exp1a(g, SkinParameters{}, 3.0, cfg, kSeed);
    const auto& m = r.marks;
    const double sa_max = max_over(r.sa1_total, 0, m.hold_start + 1);
    double hold_dev = 0.0;
    for (long k = m.hold_start; k < m.release_start; ++k)
        hold_dev = std::max(hold_dev, std::abs(r.sa1_total[k] - sa_max) / sa_max);
    // release is timed from the moment the stimulus leaves the skin
    long contact_lost = m.release_start;
    while (contact_lost <= m.end && r.indentation[contact_lost] >= 0.0) ++contact_lost;
    long below = -1;
    for (long k = contact_lost; k <= m.end; ++k)
        if (r.sa1_total[k] < 0.05 * sa_max) {
            below = k;
            break;
        }
    const double fall_time = below < 0 ? INFINITY : (below - contact_lost) * r.dt;
    const double ra_peak = max_over(r.ra1_total, 0, m.hold_start + 1);
    const double ra_hold = max_over(r.ra1_total, m.hold_start + 1, m.release_start);

    const auto q = run_exp1a(g, noiseless(), 3.0, cfg, kSeed);
    const double ra_hold_quiet = max_over(q.ra1_total, q.marks.hold_start + 1, q.marks.release_start);

    o.detail << "SA hold dev " << hold_dev * 100 << "% of peak; SA < 5% " << fall_time
             << " s after contact loss; RA hold/peak " << ra_hold / ra_peak << "; RA hold (no noise) " << ra_hold_quiet;
    o.check(hold_dev <= 0.05, "SA hold within 5%");
    o.check(fall_time <= 0.5, "SA release fall within 0.5 s");
    o.check(ra_hold < 0.1 * ra_peak, "RA hold < 10% of peak");
    o.check(ra_hold_quiet == 0.0, "RA hold exactly 0 without noise");
}

// ---- 2: speed dependence ----

void speed_dependence(Outcome& o) {
    const SensorGeometry g;
    double peak[2], plateau[2];
    const double speeds[2] = {3.0, 10.0};
    for (int i = 0; i < 2; ++i) {
        const auto r = run_exp1a(g, SkinParameters{}, speeds[i], Exp1aConfig{}, kSeed);
        peak[i] = max_over(r.ra1_total, 0, r.marks.hold_start + 1);
        plateau[i] = std::accumulate(r.sa1_total.begin() + r.marks.hold_start, r.sa1_total.begin() + r.marks.release_start,
                                     0.0) /
                     static_cast<double>(r.marks.release_start - r.marks.hold_start);
    }
    const double ratio = peak[1] / peak[0];
    const double plateau_diff = std::abs(plateau[1] - plateau[0]) / std::max(plateau[0], plateau[1]);
    o.detail << "RA peak 10/3 mm/s ratio " << ratio << " (" << peak[1] << " / " << peak[0] << "); SA plateau diff "
             << plateau_diff * 100 << "%";
    o.check(ratio >= 1.5, "RA peak ratio >= 1.5");
    o.check(plateau_diff <= 0.05, "SA plateaus within 5%");
}

// ---- 3: radial pattern ----

void radial(Outcome& o) {
    const SensorGeometry g;
    const auto f = solve_contact(g, SkinParameters{}, make_flat_plate(), Pose{}, 2.5);
    const auto img = sa1_image(f);
    const auto rings = ring_means(img);
    const double centre = img.values[kCentralCell];
    bool monotone = true;
    for (std::size_t k = 1; k < rings.size(); ++k) monotone = monotone && rings[k] > rings[k - 1];
    o.detail << "centre " << centre << " mm, outer ring " << rings.back() << " mm, rings monotone " << monotone;
    o.check(centre * 3.0 <= rings.back(), "centre below outer ring by >= 3x");
    o.check(monotone, "ring means increase 0 -> 9");
}

// ---- 4-6: spatial response profiles ----

struct Srp {
    SpatialResponseProfile p;
    double width;
};

Srp sweep(const StimulusProfile& s, const SkinParameters& params) {
    return {run_exp1b(SensorGeometry{}, params, s, Exp1bConfig{}, kSeed), s.width()};
}

std::vector<std::size_t> local_maxima(const std::vector<double>& v) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) continue;
        std::size_t j = i;
        while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;  // plateau
        if (j + 1 < v.size() && v[j + 1] < v[i]) out.push_back((i + j) / 2);
        i = j;
    }
    return out;
}

void edge_enhancement(Outcome& o) {
    const auto bar = sweep(make_aperiodic_grating({4.0}, 1.5), SkinParameters{});
    const auto& sa = bar.p.sa1;
    const double top = *std::max_element(sa.begin(), sa.end());
    std::vector<std::size_t> dominant;
    for (auto i : local_maxima(sa))
        if (sa[i] >= 0.5 * top) dominant.push_back(i);
    const std::size_t centre =
        std::min_element(bar.p.positions.begin(), bar.p.positions.end(),
                         [](double a, double b) { return std::abs(a) < std::abs(b); }) -
        bar.p.positions.begin();
    o.detail << dominant.size() << " dominant maxima at";
    bool near_edges = dominant.size() == 2;
    double lower_peak = top;
    for (auto i : dominant) {
        o.detail << ' ' << bar.p.positions[i];
        near_edges = near_edges && std::abs(std::abs(bar.p.positions[i]) - bar.width / 2) <= 0.4 + 1e-9;
        lower_peak = std::min(lower_peak, sa[i]);
    }
    if (dominant.size() == 2)
        near_edges = near_edges && bar.p.positions[dominant[0]] * bar.p.positions[dominant[1]] < 0;
    o.detail << " mm; centre/edge " << sa[centre] / lower_peak;
    o.check(dominant.size() == 2, "exactly two dominant maxima");
    o.check(near_edges, "maxima within 0.4 mm of the edges");
    o.check(sa[centre] < 0.5 * lower_peak, "centre < 50% of edge peak");
}

void gap_attenuation(Outcome& o) {
    // inner edge peak: bar half nearest the gap plus 0.6 mm into the gap;
    // outer edge peak: far bar half plus 0.8 mm beyond it
    const std::vector<double> gaps = {10, 6, 4, 3, 2, 1};
    std::vector<double> inner, ratio;
    for (double gap : gaps) {
        const auto s = sweep(make_aperiodic_grating({4.0, gap, 4.0}, 1.5), SkinParameters{});
        double in = 0.0, out = 0.0;
        for (std::size_t i = 0; i < s.p.positions.size(); ++i) {
            const double a = std::abs(s.p.positions[i]);
            if (a >= gap / 2 - 0.6 && a <= gap / 2 + 2) in = std::max(in, s.p.sa1[i]);
            if (a >= gap / 2 + 2 && a <= gap / 2 + 4.8) out = std::max(out, s.p.sa1[i]);
        }
        inner.push_back(in);
        ratio.push_back(in / out);
    }
    bool monotone = true;
    for (std::size_t k = 1; k < gaps.size(); ++k) monotone = monotone && inner[k] <= inner[k - 1];
    // merge scale: gap where the inner/outer ratio crosses 0.5 (linear interpolation)
    constexpr double tau = 0.5;
    double scale = NAN;
    for (std::size_t k = 1; k < gaps.size(); ++k)
        if (ratio[k - 1] >= tau && ratio[k] < tau) {
            scale = gaps[k] + (tau - ratio[k]) / (ratio[k - 1] - ratio[k]) * (gaps[k - 1] - gaps[k]);
            break;
        }
    bool consistent = true;  // merged exactly for gaps below the scale
    for (std::size_t k = 0; k < gaps.size(); ++k) consistent = consistent && ((ratio[k] < tau) == (gaps[k] < scale));
    o.detail << "inner/outer ratios";
    for (std::size_t k = 0; k < gaps.size(); ++k) o.detail << ' ' << gaps[k] << ":" << ratio[k];
    o.detail << "; merge scale " << scale << " mm";
    o.check(monotone, "inner edge peak non-increasing");
    o.check(std::isfinite(scale) && std::abs(scale - 3.0) <= 1.0, "merge scale 3 +/- 1 mm");
    o.check(consistent, "merged only below the scale");
}

double modulation(const Srp& s, const std::vector<double>& v) {
    const double reach = contact_reach(SensorGeometry{}, Exp1bConfig{}.max_indentation);
    double hi = -INFINITY, lo = INFINITY, sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::abs(s.p.positions[i]) <= s.width / 2 + reach) {
            hi = std::max(hi, v[i]);
            lo = std::min(lo, v[i]);
            sum += v[i];
            ++n;
        }
    return (hi - lo) / (sum / n);
}

void noise_floor(Outcome& o) {
    const auto bar = make_aperiodic_grating({4.0}, 1.5);
    const auto noisy = sweep(bar, SkinParameters{});
    const auto quiet = sweep(bar, noiseless());
    const double r_noisy = modulation(noisy, noisy.p.ra1) / modulation(noisy, noisy.p.sa1);
    const double r_quiet = modulation(quiet, quiet.p.ra1) / modulation(quiet, quiet.p.sa1);
    o.detail << "RA/SA modulation ratio " << r_noisy << " (noise), " << r_quiet << " (no noise)";
    o.check(r_noisy < 0.5, "RA modulation < half of SA with noise");
    o.check(std::abs(r_quiet - 1.0) <= 0.25, "gap within 25% without noise");
}

// ---- 7: SDT layer ----

void sdt_layer(Outcome& o) {
    const auto r = gaussian_oracle(1.0, 100000, kSeed);
    const double q = 0.3085, h = 0.6915;
    const auto exact = same_different_rates(q, h);
    const auto mc = monte_carlo_same_different(q, h, 1000000, derive_seed(kSeed, {0x3c}));
    const double mc_err = std::max(std::abs(exact.first - mc.first), std::abs(exact.second - mc.second));
    bool half = true;
    for (double x : {0.0, 0.1, 0.3085, 0.5, 0.77, 1.0}) {
        const auto [a, b] = same_different_rates(x, x);
        half = half && percent_correct(a, b) == 0.5;
    }
    o.detail << "c " << r.criterion << ", d' " << r.dprime << ", MC max err " << mc_err << ", q = h -> pc 0.5 " << half;
    o.check(std::abs(r.criterion - 0.5) <= 0.02, "c = 0.5 +/- 0.02");
    o.check(std::abs(r.dprime - 1.0) <= 0.05, "d' = 1 +/- 0.05");
    o.check(mc_err <= 0.005, "Monte Carlo within 0.005");
    o.check(half, "q = h gives pc = 0.5 exactly");
}

// ---- 8: decoder correctness ----

void decoder(Outcome& o) {
    const double grad_err = gradient_check(DecoderConfig::tiny(), kSeed);

    Rng rng(kSeed, {0xacc8});
    auto images = [&](std::size_t n) {
        std::vector<Image32> v(n);
        for (auto& img : v)
            for (auto& x : img) x = static_cast<float>(rng.normal(0.5, 0.2));
        return v;
    };
    const auto tr = images(64), va = images(16);
    std::vector<const Image32*> tp, vp;
    for (const auto& x : tr) tp.push_back(&x);
    for (const auto& x : va) vp.push_back(&x);
    auto cfg = DecoderConfig::tiny();
    cfg.epochs = 200;
    cfg.patience = 200;
    const auto res = train(tp, std::vector<double>(tp.size(), 30.0), vp, std::vector<double>(vp.size(), 30.0),
                           AfferentKind::SA1, cfg, kSeed);
    double worst = 0.0;
    for (const auto* x : tp) worst = std::max(worst, std::abs(predict(res.model, *x) - 30.0));
    for (const auto* x : vp) worst = std::max(worst, std::abs(predict(res.model, *x) - 30.0));

    const auto model = initialize_model(DecoderConfig{}, AfferentKind::RA1, {0.4, 0.3}, kSeed);
    const auto path = (g_work / "roundtrip.model").string();
    save_model(model, path);
    const auto back = load_model(path);
    bool exact = back.params == model.params;
    for (const auto& x : images(100)) exact = exact && predict(back, x) == predict(model, x);

    o.detail << "grad rel err " << grad_err << ", constant-label worst error " << worst << " deg, round-trip exact "
             << exact;
    o.check(grad_err < 1e-4, "gradient check < 1e-4");
    o.check(worst <= 1.0, "constant label within 1 deg");
    o.check(exact, "save/load bit-exact");
}

// ---- 9-10: end to end through the CLI ----

int cli(const fs::path& out, std::vector<std::string> args) {
    args.insert(args.begin(), {"--out", out.string(), "--seed", std::to_string(kSeed)});
    std::ostringstream so, se;
    const int code = cli::run(args, so, se);
    std::printf("    $ tactile_cli");
    for (const auto& a : args) std::printf(" %s", a.c_str());
    std::printf("\n    %s", so.str().c_str());
    if (code != 0) std::printf("    exit %d: %s", code, se.str().c_str());
    std::fflush(stdout);
    return code;
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (i + j) / 2.0 + 1.0;
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

void grating_resolution(Outcome& o) {
    const fs::path dir = g_work / "exp2_run_a";
    fs::remove_all(dir);
    bool ok = cli(dir, {"--threads", "0", "exp2", "collect", "--scale", "desk"}) == 0;
    ok = ok && cli(dir, {"exp2", "train"}) == 0;
    ok = ok && cli(dir, {"exp2", "eval"}) == 0;
    o.check(ok, "pipeline ran");
    if (!ok) return;
    const auto s = json::parse(std::ifstream(dir / "summary.json"));
    auto series = [&](const char* kind, const char* key) {
        std::vector<double> v;
        for (const auto& p : s[kind]["points"]) v.push_back(p[key].get<double>());
        return v;
    };
    const auto periods = series("SA1", "period_mm");
    const auto pc = series("SA1", "pc");
    const auto sa_d = series("SA1", "dprime"), ra_d = series("RA1", "dprime");
    auto at = [&](double period) {
        return static_cast<std::size_t>(std::find(periods.begin(), periods.end(), period) - periods.begin());
    };
    const double rho = spearman(periods, pc);
    bool d_ok = true;
    for (std::size_t i = 0; i < periods.size(); ++i)
        if (periods[i] >= 2.0) d_ok = d_ok && sa_d[i] > ra_d[i];
    const json sa_jnd = s["SA1"]["jnd_mm"], ra_jnd = s["RA1"]["jnd_mm"];
    const bool sa_finite = sa_jnd.is_number();
    const bool ra_ok = !ra_jnd.is_number() || (sa_finite && ra_jnd.get<double>() > sa_jnd.get<double>());

    o.detail << "SA pc";
    for (std::size_t i = 0; i < periods.size(); ++i) o.detail << ' ' << periods[i] << ":" << pc[i];
    o.detail << "; rho " << rho << "; d' SA/RA";
    for (std::size_t i = 0; i < periods.size(); ++i) o.detail << ' ' << sa_d[i] << "/" << ra_d[i];
    o.detail << "; JND SA " << sa_jnd.dump() << " RA " << ra_jnd.dump();
    o.check(periods.size() == 8, "eight test periods");
    if (periods.size() != 8) return;
    o.check(rho >= 0.8, "Spearman rho >= 0.8");
    o.check(pc[at(5.0)] >= 0.9, "pc(5) >= 0.9");
    o.check(pc[at(5.0)] - pc[at(1.0)] >= 0.3, "pc(5) - pc(1) >= 0.3");
    o.check(d_ok, "SA d' > RA d' for periods >= 2");
    o.check(sa_finite, "SA JND finite");
    o.check(ra_ok, "RA JND not reached or larger");
}

json artifacts(const fs::path& dir) { return json::parse(std::ifstream(dir / "run.json"))["artifacts"]; }

void determinism(Outcome& o) {
    // each subcommand twice, serial and with all cores; exp2 reuses run A from criterion 9
    const fs::path a = g_work / "exp2_run_a", b = g_work / "exp2_run_b";
    struct Step {
        std::string name;
        std::vector<std::string> args;
    };
    const std::vector<Step> steps = {{"exp1a", {"exp1a", "--speed", "10"}},
                                     {"exp1b", {"exp1b", "--grating", "gap3", "--decimate", "2"}},
                                     {"sdt-oracle", {"sdt-oracle"}}};
    bool all = true;
    for (const auto& st : steps) {
        const fs::path d1 = g_work / ("det_" + st.name + "_1"), d2 = g_work / ("det_" + st.name + "_2");
        auto a1 = st.args, a2 = st.args;
        a1.insert(a1.begin(), {"--threads", "1"});
        a2.insert(a2.begin(), {"--threads", "0"});
        const bool ran = cli(d1, a1) == 0 && cli(d2, a2) == 0;
        const bool same = ran && artifacts(d1) == artifacts(d2);
        o.detail << st.name << (same ? " same; " : " DIFFERENT; ");
        all = all && same;
    }
    const bool have_a = fs::exists(a / "run.json") && fs::exists(a / "cnn_sa1.model");
    if (have_a) {
        fs::remove_all(b);
        bool ran = cli(b, {"--threads", "1", "exp2", "collect", "--scale", "desk"}) == 0;
        const bool collect_same = ran && json::parse(std::ifstream(b / "exp2.manifest.json"))["content_sha256"] ==
                                             json::parse(std::ifstream(a / "exp2.manifest.json"))["content_sha256"];
        ran = ran && cli(b, {"--threads", "1", "exp2", "train"}) == 0 && cli(b, {"exp2", "eval"}) == 0;
        const bool eval_same = ran && artifacts(a) == artifacts(b);
        o.detail << "exp2 collect " << (collect_same ? "same" : "DIFFERENT") << ", train+eval "
                 << (eval_same ? "same" : "DIFFERENT");
        all = all && collect_same && eval_same;
    } else {
        o.detail << "exp2 run A missing";
        all = false;
    }
    o.check(all, "identical artifact hashes");
}

}  // namespace

int main(int argc, char** argv) {
    g_work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "tactile_acceptance";
    fs::create_directories(g_work);
    std::set<int> only, known;
    for (int i = 2; i < argc; ++i) {
        if (std::string(argv[i]) == "--known-fail" && i + 1 < argc)
            known.insert(std::stoi(argv[++i]));
        else
            only.insert(std::stoi(argv[i]));
    }

    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
        {"adaptation shapes", adaptation},
        {"speed dependence", speed_dependence},
        {"radial pattern", radial},
        {"edge enhancement", edge_enhancement},
        {"gap-width attenuation", gap_attenuation},
        {"RA-I noise floor", noise_floor},
        {"SDT layer exactness", sdt_layer},
        {"decoder correctness", decoder},
        {"end-to-end grating resolution", grating_resolution},
        {"determinism", determinism},
    };
    int failed = 0, unexpected = 0;
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        bool threw = false;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            threw = true;
            o.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        char head[128];
        std::snprintf(head, sizeof head, "[%s] %2d %-30s (%.1f s) ", o.pass ? "PASS" : "FAIL", id, criteria[i].first, secs);
        lines.push_back(head + o.detail.str());
        std::printf("%s\n", lines.back().c_str());
        std::fflush(stdout);
        if (!o.pass) {
            ++failed;
            if (threw || !known.count(id)) ++unexpected;
        }
    }
    std::printf("\nsummary\n");
    for (const auto& l : lines) std::printf("%s\n", l.substr(0, l.find(')') + 1).c_str());
    std::printf("%d of %zu criteria failed, %d not listed as known failures\n", failed, lines.size(), unexpected);
    return unexpected == 0 ? 0 : 1;
}
