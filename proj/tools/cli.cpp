#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tactile/afferents.hpp"
#include "tactile/config.hpp"
#include "tactile/decoder.hpp"
#include "tactile/errors.hpp"
#include "tactile/experiments.hpp"
#include "tactile/hash.hpp"
#include "tactile/parallel.hpp"
#include "tactile/rng.hpp"
#include "tactile/sdt.hpp"

namespace tactile::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
    RunConfig cfg;
    GratingCatalogue catalogue;
    fs::path out_dir;
    std::vector<std::string> artifacts;  // file names inside out_dir
    std::ostream* out = nullptr;

    fs::path file(const std::string& name) {
        artifacts.push_back(name);
        return out_dir / name;
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

void write_run_json(Context& ctx, const std::string& command, const json& extra = json::object()) {
    json art = json::object();
    std::sort(ctx.artifacts.begin(), ctx.artifacts.end());
    ctx.artifacts.erase(std::unique(ctx.artifacts.begin(), ctx.artifacts.end()), ctx.artifacts.end());
    for (const auto& a : ctx.artifacts) art[a] = sha256_file((ctx.out_dir / a).string());
    json j = {{"command", command}, {"seed", ctx.cfg.seed}, {"config", ctx.cfg}, {"artifacts", art}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    std::ofstream f(ctx.out_dir / "run.json");
    if (!f) throw std::runtime_error("cannot write run.json");
    f << j.dump(2) << '\n';
}

void snapshot(Context& ctx, const std::string& stem, const TactileImage& img) {
    write_image_csv(ctx.file(stem + ".csv").string(), img);
    write_image_pgm(ctx.file(stem + ".pgm").string(), img);
    ctx.artifacts.push_back(stem + ".pgm.json");
}

void cmd_exp1a(Context& ctx, double speed) {
    const auto r = run_exp1a(ctx.cfg.geometry, ctx.cfg.skin, speed, ctx.cfg.exp1a, derive_seed(ctx.cfg.seed, {0x1a}));
    const std::string stem = "exp1a_" + fmt(speed) + "mmps";
    {
        std::ofstream f(ctx.file(stem + ".csv"));
        write_exp1a_csv(f, r);
    }
    const std::pair<const char*, long> marks[] = {{"press_start", r.marks.press_start},
                                                  {"hold_start", r.marks.hold_start},
                                                  {"release_start", r.marks.release_start},
                                                  {"end", r.marks.end}};
    for (const auto& [name, k] : marks) {
        snapshot(ctx, stem + "_" + name + "_sa1", r.series.sa1[k]);
        snapshot(ctx, stem + "_" + name + "_ra1", r.series.ra1[std::max(0L, k - 1)]);
    }
    double ra_peak = 0.0;
    for (std::size_t k = 0; k < r.ra1_total.size(); ++k)
        if (r.phase[k] == Phase::approach) ra_peak = std::max(ra_peak, r.ra1_total[k]);
    *ctx.out << "exp1a speed " << speed << " mm/s: " << r.t.size() << " frames, RA-I press peak " << ra_peak
             << " mm/s, SA-I hold " << r.sa1_total[r.marks.hold_start] << " mm\n";
}

void cmd_exp1b(Context& ctx, const std::string& grating, int dec) {
    std::vector<StimulusProfile> list;
    if (grating == "all") list = ctx.catalogue.aperiodic_set;
    else {
        const auto& g = ctx.catalogue.find(grating);
        if (g.kind() != StimulusKind::aperiodic) throw InvalidArgument("'" + grating + "' is not an aperiodic grating");
        list.push_back(g);
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
        auto srp = run_exp1b(ctx.cfg.geometry, ctx.cfg.skin, list[i], ctx.cfg.exp1b, derive_seed(ctx.cfg.seed, {0x1b}));
        if (dec > 1) srp = decimate(srp, dec);
        std::ofstream f(ctx.file("srp_" + list[i].name() + ".csv"));
        write_srp_csv(f, srp);
        *ctx.out << "exp1b " << list[i].name() << ": " << srp.positions.size() << " positions\n";
    }
}

std::string dataset_base(Context& ctx) { return (ctx.out_dir / "exp2").string(); }

void cmd_exp2_collect(Context& ctx, const std::string& scale) {
    DatasetSpec spec = ctx.cfg.exp2;
    if (scale == "paper") {
        spec.samples_per_grating = DatasetSpec::paper().samples_per_grating;
        spec.test_per_condition = DatasetSpec::paper().test_per_condition;
    } else if (scale == "desk") {
        spec.samples_per_grating = DatasetSpec::desk().samples_per_grating;
        spec.test_per_condition = DatasetSpec::desk().test_per_condition;
    } else if (scale != "config") {
        throw InvalidArgument("--scale must be desk, paper or config");
    }
    spec.seed = ctx.cfg.seed;
    ctx.cfg.exp2 = spec;
    const Dataset ds = collect_exp2(ctx.cfg.geometry, ctx.cfg.skin, spec);
    const std::string hash = save_dataset(ds, dataset_base(ctx));
    ctx.artifacts.push_back("exp2.manifest.json");
    ctx.artifacts.push_back("exp2.bin");
    *ctx.out << "exp2 collect: " << ds.count(Split::train) + ds.count(Split::val) << " train/val ("
             << ds.count(Split::train) << "/" << ds.count(Split::val) << "), "
             << ds.count(Split::test_A) + ds.count(Split::test_B) << " test, " << ds.failures
             << " failed, hash " << hash << "\n";
}

Dataset load_exp2(Context& ctx) {
    const std::string base = dataset_base(ctx);
    if (!fs::exists(base + ".manifest.json"))
        throw std::runtime_error("no dataset in " + ctx.out_dir.string() + "; run `exp2 collect` first");
    return load_dataset(base);
}

void cmd_exp2_train(Context& ctx) {
    const Dataset ds = load_exp2(ctx);
    for (AfferentKind kind : {AfferentKind::SA1, AfferentKind::RA1}) {
        const std::string k = kind == AfferentKind::SA1 ? "sa1" : "ra1";
        const auto seed = derive_seed(ctx.cfg.seed, {0xc0, kind == AfferentKind::SA1 ? 0u : 1u});
        const auto res = train(ds, kind, ctx.cfg.decoder, seed);
        save_model(res.model, ctx.file("cnn_" + k + ".model").string());
        write_train_report_csv(ctx.file("train_" + k + ".csv").string(), res.report);
        *ctx.out << "exp2 train " << to_string(kind) << ": " << res.report.epochs_run << " epochs, val MAE "
                 << res.report.val_mae << " deg\n";
    }
}

json cmd_exp2_eval(Context& ctx) {
    const Dataset ds = load_exp2(ctx);
    json summary = json::object();
    for (AfferentKind kind : {AfferentKind::SA1, AfferentKind::RA1}) {
        const std::string k = kind == AfferentKind::SA1 ? "sa1" : "ra1";
        const fs::path mp = ctx.out_dir / ("cnn_" + k + ".model");
        if (!fs::exists(mp)) throw std::runtime_error("missing " + mp.string() + "; run `exp2 train` first");
        const DecoderModel model = load_model(mp.string());
        if (model.kind != kind) throw InvalidArgument(mp.string() + " holds a " + to_string(model.kind) + " model");
        std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_period;
        std::ofstream dist(ctx.file("distributions_" + k + ".csv"));
        dist.precision(10);
        dist << "period_mm,condition,x\n";
        for (const auto& s : ds.samples) {
            if (s.split != Split::test_A && s.split != Split::test_B) continue;
            const double x = predict(model, kind == AfferentKind::SA1 ? s.sa1 : s.ra1);
            const bool a = s.split == Split::test_A;
            (a ? by_period[s.period].first : by_period[s.period].second).push_back(x);
            dist << s.period << ',' << (a ? "A" : "B") << ',' << x << '\n';
        }
        std::vector<DecisionModel> models;
        for (const auto& [p, ab] : by_period) {
            if (ab.first.empty() || ab.second.empty()) continue;
            models.push_back(fit_decision_model(p, ab.first, ab.second));
        }
        const PsychometricCurve curve = build_curve(models);
        std::ofstream csv(ctx.file("psychometric_" + k + ".csv"));
        csv.precision(10);
        csv << "period_mm,p_r2_s2,p_r2_s1,pc,dprime\n";
        json pts = json::array();
        for (const auto& pt : curve.points) {
            csv << pt.period << ',' << pt.p_r2_s2 << ',' << pt.p_r2_s1 << ',' << pt.pc << ',' << pt.dprime << '\n';
            pts.push_back({{"period_mm", pt.period}, {"pc", pt.pc}, {"dprime", pt.dprime}, {"reversed_rule", pt.reversed}});
        }
        json entry = {{"jnd_mm", curve.jnd ? json(*curve.jnd) : json("not reached")},
                      {"sigma_dprime_low", curve.sigma_dprime_low},
                      {"sigma_dprime_high", curve.sigma_dprime_high},
                      {"dprime_definition", "z(h) - z(q) on covert yes-no rates (declared substitute)"},
                      {"points", pts}};
        summary[to_string(kind)] = entry;
        *ctx.out << "exp2 eval " << to_string(kind) << ": JND "
                 << (curve.jnd ? fmt(*curve.jnd) + " mm" : std::string("not reached")) << "\n";
    }
    std::ofstream f(ctx.file("summary.json"));
    f << summary.dump(2) << '\n';
    return summary;
}

void cmd_sdt_oracle(Context& ctx, double separation, std::size_t n) {
    const auto r = gaussian_oracle(separation, n, ctx.cfg.seed);
    const auto mc = monte_carlo_same_different(r.q, r.h, 1000000, derive_seed(ctx.cfg.seed, {0x3c}));
    json j = {{"separation", separation}, {"n", n},           {"criterion", r.criterion},
              {"q", r.q},                 {"h", r.h},          {"dprime", r.dprime},
              {"p_r2_s2", r.p_r2_s2},     {"p_r2_s1", r.p_r2_s1}, {"pc", r.pc},
              {"monte_carlo_p_r2_s2", mc.first}, {"monte_carlo_p_r2_s1", mc.second}};
    std::ofstream f(ctx.file("sdt_oracle.json"));
    f << j.dump(2) << '\n';
    *ctx.out << "sdt-oracle: c = " << r.criterion << ", d' = " << r.dprime << " (expected " << separation << ")\n";
}

void cmd_ingest(Context& ctx, const std::string& input, double dt) {
    const AfferentSeries s = ingest_marker_csv(input, dt);
    std::ofstream f(ctx.file("ingest_totals.csv"));
    f.precision(10);
    f << "frame,sa1_total,ra1_total\n";
    for (std::size_t k = 0; k < s.sa1.size(); ++k)
        f << s.sa1[k].frame_index << ',' << total_response(s.sa1[k]) << ','
          << (k == 0 ? 0.0 : total_response(s.ra1[k - 1])) << '\n';
    snapshot(ctx, "ingest_peak_sa1", peak_frame(s, AfferentKind::SA1));
    if (!s.ra1.empty()) snapshot(ctx, "ingest_peak_ra1", peak_frame(s, AfferentKind::RA1));
    *ctx.out << "ingest: " << s.sa1.size() << " frames\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tactile afferent simulator and grating-resolution pipeline"};
    app.require_subcommand(1);
    std::string config_path, catalogue_path, out_dir = "out";
    std::uint64_t seed = 0;
    unsigned threads = 1;
    double noise = -1.0;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--catalogue", catalogue_path, "stimulus catalogue JSON (overrides the config)");
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (0 = all cores)");
    app.add_option("--noise", noise, "override skin noise_sigma in mm")->check(CLI::NonNegativeNumber);

    double speed = 3.0;
    auto* e1a = app.add_subcommand("exp1a", "normal press on a flat plate");
    e1a->add_option("--speed", speed, "press speed in mm/s");

    std::string grating = "all";
    int dec = 1;
    auto* e1b = app.add_subcommand("exp1b", "spatial response profiles over aperiodic gratings");
    e1b->add_option("--grating", grating, "grating name or 'all'");
    e1b->add_option("--decimate", dec, "report every n-th sweep position")->check(CLI::PositiveNumber);

    std::string scale = "desk";
    auto* e2 = app.add_subcommand("exp2", "grating orientation dataset, decoders and psychometrics");
    e2->require_subcommand(1);
    auto* e2c = e2->add_subcommand("collect", "simulate the labelled dataset");
    e2c->add_option("--scale", scale, "desk, paper or config")->check(CLI::IsMember({"desk", "paper", "config"}));
    auto* e2t = e2->add_subcommand("train", "train CNN-SA1 and CNN-RA1");
    auto* e2e = e2->add_subcommand("eval", "psychometric curves from the test split");

    double separation = 1.0;
    std::size_t n = 100000;
    auto* so = app.add_subcommand("sdt-oracle", "Gaussian self-test of the SDT layer");
    so->add_option("--separation", separation, "mean separation in SD units");
    so->add_option("--n", n, "samples per condition")->check(CLI::PositiveNumber);

    std::string input;
    double dt = 1.0 / 30.0;
    auto* ing = app.add_subcommand("ingest", "tactile images from an external marker CSV");
    ing->add_option("--input", input, "marker CSV")->required();
    ing->add_option("--dt", dt, "seconds per frame");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalidArguments;
    }

    Context ctx;
    ctx.out = &out;
    std::string command;
    try {
        if (!config_path.empty()) ctx.cfg = load_run_config(config_path);
        if (!catalogue_path.empty()) ctx.cfg.catalogue_path = catalogue_path;
        if (seed_opt->count() > 0) ctx.cfg.seed = seed;
        if (noise >= 0.0) ctx.cfg.skin.noise_sigma = noise;
        ctx.catalogue = ctx.cfg.catalogue_path.empty() ? default_catalogue() : load_catalogue(ctx.cfg.catalogue_path);
        set_thread_count(threads);
        ctx.out_dir = out_dir;
        fs::create_directories(ctx.out_dir);

        json extra = json::object();
        if (e1a->parsed()) {
            command = "exp1a";
            cmd_exp1a(ctx, speed);
        } else if (e1b->parsed()) {
            command = "exp1b";
            cmd_exp1b(ctx, grating, dec);
            extra["decimate"] = dec;
        } else if (e2c->parsed()) {
            command = "exp2 collect";
            cmd_exp2_collect(ctx, scale);
            extra["scale"] = scale;
        } else if (e2t->parsed()) {
            command = "exp2 train";
            cmd_exp2_train(ctx);
        } else if (e2e->parsed()) {
            command = "exp2 eval";
            cmd_exp2_eval(ctx);
        } else if (so->parsed()) {
            command = "sdt-oracle";
            cmd_sdt_oracle(ctx, separation, n);
        } else if (ing->parsed()) {
            command = "ingest";
            cmd_ingest(ctx, input, dt);
            extra["input"] = input;
        }
        write_run_json(ctx, command, extra);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidArguments;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeFailure;
    }
    return kOk;
}

}  // namespace tactile::cli
