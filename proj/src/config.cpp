#include "tactile/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "tactile/errors.hpp"

namespace tactile {

using nlohmann::json;

namespace {

class Fields {
public:
    Fields(const json& j, const char* what) : j_(j), what_(what) {
        if (!j.is_object()) throw InvalidArgument(std::string(what) + " must be a JSON object");
    }
    template <class T>
    void get(const char* key, T& v) {
        known_.insert(key);
        if (j_.contains(key)) v = j_.at(key).get<T>();
    }
    ~Fields() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (const auto& item : j_.items())
            if (!known_.count(item.key()))
                throw InvalidArgument(std::string("unknown key '") + item.key() + "' in " + what_);
    }

private:
    const json& j_;
    const char* what_;
    std::set<std::string> known_;
};

}  // namespace

void to_json(json& j, const SensorGeometry& v) {
    j = {{"grid", v.grid}, {"pitch_mm", v.pitch}, {"dome_height_mm", v.dome_height}};
}
void from_json(const json& j, SensorGeometry& v) {
    Fields f(j, "geometry");
    f.get("grid", v.grid);
    f.get("pitch_mm", v.pitch);
    f.get("dome_height_mm", v.dome_height);
}

void to_json(json& j, const SkinParameters& v) {
    j = {{"in_plane_stiffness", v.in_plane_stiffness},
         {"bending_penalty", v.bending_penalty},
         {"contact_stiffness_ratio", v.contact_stiffness_ratio},
         {"noise_sigma_mm", v.noise_sigma},
         {"pin_length_mm", v.pin_length},
         {"tip_radius_mm", v.tip_radius},
         {"pin_base_width_mm", v.pin_base_width},
         {"bulge_gain", v.bulge_gain},
         {"subdivision", v.subdivision},
         {"max_iterations", v.max_iterations},
         {"tolerance", v.tolerance}};
}
void from_json(const json& j, SkinParameters& v) {
    Fields f(j, "skin");
    f.get("in_plane_stiffness", v.in_plane_stiffness);
    f.get("bending_penalty", v.bending_penalty);
    f.get("contact_stiffness_ratio", v.contact_stiffness_ratio);
    f.get("noise_sigma_mm", v.noise_sigma);
    f.get("pin_length_mm", v.pin_length);
    f.get("tip_radius_mm", v.tip_radius);
    f.get("pin_base_width_mm", v.pin_base_width);
    f.get("bulge_gain", v.bulge_gain);
    f.get("subdivision", v.subdivision);
    f.get("max_iterations", v.max_iterations);
    f.get("tolerance", v.tolerance);
}

void to_json(json& j, const Exp1aConfig& v) {
    j = {{"start_clearance_mm", v.start_clearance},
         {"max_indentation_mm", v.max_indentation},
         {"hold_duration_s", v.hold_duration},
         {"frame_rate_hz", v.frame_rate}};
}
void from_json(const json& j, Exp1aConfig& v) {
    Fields f(j, "exp1a");
    f.get("start_clearance_mm", v.start_clearance);
    f.get("max_indentation_mm", v.max_indentation);
    f.get("hold_duration_s", v.hold_duration);
    f.get("frame_rate_hz", v.frame_rate);
}

void to_json(json& j, const Exp1bConfig& v) {
    j = {{"step_mm", v.step},
         {"max_indentation_mm", v.max_indentation},
         {"approach_speed_mmps", v.approach_speed},
         {"hold_duration_s", v.hold_duration},
         {"frame_rate_hz", v.frame_rate},
         {"margin_mm", v.margin}};
}
void from_json(const json& j, Exp1bConfig& v) {
    Fields f(j, "exp1b");
    f.get("step_mm", v.step);
    f.get("max_indentation_mm", v.max_indentation);
    f.get("approach_speed_mmps", v.approach_speed);
    f.get("hold_duration_s", v.hold_duration);
    f.get("frame_rate_hz", v.frame_rate);
    f.get("margin_mm", v.margin);
}

void to_json(json& j, const PoseRanges& v) {
    j = {{"psi_deg", v.psi}, {"phi_deg", v.phi}, {"theta_deg", v.theta},
         {"x_mm", v.x},      {"y_mm", v.y},      {"z_mm", v.z}};
}
void from_json(const json& j, PoseRanges& v) {
    Fields f(j, "pose_ranges");
    f.get("psi_deg", v.psi);
    f.get("phi_deg", v.phi);
    f.get("theta_deg", v.theta);
    f.get("x_mm", v.x);
    f.get("y_mm", v.y);
    f.get("z_mm", v.z);
}

void to_json(json& j, const DatasetSpec& v) {
    j = {{"train_periods_mm", v.train_periods},
         {"test_periods_mm", v.test_periods},
         {"groove_depth_mm", v.groove_depth},
         {"samples_per_grating", v.samples_per_grating},
         {"test_per_condition", v.test_per_condition},
         {"val_fraction", v.val_fraction},
         {"test_psi_a_deg", v.test_psi_a},
         {"test_psi_b_deg", v.test_psi_b},
         {"pose_ranges", v.ranges},
         {"start_clearance_mm", v.start_clearance},
         {"max_indentation_mm", v.max_indentation},
         {"approach_speed_mmps", v.approach_speed},
         {"hold_duration_s", v.hold_duration},
         {"frame_rate_hz", v.frame_rate},
         {"max_failure_fraction", v.max_failure_fraction},
         {"seed", v.seed}};
}
void from_json(const json& j, DatasetSpec& v) {
    Fields f(j, "exp2");
    f.get("train_periods_mm", v.train_periods);
    f.get("test_periods_mm", v.test_periods);
    f.get("groove_depth_mm", v.groove_depth);
    f.get("samples_per_grating", v.samples_per_grating);
    f.get("test_per_condition", v.test_per_condition);
    f.get("val_fraction", v.val_fraction);
    f.get("test_psi_a_deg", v.test_psi_a);
    f.get("test_psi_b_deg", v.test_psi_b);
    f.get("pose_ranges", v.ranges);
    f.get("start_clearance_mm", v.start_clearance);
    f.get("max_indentation_mm", v.max_indentation);
    f.get("approach_speed_mmps", v.approach_speed);
    f.get("hold_duration_s", v.hold_duration);
    f.get("frame_rate_hz", v.frame_rate);
    f.get("max_failure_fraction", v.max_failure_fraction);
    f.get("seed", v.seed);
}

void to_json(json& j, const ConvStage& v) { j = {{"kernel", v.kernel}, {"channels", v.channels}, {"stride", v.stride}}; }
void from_json(const json& j, ConvStage& v) {
    Fields f(j, "conv stage");
    f.get("kernel", v.kernel);
    f.get("channels", v.channels);
    f.get("stride", v.stride);
}

void to_json(json& j, const DecoderConfig& v) {
    j = {{"conv", v.conv},
         {"hidden", v.hidden},
         {"activation", to_string(v.activation)},
         {"learning_rate", v.learning_rate},
         {"momentum", v.momentum},
         {"batch_size", v.batch_size},
         {"epochs", v.epochs},
         {"patience", v.patience},
         {"label_scale", v.label_scale},
         {"init_seed", v.init_seed}};
}
void from_json(const json& j, DecoderConfig& v) {
    Fields f(j, "decoder");
    f.get("conv", v.conv);
    f.get("hidden", v.hidden);
    std::string act = to_string(v.activation);
    f.get("activation", act);
    v.activation = activation_from_string(act);
    f.get("learning_rate", v.learning_rate);
    f.get("momentum", v.momentum);
    f.get("batch_size", v.batch_size);
    f.get("epochs", v.epochs);
    f.get("patience", v.patience);
    f.get("label_scale", v.label_scale);
    f.get("init_seed", v.init_seed);
}

void to_json(json& j, const RunConfig& v) {
    j = {{"geometry", v.geometry}, {"skin", v.skin},   {"catalogue", v.catalogue_path}, {"exp1a", v.exp1a},
         {"exp1b", v.exp1b},       {"exp2", v.exp2},   {"decoder", v.decoder},          {"seed", v.seed}};
}
void from_json(const json& j, RunConfig& v) {
    Fields f(j, "config");
    f.get("geometry", v.geometry);
    f.get("skin", v.skin);
    f.get("catalogue", v.catalogue_path);
    f.get("exp1a", v.exp1a);
    f.get("exp1b", v.exp1b);
    f.get("exp2", v.exp2);
    f.get("decoder", v.decoder);
    f.get("seed", v.seed);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file: " + path);
    RunConfig cfg;
    try {
        json j = json::parse(in);
        cfg = j.get<RunConfig>();
    } catch (const json::exception& e) {
        throw InvalidArgument("malformed config " + path + ": " + e.what());
    }
    if (!cfg.catalogue_path.empty()) {
        std::filesystem::path p(cfg.catalogue_path);
        if (p.is_relative()) cfg.catalogue_path = (std::filesystem::path(path).parent_path() / p).string();
        if (!std::filesystem::exists(cfg.catalogue_path))
            throw InvalidArgument("stimulus catalogue not found: " + cfg.catalogue_path);
    }
    cfg.geometry.validate();
    cfg.skin.validate();
    cfg.exp2.validate();
    cfg.decoder.validate();
    return cfg;
}

}  // namespace tactile
