#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "tactile/decoder.hpp"
#include "tactile/experiments.hpp"
#include "tactile/skin.hpp"

namespace tactile {

// JSON mappings. Readers accept partial objects (missing keys keep their
// defaults) and reject unknown keys so typos surface as InvalidArgument.
void to_json(nlohmann::json& j, const SensorGeometry& v);
void from_json(const nlohmann::json& j, SensorGeometry& v);
void to_json(nlohmann::json& j, const SkinParameters& v);
void from_json(const nlohmann::json& j, SkinParameters& v);
void to_json(nlohmann::json& j, const Exp1aConfig& v);
void from_json(const nlohmann::json& j, Exp1aConfig& v);
void to_json(nlohmann::json& j, const Exp1bConfig& v);
void from_json(const nlohmann::json& j, Exp1bConfig& v);
void to_json(nlohmann::json& j, const PoseRanges& v);
void from_json(const nlohmann::json& j, PoseRanges& v);
void to_json(nlohmann::json& j, const DatasetSpec& v);
void from_json(const nlohmann::json& j, DatasetSpec& v);
void to_json(nlohmann::json& j, const ConvStage& v);
void from_json(const nlohmann::json& j, ConvStage& v);
void to_json(nlohmann::json& j, const DecoderConfig& v);
void from_json(const nlohmann::json& j, DecoderConfig& v);

struct RunConfig {
    SensorGeometry geometry;
    SkinParameters skin;
    std::string catalogue_path;  // empty: built-in catalogue
    Exp1aConfig exp1a;
    Exp1bConfig exp1b;
    DatasetSpec exp2 = DatasetSpec::desk();
    DecoderConfig decoder;
    std::uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const RunConfig& v);
void from_json(const nlohmann::json& j, RunConfig& v);

// Relative paths inside the file resolve against the file's directory.
RunConfig load_run_config(const std::string& path);

}  // namespace tactile
