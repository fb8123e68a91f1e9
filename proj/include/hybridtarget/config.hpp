#pragma once

#include "hybridtarget/data.hpp"
#include "hybridtarget/dynamic_update.hpp"
#include "hybridtarget/experiment.hpp"
#include "hybridtarget/gibbs.hpp"
#include "hybridtarget/synthetic.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace ht {

using json = nlohmann::json;

/// Parse a JSON file; Io if unreadable, InvalidConfig if malformed.
json load_json(const std::filesystem::path& path);

/// Options for a single fit: model, sampler and covariate scaling.
struct FitConfig {
    ModelSpec model;
    McmcConfig mcmc;
    bool standardize = true;
    std::map<std::string, ColumnKind> column_kinds;
};

// Each *_from_json starts from `base` and overrides the keys present; unknown
// keys raise InvalidConfig.
ModelSpec model_from_json(const json& j, ModelSpec base = {});
json model_to_json(const ModelSpec& spec);
McmcConfig mcmc_from_json(const json& j, McmcConfig base = {});
json mcmc_to_json(const McmcConfig& cfg);
FitConfig fit_config_from_json(const json& j);
GenConfig gen_config_from_json(const json& j);
json gen_config_to_json(const GenConfig& cfg);
ExperimentPlan plan_from_json(const json& j);

json prior_to_json(const UpdatedPrior& prior);
UpdatedPrior prior_from_json(const json& j);

} // namespace ht
