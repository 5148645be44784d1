#pragma once

#include <string>

#include "uwrange/experiment.hpp"

namespace uwrange {

/// Loads a flat `key = value` config file (one pair per line, `#` comments)
/// into an ExperimentConfig.  Unknown keys are an error.  See the README for
/// the key reference.
ExperimentConfig parse_experiment_config(const std::string& path);

/// All defaults, no file.
ExperimentConfig default_experiment_config();

/// Two-column `depth,speed` CSV (optional header) to SSP samples.
std::vector<SspSample> load_ssp_csv(const std::string& path);

}  // namespace uwrange
