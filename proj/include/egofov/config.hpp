#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "egofov/joint.hpp"
#include "egofov/pipeline.hpp"
#include "egofov/synth.hpp"

namespace egofov {

// Every tunable default of the pipeline. Serialized as nested JSON objects;
// `--set` paths use dots, e.g. `ransac.iterations=500`.
struct RunConfig {
    LocalizerConfig localizer;
    JointParams joint;

    void validate() const;
};

// The JSON document holding every key with its default value.
std::string default_config_json();
std::string to_json(const RunConfig& config);

// Overlays `json_text` on the defaults. Unknown keys and type mismatches
// throw Error(Config) naming the key path.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

// Applies `path=value` overrides in order. The value is parsed as JSON when
// possible (numbers, booleans, null), otherwise taken as a string.
RunConfig apply_overrides(const RunConfig& base, const std::vector<std::string>& assignments);

// Defaults, then the config file (explicit path, else $EGOFOV_CONFIG when
// set), then `--set` assignments.
RunConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path,
                         const std::vector<std::string>& assignments);

// Dataset generation settings for `egofov synth`.
std::string to_json(const DatasetSpec& spec);
DatasetSpec parse_dataset_spec(const std::string& json_text);

}  // namespace egofov
