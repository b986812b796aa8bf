#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcmt/trainer.hpp"

namespace gcmt {

// One `key value` line of a config file.
struct ConfigEntry {
    std::string key;
    std::string value;
};

// Ordered key-value store; order is what the writer emits, so resolved
// configs are byte-stable.
struct ConfigMap {
    std::vector<ConfigEntry> entries;

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    void set(const std::string& key, const std::string& value);
};

// Lines of `key value`; `#` comments and blank lines are skipped. Repeated
// keys are rejected.
ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::string& path);
std::string config_to_text(const ConfigMap& map);

// Command-line overrides; these win over file values, which win over
// defaults.
struct ConfigOverrides {
    std::vector<ConfigEntry> sets;
    bool has_seed = false;
    std::uint64_t seed = 0;
    bool has_out = false;
    std::string out_dir;
};

struct GenDataConfig {
    int identities = 100;
    int cameras = 4;
    int images_per_identity_per_camera = 6;
    int latent_dim = 16;
    int input_dim = 32;
    double noise_sigma = 0.08;
    int domains = 2;
    std::uint64_t seed = 0;  // section seed, already derived from the top-level one
    std::string out_dir;
    ConfigMap resolved;
};

struct PretrainCmdConfig {
    std::string dataset;
    PretrainConfig train;
    std::string checkpoint_out;
    std::string out_dir;
    ConfigMap resolved;
};

struct AdaptCmdConfig {
    std::string dataset;
    std::vector<std::string> checkpoints;
    TrainConfig train;
    std::string out_dir;
    ConfigMap resolved;
};

struct EvalCmdConfig {
    std::string dataset;
    std::string checkpoint;
    std::string out_dir;
    ConfigMap resolved;
};

// Each resolver validates the key set (every unknown key and bad value is
// listed in one error), fills defaults, and returns the typed config along
// with the fully expanded map.
GenDataConfig resolve_gen_data_config(const ConfigMap& file, const ConfigOverrides& overrides);
PretrainCmdConfig resolve_pretrain_config(const ConfigMap& file, const ConfigOverrides& overrides);
AdaptCmdConfig resolve_adapt_config(const ConfigMap& file, const ConfigOverrides& overrides);
EvalCmdConfig resolve_eval_config(const ConfigMap& file, const ConfigOverrides& overrides);

}  // namespace gcmt
