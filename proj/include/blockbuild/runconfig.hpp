#pragma once

#include "blockbuild/model.hpp"
#include "blockbuild/training.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace blockbuild {

// Merged view of config-file values and flag overrides. Every field is
// addressable through the dotted-key schema below; unknown keys are errors.
struct RunConfig {
    ModelConfig model;
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    int vocab_min_freq = 1;
    int vocab_max_size = 30000;
    int eval_max_steps = 32;
    bool corpus_lenient = false;
    bool timing_deterministic = false;
    int threads = 1;
};

struct ConfigKey {
    std::string key;
    std::string description;
    std::function<void(RunConfig&, const std::string&)> set; // throws UsageError
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<ConfigKey>& config_schema();

/// Applies `key = value` lines (# comments and blanks allowed).
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

void apply_override(RunConfig& config, const std::string& key, const std::string& value);

/// Deterministic echo of every key, schema order, one `key = value` per line.
std::string render_effective_config(const RunConfig& config);

} // namespace blockbuild
