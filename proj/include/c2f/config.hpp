#pragma once

// Run configuration: a flat key=value file plus overrides.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "c2f/optim.hpp"

namespace c2f {

struct RunConfig {
    std::filesystem::path data_root;
    OptimizerKind optimizer = OptimizerKind::adamw;
    double lr0 = 0.001;
    double momentum = 0.97;
    std::optional<double> weight_decay;  // unset: the optimizer's default
    double beta1 = 0.9;
    double beta2 = 0.999;
    double alpha = 0.99;
    double eps = 1e-8;
    std::size_t epochs = 500;
    std::size_t batch_size = 16;
    std::size_t img_size = 128;
    std::uint64_t seed = 0;
    int positive_class = 0;
    std::filesystem::path output_dir = "runs/train";
    std::size_t workers = 1;

    TrainHyper hyper() const;
    double effective_weight_decay() const;

    // Throws ConfigError naming the offending field.
    void validate() const;

    // Ordered key/value echo with every field resolved.
    std::vector<std::pair<std::string, std::string>> to_pairs() const;
    std::string to_text() const;
};

// Keys accepted by apply_setting, in to_pairs order.
const std::vector<std::string>& config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// Lines of key=value; blank lines and lines starting with '#' are skipped.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace c2f
