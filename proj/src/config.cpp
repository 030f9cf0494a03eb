#include "c2f/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "c2f/error.hpp"

namespace c2f {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
    }
    return out;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
    }
    return out;
}

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

double RunConfig::effective_weight_decay() const {
    return weight_decay ? *weight_decay : TrainHyper::defaults_for(optimizer).weight_decay;
}

TrainHyper RunConfig::hyper() const {
    TrainHyper h = TrainHyper::defaults_for(optimizer);
    h.lr0 = lr0;
    h.momentum = momentum;
    h.weight_decay = effective_weight_decay();
    h.beta1 = beta1;
    h.beta2 = beta2;
    h.alpha = alpha;
    h.eps = eps;
    h.epochs = epochs;
    h.batch_size = batch_size;
    h.seed = seed;
    return h;
}

void RunConfig::validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("lr0: must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum: must be in [0, 1)");
    if (!(effective_weight_decay() >= 0.0)) throw ConfigError("weight_decay: must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1: must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2: must be in [0, 1)");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha: must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("eps: must be positive");
    if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (img_size < 16 || img_size % 16 != 0) throw ConfigError("img_size: must be a positive multiple of 16");
    if (positive_class != 0 && positive_class != 1) throw ConfigError("positive_class: must be 0 or 1");
    if (workers < 1) throw ConfigError("workers: must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "data_root", "optimizer", "lr0",      "momentum",       "weight_decay", "beta1",      "beta2", "alpha",
        "eps",       "epochs",    "batch_size", "img_size",     "seed",         "positive_class", "output_dir",
        "workers"};
    return keys;
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_pairs() const {
    return {{"data_root", data_root.generic_string()},
            {"optimizer", to_string(optimizer)},
            {"lr0", num(lr0)},
            {"momentum", num(momentum)},
            {"weight_decay", num(effective_weight_decay())},
            {"beta1", num(beta1)},
            {"beta2", num(beta2)},
            {"alpha", num(alpha)},
            {"eps", num(eps)},
            {"epochs", std::to_string(epochs)},
            {"batch_size", std::to_string(batch_size)},
            {"img_size", std::to_string(img_size)},
            {"seed", std::to_string(seed)},
            {"positive_class", std::to_string(positive_class)},
            {"output_dir", output_dir.generic_string()},
            {"workers", std::to_string(workers)}};
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : to_pairs()) out += k + "=" + v + "\n";
    return out;
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view raw) {
    const std::string_view v = trim(raw);
    if (key == "data_root") c.data_root = std::string(v);
    else if (key == "optimizer") c.optimizer = parse_optimizer_kind(v);
    else if (key == "lr0") c.lr0 = parse_double(key, v);
    else if (key == "momentum") c.momentum = parse_double(key, v);
    else if (key == "weight_decay") c.weight_decay = parse_double(key, v);
    else if (key == "beta1") c.beta1 = parse_double(key, v);
    else if (key == "beta2") c.beta2 = parse_double(key, v);
    else if (key == "alpha") c.alpha = parse_double(key, v);
    else if (key == "eps") c.eps = parse_double(key, v);
    else if (key == "epochs") c.epochs = parse_unsigned(key, v);
    else if (key == "batch_size") c.batch_size = parse_unsigned(key, v);
    else if (key == "img_size") c.img_size = parse_unsigned(key, v);
    else if (key == "seed") c.seed = parse_unsigned(key, v);
    else if (key == "positive_class") c.positive_class = static_cast<int>(parse_unsigned(key, v));
    else if (key == "output_dir") c.output_dir = std::string(v);
    else if (key == "workers") c.workers = parse_unsigned(key, v);
    else throw ConfigError(fmt::format("unknown config key '{}'", key));
}

RunConfig parse_config(std::string_view text, RunConfig base) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected key=value", line_no));
        apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

}  // namespace c2f
