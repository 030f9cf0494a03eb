#pragma once

// Command implementations behind the CLI. Each throws the c2f error types;
// run_command maps them to exit codes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "c2f/config.hpp"
#include "c2f/metrics.hpp"

namespace c2f {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitNumeric = 4, kExitCheckpoint = 5 };

// Runs `fn`, printing any error to `err`, and returns the exit code for it.
int run_command(const std::function<void()>& fn, std::ostream& err);

// Trains into config.output_dir: curves.csv, last.ckpt, best.ckpt, loss.svg, accuracy.svg, config.txt.
// With `resume`, training continues from that checkpoint up to config.epochs.
void cmd_train(const RunConfig& config, const std::optional<std::filesystem::path>& resume, std::ostream& log);

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path data_root;
    std::string split = "test";
    std::optional<int> positive_class;  // default: the checkpoint's
    std::size_t batch_size = 16;
    std::filesystem::path output_dir;   // default: the checkpoint's directory
};

// Writes report.csv, metrics.txt, confusion.txt and predictions.csv.
MetricsReport cmd_eval(const EvalOptions& options, std::ostream& out);

struct Prediction {
    int label = 0;
    std::array<double, 2> probabilities{};
};

Prediction cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& image, std::ostream& out);

struct TsneCommand {
    std::filesystem::path data_root;
    std::string split = "train";
    std::size_t dims = 2;
    double perplexity = 30.0;
    std::uint64_t seed = 0;
    std::size_t iterations = 1000;
    std::size_t img_size = 128;
    std::string features = "pixels";  // pixels | pooled
    std::filesystem::path checkpoint;   // required for pooled features
    std::filesystem::path output_dir = "runs/tsne";
};

// Writes embedding.csv and embedding.svg.
void cmd_tsne(const TsneCommand& options, std::ostream& log);

struct ReportCommand {
    std::optional<ConfusionMatrix2> counts;
    std::string name = "run";
    std::vector<std::filesystem::path> report_files;  // report.csv files to tabulate
};

// Prints a percentage table: optimizer, accuracy, precision, f1, recall, ap.
void cmd_report(const ReportCommand& options, std::ostream& out);

}  // namespace c2f
