#pragma once

// Training state, its checkpoint form, and the per-epoch loop.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "c2f/checkpoint.hpp"
#include "c2f/config.hpp"
#include "c2f/data.hpp"
#include "c2f/net.hpp"
#include "c2f/optim.hpp"

namespace c2f {

struct TrainState {
    RunConfig config;
    Network net;
    OptimizerState optimizer;
    std::size_t epoch = 0;  // completed epochs
    double best_val_accuracy = -1.0;
    std::size_t best_epoch = 0;

    explicit TrainState(const RunConfig& cfg);
};

// Fresh state: network initialised from config.seed, zeroed optimizer buffers.
std::unique_ptr<TrainState> make_train_state(const RunConfig& config);

Checkpoint to_checkpoint(TrainState& state);
RunConfig config_from_checkpoint(const Checkpoint& ck);
// Throws CheckpointError when the stored spec, tensor table or img_size disagree.
std::unique_ptr<TrainState> state_from_checkpoint(const Checkpoint& ck);
Network network_from_checkpoint(const Checkpoint& ck, std::optional<std::size_t> expected_img_size = std::nullopt);

struct Evaluation {
    Tensor logits;  // [N,2], manifest order
    std::vector<int> labels;
    double loss = 0.0;
    double accuracy = 0.0;
};

// Inference-mode pass over every sample of `loader` in manifest order.
Evaluation evaluate(const Network& net, BatchLoader& loader, std::size_t batch_size);

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;  // measured on the training-mode forward passes
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

inline constexpr const char* kCurveHeader = "epoch,train_loss,val_loss,val_accuracy_top1";
std::string format_curve_row(const EpochStats& s);

class Trainer {
public:
    // The manifest must outlive the trainer.
    Trainer(std::unique_ptr<TrainState> state, const DatasetManifest& manifest);

    // One shuffled pass over train, then evaluation on valid. Throws NumericError on a non-finite loss.
    EpochStats run_epoch();

    TrainState& state() { return *state_; }

private:
    EpochStats run_epoch_unchecked();

    std::unique_ptr<TrainState> state_;
    BatchLoader train_;
    BatchLoader valid_;
};

}  // namespace c2f
