#pragma once

// First-order optimizers over the network's parameter/gradient registries.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "c2f/net.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

enum class OptimizerKind { sgd, adam, adamw, rmsprop };

// Accepts the literal strings sgd | adam | adamw | rmsprop; throws ConfigError otherwise.
OptimizerKind parse_optimizer_kind(std::string_view name);
std::string to_string(OptimizerKind kind);

struct TrainHyper {
    double lr0 = 0.001;
    double momentum = 0.97;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double alpha = 0.99;  // RMSprop smoothing
    double eps = 1e-8;
    std::size_t epochs = 500;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;

    // Defaults with the per-optimizer weight decay (SGD 5e-4, AdamW 1e-2, others 0).
    static TrainHyper defaults_for(OptimizerKind kind);
    void validate() const;
};

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::sgd;
    std::uint64_t step = 0;
    std::vector<std::string> keys;
    std::vector<Tensor> velocity;       // sgd, rmsprop (momentum buffer)
    std::vector<Tensor> first_moment;   // adam, adamw
    std::vector<Tensor> second_moment;  // adam, adamw, rmsprop (square average)

    // Named view of every buffer, for checkpointing ("velocity.<param>", ...).
    ParamRefs buffers();
};

OptimizerState make_optimizer(OptimizerKind kind, const ParamRefs& params);
OptimizerState make_optimizer(std::string_view kind, const ParamRefs& params);

void sgd_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h);
void adam_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h);
void adamw_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h);
void rmsprop_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h);

// Dispatches on state.kind.
void optimizer_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h);

}  // namespace c2f
