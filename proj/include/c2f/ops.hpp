#pragma once

// Differentiable primitives with hand-written backward passes.
//
// Every forward/backward here is a pure function of its arguments, except
// batchnorm_forward in training mode, which also updates the running
// statistics held in its parameter record. Reductions accumulate in double
// with a fixed order per output element, so results do not depend on how
// the work is scheduled.

#include <cstddef>
#include <span>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

struct ConvParams {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    Tensor weight;  // [out, in, kh, kw]
    Tensor bias;    // [out]

    // Zero weight and bias of the declared geometry.
    static ConvParams make(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                           std::size_t padding);
    void validate() const;
};

struct ConvGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

// Output extent along one spatial axis: floor((in + 2*pad - k) / stride) + 1.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

Tensor conv2d_forward(const Tensor& input, const ConvParams& p);
ConvGrads conv2d_backward(const Tensor& input, const ConvParams& p, const Tensor& grad_out);

struct BatchNormParams {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    float eps = 1e-5f;
    float stats_momentum = 0.1f;

    static BatchNormParams make(std::size_t channels);
    std::size_t channels() const { return gamma.numel(); }
    void validate() const;
};

// Per-channel statistics captured by a forward pass for use in backward.
struct BatchNormCache {
    bool valid = false;
    bool training = false;
    std::vector<double> mean;
    std::vector<double> inv_std;
};

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

Tensor batchnorm_forward(const Tensor& input, BatchNormParams& p, bool training, BatchNormCache* cache = nullptr);
// Inference-mode normalization with the running statistics; never mutates `p`.
Tensor batchnorm_forward(const Tensor& input, const BatchNormParams& p);
BatchNormGrads batchnorm_backward(const Tensor& input, const BatchNormParams& p, const Tensor& grad_out,
                                  const BatchNormCache& cache);

float sigmoid(float x);
Tensor silu(const Tensor& input);
Tensor silu_backward(const Tensor& input, const Tensor& grad_out);

// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad_out);

Tensor concat_channels(std::span<const Tensor> parts);
std::vector<Tensor> split_channels(const Tensor& x, std::span<const std::size_t> sizes);

Tensor add(const Tensor& a, const Tensor& b);

struct LinearGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

// y = x W^T + b with x [N,Din], W [Dout,Din], b [Dout].
Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias);
LinearGrads linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out);

// Row-wise softmax of [N,K] logits.
Tensor softmax(const Tensor& logits);

struct LossResult {
    double loss = 0.0;  // mean over the batch
    Tensor grad_logits;
};

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace c2f
