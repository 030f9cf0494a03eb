#pragma once

// The classification network: five stride-2 conv blocks interleaved with
// four C2f blocks, followed by a pool + fully-connected classify head.

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "c2f/ops.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

template <class T>
struct Named {
    std::string name;
    T* tensor = nullptr;
};

using ParamRefs = std::vector<Named<Tensor>>;
using GradRefs = std::vector<Named<const Tensor>>;

class Rng;

/// Conv -> BatchNorm -> SiLU.
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride);

    Tensor forward(const Tensor& x) const;  // inference
    Tensor forward_train(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

    void init(Rng& rng);
    void collect(const std::string& prefix, ParamRefs& params, GradRefs& grads, ParamRefs& buffers);
    std::size_t out_channels() const { return conv.out_channels; }

    ConvParams conv;
    BatchNormParams bn;

private:
    Tensor input_, conv_out_, bn_out_;
    BatchNormCache bn_cache_;
    Tensor grad_weight_, grad_bias_, grad_gamma_, grad_beta_;
    bool cached_ = false;
};

/// Two 3x3 conv blocks with an optional additive residual.
class Bottleneck {
public:
    Bottleneck() = default;
    Bottleneck(std::size_t channels, bool shortcut);

    Tensor forward(const Tensor& x) const;
    Tensor forward_train(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

    void init(Rng& rng);
    void collect(const std::string& prefix, ParamRefs& params, GradRefs& grads, ParamRefs& buffers);

    ConvBlock cv1, cv2;
    bool shortcut = false;
};

/// Split / chained bottlenecks / concat of all 2+n branches / 1x1 projection.
class C2fBlock {
public:
    C2fBlock() = default;
    C2fBlock(std::size_t in, std::size_t out, bool shortcut, std::size_t n);

    Tensor forward(const Tensor& x) const;
    Tensor forward_train(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

    void init(Rng& rng);
    void collect(const std::string& prefix, ParamRefs& params, GradRefs& grads, ParamRefs& buffers);
    std::size_t hidden() const { return hidden_; }
    std::size_t out_channels() const { return cv_out.out_channels(); }

    ConvBlock cv_in;
    std::vector<Bottleneck> bottlenecks;
    ConvBlock cv_out;
    bool shortcut = false;

private:
    std::size_t hidden_ = 0;
};

/// Global average pool -> linear.
class ClassifyHead {
public:
    ClassifyHead() = default;
    ClassifyHead(std::size_t in, std::size_t num_classes);

    Tensor forward(const Tensor& x) const;
    Tensor forward_train(const Tensor& x);
    Tensor backward(const Tensor& grad_logits);

    void init(Rng& rng);
    void collect(const std::string& prefix, ParamRefs& params, GradRefs& grads);

    Tensor weight;  // [num_classes, in]
    Tensor bias;    // [num_classes]

private:
    Shape input_shape_;
    Tensor pooled_;
    Tensor grad_weight_, grad_bias_;
    bool cached_ = false;
};

enum class StageKind { conv, c2f };

struct StageSpec {
    StageKind kind = StageKind::conv;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t stride = 1;   // conv only
    bool shortcut = false;    // c2f only
    std::size_t repeats = 0;  // c2f only
};

struct NetworkSpec {
    std::vector<StageSpec> stages;
    std::size_t num_classes = 2;

    // Conv(16)-Conv(32)-C2f(F,1)-Conv(64)-C2f(T,2)-Conv(128)-C2f(T,2)-Conv(256)-C2f(T,1).
    static NetworkSpec standard(std::size_t num_classes = 2);

    // One-line textual form, e.g. "conv:3>16/s2 c2f:32>32/F1 ... head:256>2".
    std::string describe() const;
    std::size_t conv_stage_count() const;
    std::size_t c2f_stage_count() const;
};

class Network {
public:
    using Stage = std::variant<ConvBlock, C2fBlock>;

    explicit Network(NetworkSpec spec);

    const NetworkSpec& spec() const { return spec_; }

    // Throws ShapeError unless input is [N,3,S,S'] with S, S' positive multiples of 16.
    void check_input(const Tensor& images) const;

    Tensor forward(const Tensor& images) const;  // inference, no caching
    Tensor forward(const Tensor& images, bool training);
    GradRefs backward(const Tensor& grad_logits);

    // Output shape after every stage, then the logits shape (inference mode).
    std::vector<Shape> shape_trace(const Tensor& images) const;
    // Pooled activations feeding the classify head, [N, C_last].
    Tensor pooled_features(const Tensor& images) const;

    // Stable registries in construction order.
    ParamRefs parameters();
    GradRefs gradients();
    ParamRefs buffers();  // BatchNorm running statistics
    std::size_t parameter_count();

    std::vector<Stage>& stages() { return stages_; }
    ClassifyHead& head() { return head_; }

    void init(std::uint64_t seed);

private:
    void collect(ParamRefs* params, GradRefs* grads, ParamRefs* buffers);

    NetworkSpec spec_;
    std::vector<Stage> stages_;
    ClassifyHead head_;
    bool cached_ = false;
};

Network build_network(std::size_t num_classes, std::uint64_t seed);

}  // namespace c2f
