#include "c2f/net.hpp"

#include <cmath>
#include <utility>

#include "c2f/error.hpp"
#include "c2f/rng.hpp"

namespace c2f {

namespace {

void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

// ---------------------------------------------------------------------------
// ConvBlock

ConvBlock::ConvBlock(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride)
    : conv(ConvParams::make(in, out, kernel, stride, kernel / 2)),
      bn(BatchNormParams::make(out)),
      grad_weight_(conv.weight.shape()),
      grad_bias_(conv.bias.shape()),
      grad_gamma_({out}),
      grad_beta_({out}) {}

Tensor ConvBlock::forward(const Tensor& x) const {
    return silu(batchnorm_forward(conv2d_forward(x, conv), bn));
}

Tensor ConvBlock::forward_train(const Tensor& x) {
    input_ = x;
    conv_out_ = conv2d_forward(x, conv);
    bn_out_ = batchnorm_forward(conv_out_, bn, true, &bn_cache_);
    cached_ = true;
    return silu(bn_out_);
}

Tensor ConvBlock::backward(const Tensor& grad_out) {
    if (!cached_) throw Error("ConvBlock::backward called without a cached training forward");
    Tensor g = silu_backward(bn_out_, grad_out);
    BatchNormGrads bg = batchnorm_backward(conv_out_, bn, g, bn_cache_);
    ConvGrads cg = conv2d_backward(input_, conv, bg.input);
    grad_gamma_ = std::move(bg.gamma);
    grad_beta_ = std::move(bg.beta);
    grad_weight_ = std::move(cg.weight);
    grad_bias_ = std::move(cg.bias);
    return std::move(cg.input);
}

void ConvBlock::init(Rng& rng) {
    init_uniform(conv.weight, conv.in_channels * conv.kernel_h * conv.kernel_w, rng);
    conv.bias.fill(0.0f);
    bn = BatchNormParams::make(conv.out_channels);
}

void ConvBlock::collect(const std::string& prefix, ParamRefs& params, GradRefs& grads, ParamRefs& buffers) {
    params.push_back({prefix + ".conv.weight", &conv.weight});
    params.push_back({prefix + ".conv.bias", &conv.bias});
    params.push_back({prefix + ".bn.gamma", &bn.gamma});
    params.push_back({prefix + ".bn.beta", &bn.beta});
    grads.push_back({prefix + ".conv.weight", &grad_weight_});
    grads.push_back({prefix + ".conv.bias", &grad_bias_});
    grads.push_back({prefix + ".bn.gamma", &grad_gamma_});
    grads.push_back({prefix + ".bn.beta", &grad_beta_});
    buffers.push_back({prefix + ".bn.running_mean", &bn.running_mean});
    buffers.push_back({prefix + ".bn.running_var", &bn.running_var});
}

// ---------------------------------------------------------------------------
// Bottleneck

Bottleneck::Bottleneck(std::size_t channels, bool shortcut)
    : cv1(channels, channels, 3, 1), cv2(channels, channels, 3, 1), shortcut(shortcut) {}

Tensor Bottleneck::forward(const Tensor& x) const {
    Tensor y = cv2.forward(cv1.forward(x));
    return shortcut ? add(x, y) : y;
}

Tensor Bottleneck::forward_train(const Tensor& x) {
    if (shortcut && x.dim(1) != cv2.out_channels()) {
        throw ShapeError("Bottleneck: shortcut needs equal input/output channels");
    }
    Tensor y = cv2.forward_train(cv1.forward_train(x));
    return shortcut ? add(x, y) : y;
}

Tensor Bottleneck::backward(const Tensor& grad_out) {
    Tensor g = cv1.backward(cv2.backward(grad_out));
    return shortcut ? add(g, grad_out) : g;
}

void Bottleneck::init(Rng& rng) {
    cv1.init(rng);
    cv2.init(rng);
}

void Bottleneck::collect(const std::string& prefix, ParamRefs& params, GradRefs& grads, ParamRefs& buffers) {
    cv1.collect(prefix + ".cv1", params, grads, buffers);
    cv2.collect(prefix + ".cv2", params, grads, buffers);
}

// ---------------------------------------------------------------------------
// C2fBlock

C2fBlock::C2fBlock(std::size_t in, std::size_t out, bool shortcut, std::size_t n)
    : shortcut(shortcut), hidden_(out / 2) {
    if (n < 1) throw ShapeError("C2f repeat count must be >= 1");
    if (out < 2 || out % 2 != 0) throw ShapeError("C2f output channels must be even");
    cv_in = ConvBlock(in, 2 * hidden_, 1, 1);
    for (std::size_t i = 0; i < n; ++i) bottlenecks.emplace_back(hidden_, shortcut);
    cv_out = ConvBlock((2 + n) * hidden_, out, 1, 1);
}

Tensor C2fBlock::forward(const Tensor& x) const {
    const std::size_t sizes[] = {hidden_, hidden_};
    std::vector<Tensor> branches = split_channels(cv_in.forward(x), sizes);
    for (const auto& b : bottlenecks) branches.push_back(b.forward(branches.back()));
    return cv_out.forward(concat_channels(branches));
}

Tensor C2fBlock::forward_train(const Tensor& x) {
    const std::size_t sizes[] = {hidden_, hidden_};
    std::vector<Tensor> branches = split_channels(cv_in.forward_train(x), sizes);
    for (auto& b : bottlenecks) branches.push_back(b.forward_train(branches.back()));
    return cv_out.forward_train(concat_channels(branches));
}

Tensor C2fBlock::backward(const Tensor& grad_out) {
    const std::size_t n = bottlenecks.size();
    std::vector<std::size_t> sizes(2 + n, hidden_);
    std::vector<Tensor> parts = split_channels(cv_out.backward(grad_out), sizes);
    // parts[k+2] is the gradient reaching bottleneck k's output through the concat.
    Tensor g = parts[n + 1];
    for (std::size_t k = n; k-- > 0;) g = add(bottlenecks[k].backward(g), parts[k + 1]);
    Tensor merged[] = {std::move(parts[0]), std::move(g)};
    return cv_in.backward(concat_channels(merged));
}

void C2fBlock::init(Rng& rng) {
    cv_in.init(rng);
    for (auto& b : bottlenecks) b.init(rng);
    cv_out.init(rng);
}

void C2fBlock::collect(const std::string& prefix, ParamRefs& params, GradRefs& grads, ParamRefs& buffers) {
    cv_in.collect(prefix + ".cv_in", params, grads, buffers);
    for (std::size_t i = 0; i < bottlenecks.size(); ++i) {
        bottlenecks[i].collect(prefix + ".m." + std::to_string(i), params, grads, buffers);
    }
    cv_out.collect(prefix + ".cv_out", params, grads, buffers);
}

// ---------------------------------------------------------------------------
// ClassifyHead

ClassifyHead::ClassifyHead(std::size_t in, std::size_t num_classes)
    : weight({num_classes, in}), bias({num_classes}), grad_weight_({num_classes, in}), grad_bias_({num_classes}) {}

Tensor ClassifyHead::forward(const Tensor& x) const { return linear_forward(global_avg_pool(x), weight, bias); }

Tensor ClassifyHead::forward_train(const Tensor& x) {
    input_shape_ = x.shape();
    pooled_ = global_avg_pool(x);
    cached_ = true;
    return linear_forward(pooled_, weight, bias);
}

Tensor ClassifyHead::backward(const Tensor& grad_logits) {
    if (!cached_) throw Error("ClassifyHead::backward called without a cached training forward");
    LinearGrads lg = linear_backward(pooled_, weight, grad_logits);
    grad_weight_ = std::move(lg.weight);
    grad_bias_ = std::move(lg.bias);
    return global_avg_pool_backward(input_shape_, lg.input);
}

void ClassifyHead::init(Rng& rng) {
    init_uniform(weight, weight.dim(1), rng);
    bias.fill(0.0f);
}

void ClassifyHead::collect(const std::string& prefix, ParamRefs& params, GradRefs& grads) {
    params.push_back({prefix + ".fc.weight", &weight});
    params.push_back({prefix + ".fc.bias", &bias});
    grads.push_back({prefix + ".fc.weight", &grad_weight_});
    grads.push_back({prefix + ".fc.bias", &grad_bias_});
}

// ---------------------------------------------------------------------------
// NetworkSpec

NetworkSpec NetworkSpec::standard(std::size_t num_classes) {
    NetworkSpec s;
    s.num_classes = num_classes;
    auto conv = [](std::size_t in, std::size_t out) { return StageSpec{StageKind::conv, in, out, 2, false, 0}; };
    auto c2f = [](std::size_t ch, bool sc, std::size_t n) { return StageSpec{StageKind::c2f, ch, ch, 1, sc, n}; };
    s.stages = {conv(3, 16),    conv(16, 32),  c2f(32, false, 1),  conv(32, 64),  c2f(64, true, 2),
                conv(64, 128), c2f(128, true, 2), conv(128, 256), c2f(256, true, 1)};
    return s;
}

std::string NetworkSpec::describe() const {
    std::string out;
    for (const auto& st : stages) {
        if (!out.empty()) out += ' ';
        if (st.kind == StageKind::conv) {
            out += "conv:" + std::to_string(st.in) + ">" + std::to_string(st.out) + "/s" + std::to_string(st.stride);
        } else {
            out += "c2f:" + std::to_string(st.in) + ">" + std::to_string(st.out) + "/" + (st.shortcut ? "T" : "F") +
                   std::to_string(st.repeats);
        }
    }
    const std::size_t last = stages.empty() ? 0 : stages.back().out;
    out += " head:" + std::to_string(last) + ">" + std::to_string(num_classes);
    return out;
}

std::size_t NetworkSpec::conv_stage_count() const {
    std::size_t n = 0;
    for (const auto& st : stages) n += st.kind == StageKind::conv;
    return n;
}

std::size_t NetworkSpec::c2f_stage_count() const {
    std::size_t n = 0;
    for (const auto& st : stages) n += st.kind == StageKind::c2f;
    return n;
}

// ---------------------------------------------------------------------------
// Network

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
    if (spec_.num_classes < 2) throw ShapeError("network needs at least 2 classes");
    if (spec_.stages.empty()) throw ShapeError("network spec has no stages");
    std::size_t channels = 3;
    for (const auto& st : spec_.stages) {
        if (st.in != channels) {
            throw ShapeError("stage input channels " + std::to_string(st.in) + " do not follow previous output " +
                             std::to_string(channels));
        }
        if (st.kind == StageKind::conv) {
            stages_.emplace_back(ConvBlock(st.in, st.out, 3, st.stride));
        } else {
            stages_.emplace_back(C2fBlock(st.in, st.out, st.shortcut, st.repeats));
        }
        channels = st.out;
    }
    head_ = ClassifyHead(channels, spec_.num_classes);
}

void Network::check_input(const Tensor& images) const {
    if (images.rank() != 4 || images.dim(1) != 3) {
        throw ShapeError("network expects [N,3,H,W] images, got " + shape_str(images.shape()));
    }
    if (images.dim(2) % 16 != 0 || images.dim(3) % 16 != 0) {
        throw ShapeError("network input spatial size must be a multiple of 16, got " + shape_str(images.shape()));
    }
}

Tensor Network::forward(const Tensor& images) const {
    check_input(images);
    Tensor x = images;
    for (const auto& st : stages_) {
        x = std::visit([&](const auto& block) { return block.forward(x); }, st);
    }
    Tensor logits = head_.forward(x);
    logits.require_finite("logits");
    return logits;
}

Tensor Network::forward(const Tensor& images, bool training) {
    if (!training) return std::as_const(*this).forward(images);
    check_input(images);
    Tensor x = images;
    for (auto& st : stages_) {
        x = std::visit([&](auto& block) { return block.forward_train(x); }, st);
    }
    Tensor logits = head_.forward_train(x);
    logits.require_finite("logits");
    cached_ = true;
    return logits;
}

GradRefs Network::backward(const Tensor& grad_logits) {
    if (!cached_) throw Error("Network::backward requires a preceding forward with training=true");
    Tensor g = head_.backward(grad_logits);
    for (std::size_t i = stages_.size(); i-- > 0;) {
        g = std::visit([&](auto& block) { return block.backward(g); }, stages_[i]);
    }
    return gradients();
}

std::vector<Shape> Network::shape_trace(const Tensor& images) const {
    check_input(images);
    std::vector<Shape> trace;
    Tensor x = images;
    for (const auto& st : stages_) {
        x = std::visit([&](const auto& block) { return block.forward(x); }, st);
        trace.push_back(x.shape());
    }
    trace.push_back(head_.forward(x).shape());
    return trace;
}

Tensor Network::pooled_features(const Tensor& images) const {
    check_input(images);
    Tensor x = images;
    for (const auto& st : stages_) {
        x = std::visit([&](const auto& block) { return block.forward(x); }, st);
    }
    return global_avg_pool(x);
}

void Network::collect(ParamRefs* params, GradRefs* grads, ParamRefs* buffers) {
    ParamRefs p, b;
    GradRefs g;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const std::string prefix = "stages." + std::to_string(i);
        std::visit([&](auto& block) { block.collect(prefix, p, g, b); }, stages_[i]);
    }
    head_.collect("head", p, g);
    if (params) *params = std::move(p);
    if (grads) *grads = std::move(g);
    if (buffers) *buffers = std::move(b);
}

ParamRefs Network::parameters() {
    ParamRefs p;
    collect(&p, nullptr, nullptr);
    return p;
}

GradRefs Network::gradients() {
    GradRefs g;
    collect(nullptr, &g, nullptr);
    return g;
}

ParamRefs Network::buffers() {
    ParamRefs b;
    collect(nullptr, nullptr, &b);
    return b;
}

std::size_t Network::parameter_count() {
    std::size_t total = 0;
    for (const auto& p : parameters()) total += p.tensor->numel();
    return total;
}

void Network::init(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& st : stages_) std::visit([&](auto& block) { block.init(rng); }, st);
    head_.init(rng);
    cached_ = false;
}

Network build_network(std::size_t num_classes, std::uint64_t seed) {
    Network net(NetworkSpec::standard(num_classes));
    net.init(seed);
    return net;
}

}  // namespace c2f
