#include "c2f/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "c2f/error.hpp"

namespace c2f {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape " + shape_str(a.shape()) + " does not match " +
                         shape_str(b.shape()));
    }
}

struct ConvGeometry {
    std::size_t n, ci, h, w, co, ho, wo, kh, kw, stride, pad;
    std::size_t k() const { return ci * kh * kw; }
    std::size_t out_hw() const { return ho * wo; }
};

ConvGeometry conv_geometry(const Tensor& input, const ConvParams& p) {
    p.validate();
    require_rank(input, 4, "conv2d");
    if (input.dim(1) != p.in_channels) {
        throw ShapeError("conv2d: input has " + std::to_string(input.dim(1)) + " channels, layer expects " +
                         std::to_string(p.in_channels));
    }
    ConvGeometry g{};
    g.n = input.dim(0);
    g.ci = p.in_channels;
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.co = p.out_channels;
    g.kh = p.kernel_h;
    g.kw = p.kernel_w;
    g.stride = p.stride;
    g.pad = p.padding;
    if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) {
        throw ShapeError("conv2d: input " + shape_str(input.shape()) + " smaller than kernel after padding");
    }
    g.ho = conv_out_extent(g.h, g.kh, g.stride, g.pad);
    g.wo = conv_out_extent(g.w, g.kw, g.stride, g.pad);
    return g;
}

// Unfolds sample n into col [K, Ho*Wo], K = Ci*kh*kw.
void im2col(const float* img, const ConvGeometry& g, std::vector<float>& col) {
    const std::size_t hw = g.out_hw();
    col.assign(g.k() * hw, 0.0f);
    for (std::size_t c = 0; c < g.ci; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                float* row = col.data() + ((c * g.kh + ky) * g.kw + kx) * hw;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    const float* src = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                  static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        row[oy * g.wo + ox] = src[ix];
                    }
                }
            }
        }
    }
}

// Scatter-adds col [K, Ho*Wo] back into the image gradient of one sample.
void col2im(const std::vector<double>& col, const ConvGeometry& g, float* img) {
    const std::size_t hw = g.out_hw();
    std::vector<double> acc(g.ci * g.h * g.w, 0.0);
    for (std::size_t c = 0; c < g.ci; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const double* row = col.data() + ((c * g.kh + ky) * g.kw + kx) * hw;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    double* dst = acc.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                  static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        dst[ix] += row[oy * g.wo + ox];
                    }
                }
            }
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) img[i] = static_cast<float>(acc[i]);
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw ShapeError("conv stride must be >= 1");
    if (in + 2 * padding < kernel) throw ShapeError("conv input extent smaller than kernel");
    return (in + 2 * padding - kernel) / stride + 1;
}

ConvParams ConvParams::make(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
    ConvParams p;
    p.in_channels = in;
    p.out_channels = out;
    p.kernel_h = kernel;
    p.kernel_w = kernel;
    p.stride = stride;
    p.padding = padding;
    p.weight = Tensor({out, in, kernel, kernel});
    p.bias = Tensor({out});
    p.validate();
    return p;
}

void ConvParams::validate() const {
    if (stride < 1) throw ShapeError("conv stride must be >= 1");
    if (weight.shape() != Shape{out_channels, in_channels, kernel_h, kernel_w}) {
        throw ShapeError("conv weight shape " + shape_str(weight.shape()) + " inconsistent with declared " +
                         std::to_string(out_channels) + "x" + std::to_string(in_channels) + "x" +
                         std::to_string(kernel_h) + "x" + std::to_string(kernel_w));
    }
    if (bias.shape() != Shape{out_channels}) {
        throw ShapeError("conv bias shape " + shape_str(bias.shape()) + " inconsistent with out_channels");
    }
}

Tensor conv2d_forward(const Tensor& input, const ConvParams& p) {
    const ConvGeometry g = conv_geometry(input, p);
    input.require_finite("conv2d input");

    Tensor out({g.n, g.co, g.ho, g.wo});
    const std::size_t hw = g.out_hw();
    const std::size_t k = g.k();
    std::vector<float> col;
    std::vector<double> acc(hw);
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(input.ptr() + n * g.ci * g.h * g.w, g, col);
        for (std::size_t o = 0; o < g.co; ++o) {
            std::fill(acc.begin(), acc.end(), static_cast<double>(p.bias[o]));
            const float* wrow = p.weight.ptr() + o * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double wv = wrow[kk];
                if (wv == 0.0) continue;
                const float* crow = col.data() + kk * hw;
                for (std::size_t j = 0; j < hw; ++j) acc[j] += wv * crow[j];
            }
            float* dst = out.ptr() + (n * g.co + o) * hw;
            for (std::size_t j = 0; j < hw; ++j) dst[j] = static_cast<float>(acc[j]);
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvParams& p, const Tensor& grad_out) {
    const ConvGeometry g = conv_geometry(input, p);
    if (grad_out.shape() != Shape{g.n, g.co, g.ho, g.wo}) {
        throw ShapeError("conv2d_backward: grad_out shape " + shape_str(grad_out.shape()) +
                         " does not match forward output " + shape_str({g.n, g.co, g.ho, g.wo}));
    }
    grad_out.require_finite("conv2d grad_out");

    const std::size_t hw = g.out_hw();
    const std::size_t k = g.k();
    std::vector<double> gw(g.co * k, 0.0);
    std::vector<double> gb(g.co, 0.0);
    ConvGrads grads{Tensor(input.shape()), Tensor(p.weight.shape()), Tensor(p.bias.shape())};

    std::vector<float> col;
    std::vector<double> gcol(k * hw);
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(input.ptr() + n * g.ci * g.h * g.w, g, col);
        const float* gout = grad_out.ptr() + n * g.co * hw;
        for (std::size_t o = 0; o < g.co; ++o) {
            const float* grow = gout + o * hw;
            double bsum = 0.0;
            for (std::size_t j = 0; j < hw; ++j) bsum += grow[j];
            gb[o] += bsum;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const float* crow = col.data() + kk * hw;
                double dot = 0.0;
                for (std::size_t j = 0; j < hw; ++j) dot += static_cast<double>(grow[j]) * crow[j];
                gw[o * k + kk] += dot;
            }
        }
        std::fill(gcol.begin(), gcol.end(), 0.0);
        for (std::size_t o = 0; o < g.co; ++o) {
            const float* grow = gout + o * hw;
            const float* wrow = p.weight.ptr() + o * k;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double wv = wrow[kk];
                if (wv == 0.0) continue;
                double* dst = gcol.data() + kk * hw;
                for (std::size_t j = 0; j < hw; ++j) dst[j] += wv * grow[j];
            }
        }
        col2im(gcol, g, grads.input.ptr() + n * g.ci * g.h * g.w);
    }
    for (std::size_t i = 0; i < gw.size(); ++i) grads.weight[i] = static_cast<float>(gw[i]);
    for (std::size_t i = 0; i < gb.size(); ++i) grads.bias[i] = static_cast<float>(gb[i]);
    return grads;
}

BatchNormParams BatchNormParams::make(std::size_t channels) {
    BatchNormParams p;
    p.gamma = Tensor({channels}, 1.0f);
    p.beta = Tensor({channels}, 0.0f);
    p.running_mean = Tensor({channels}, 0.0f);
    p.running_var = Tensor({channels}, 1.0f);
    return p;
}

void BatchNormParams::validate() const {
    const Shape s{gamma.numel()};
    if (gamma.rank() != 1 || beta.shape() != s || running_mean.shape() != s || running_var.shape() != s) {
        throw ShapeError("batchnorm parameter shapes are inconsistent");
    }
    if (!(eps > 0.0f)) throw NumericError("batchnorm eps must be positive");
    if (!(stats_momentum > 0.0f && stats_momentum < 1.0f)) {
        throw NumericError("batchnorm stats momentum must lie in (0,1)");
    }
}

namespace {

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> var;
};

ChannelStats batch_stats(const Tensor& input) {
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    const double m = static_cast<double>(n * hw);
    ChannelStats s{std::vector<double>(c), std::vector<double>(c)};
    for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const float* src = input.ptr() + (b * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) sum += src[j];
        }
        const double mu = sum / m;
        double sq = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const float* src = input.ptr() + (b * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                const double d = src[j] - mu;
                sq += d * d;
            }
        }
        s.mean[ch] = mu;
        s.var[ch] = sq / m;
    }
    return s;
}

void check_bn_input(const Tensor& input, const BatchNormParams& p) {
    p.validate();
    require_rank(input, 4, "batchnorm");
    if (input.dim(1) != p.channels()) {
        throw ShapeError("batchnorm: input has " + std::to_string(input.dim(1)) + " channels, parameters have " +
                         std::to_string(p.channels()));
    }
    input.require_finite("batchnorm input");
}

Tensor bn_normalize(const Tensor& input, const BatchNormParams& p, std::span<const double> mean,
                    std::span<const double> inv_std) {
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    Tensor out(input.shape());
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const float* src = input.ptr() + (b * c + ch) * hw;
            float* dst = out.ptr() + (b * c + ch) * hw;
            const double scale = p.gamma[ch] * inv_std[ch];
            for (std::size_t j = 0; j < hw; ++j) {
                dst[j] = static_cast<float>((src[j] - mean[ch]) * scale + p.beta[ch]);
            }
        }
    }
    return out;
}

}  // namespace

Tensor batchnorm_forward(const Tensor& input, const BatchNormParams& p) {
    check_bn_input(input, p);
    const std::size_t c = p.channels();
    std::vector<double> mean(c), inv_std(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        mean[ch] = p.running_mean[ch];
        inv_std[ch] = 1.0 / std::sqrt(static_cast<double>(p.running_var[ch]) + static_cast<double>(p.eps));
    }
    return bn_normalize(input, p, mean, inv_std);
}

Tensor batchnorm_forward(const Tensor& input, BatchNormParams& p, bool training, BatchNormCache* cache) {
    if (!training) {
        Tensor out = batchnorm_forward(input, std::as_const(p));
        if (cache) {
            cache->valid = true;
            cache->training = false;
            cache->mean.assign(p.running_mean.data().begin(), p.running_mean.data().end());
            cache->inv_std.resize(p.channels());
            for (std::size_t ch = 0; ch < p.channels(); ++ch) {
                cache->inv_std[ch] =
                    1.0 / std::sqrt(static_cast<double>(p.running_var[ch]) + static_cast<double>(p.eps));
            }
        }
        return out;
    }
    check_bn_input(input, p);
    ChannelStats stats = batch_stats(input);
    const std::size_t c = p.channels();
    std::vector<double> inv_std(c);
    const double mom = p.stats_momentum;
    for (std::size_t ch = 0; ch < c; ++ch) {
        inv_std[ch] = 1.0 / std::sqrt(stats.var[ch] + static_cast<double>(p.eps));
        p.running_mean[ch] = static_cast<float>((1.0 - mom) * p.running_mean[ch] + mom * stats.mean[ch]);
        p.running_var[ch] = static_cast<float>((1.0 - mom) * p.running_var[ch] + mom * stats.var[ch]);
    }
    Tensor out = bn_normalize(input, p, stats.mean, inv_std);
    if (cache) {
        cache->valid = true;
        cache->training = true;
        cache->mean = std::move(stats.mean);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

BatchNormGrads batchnorm_backward(const Tensor& input, const BatchNormParams& p, const Tensor& grad_out,
                                  const BatchNormCache& cache) {
    if (!cache.valid) throw Error("batchnorm_backward: no cached batch statistics (run a forward pass first)");
    require_rank(input, 4, "batchnorm_backward");
    require_same_shape(input, grad_out, "batchnorm_backward");
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    if (c != p.channels() || cache.mean.size() != c) throw ShapeError("batchnorm_backward: channel mismatch");
    grad_out.require_finite("batchnorm grad_out");

    BatchNormGrads grads{Tensor(input.shape()), Tensor({c}), Tensor({c})};
    const double m = static_cast<double>(n * hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double mu = cache.mean[ch];
        const double is = cache.inv_std[ch];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const float* x = input.ptr() + (b * c + ch) * hw;
            const float* dy = grad_out.ptr() + (b * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                sum_dy += dy[j];
                sum_dy_xhat += dy[j] * (x[j] - mu) * is;
            }
        }
        grads.beta[ch] = static_cast<float>(sum_dy);
        grads.gamma[ch] = static_cast<float>(sum_dy_xhat);
        const double g = p.gamma[ch];
        for (std::size_t b = 0; b < n; ++b) {
            const float* x = input.ptr() + (b * c + ch) * hw;
            const float* dy = grad_out.ptr() + (b * c + ch) * hw;
            float* dx = grads.input.ptr() + (b * c + ch) * hw;
            if (cache.training) {
                for (std::size_t j = 0; j < hw; ++j) {
                    const double xhat = (x[j] - mu) * is;
                    dx[j] = static_cast<float>(g * is / m * (m * dy[j] - sum_dy - xhat * sum_dy_xhat));
                }
            } else {
                for (std::size_t j = 0; j < hw; ++j) dx[j] = static_cast<float>(g * is * dy[j]);
            }
        }
    }
    return grads;
}

float sigmoid(float x) {
    if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
    const float e = std::exp(x);
    return e / (1.0f + e);
}

Tensor silu(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.numel(); ++i) out[i] = input[i] * sigmoid(input[i]);
    return out;
}

Tensor silu_backward(const Tensor& input, const Tensor& grad_out) {
    require_same_shape(input, grad_out, "silu_backward");
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.numel(); ++i) {
        const float s = sigmoid(input[i]);
        out[i] = grad_out[i] * s * (1.0f + input[i] * (1.0f - s));
    }
    return out;
}

Tensor global_avg_pool(const Tensor& input) {
    require_rank(input, 4, "global_avg_pool");
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    Tensor out({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
        double sum = 0.0;
        const float* src = input.ptr() + i * hw;
        for (std::size_t j = 0; j < hw; ++j) sum += src[j];
        out[i] = static_cast<float>(sum / static_cast<double>(hw));
    }
    return out;
}

Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad_out) {
    if (input_shape.size() != 4) throw ShapeError("global_avg_pool_backward: expected rank-4 input shape");
    const std::size_t n = input_shape[0], c = input_shape[1], hw = input_shape[2] * input_shape[3];
    if (grad_out.shape() != Shape{n, c}) throw ShapeError("global_avg_pool_backward: grad shape mismatch");
    Tensor out(input_shape);
    const float inv = 1.0f / static_cast<float>(hw);
    for (std::size_t i = 0; i < n * c; ++i) {
        float* dst = out.ptr() + i * hw;
        std::fill(dst, dst + hw, grad_out[i] * inv);
    }
    return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    for (const auto& t : parts) require_rank(t, 4, "concat_channels");
    const std::size_t n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
    std::size_t c_total = 0;
    for (const auto& t : parts) {
        if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w) {
            throw ShapeError("concat_channels: " + shape_str(t.shape()) + " incompatible with " +
                             shape_str(parts[0].shape()));
        }
        c_total += t.dim(1);
    }
    Tensor out({n, c_total, h, w});
    const std::size_t hw = h * w;
    for (std::size_t b = 0; b < n; ++b) {
        float* dst = out.ptr() + b * c_total * hw;
        for (const auto& t : parts) {
            const std::size_t len = t.dim(1) * hw;
            std::copy_n(t.ptr() + b * len, len, dst);
            dst += len;
        }
    }
    return out;
}

std::vector<Tensor> split_channels(const Tensor& x, std::span<const std::size_t> sizes) {
    require_rank(x, 4, "split_channels");
    std::size_t total = 0;
    for (auto s : sizes) {
        if (s == 0) throw ShapeError("split_channels: zero-sized part");
        total += s;
    }
    if (total != x.dim(1)) {
        throw ShapeError("split_channels: sizes sum to " + std::to_string(total) + " but tensor has " +
                         std::to_string(x.dim(1)) + " channels");
    }
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<Tensor> parts;
    parts.reserve(sizes.size());
    std::size_t offset = 0;
    for (auto s : sizes) {
        Tensor part({n, s, x.dim(2), x.dim(3)});
        for (std::size_t b = 0; b < n; ++b) {
            std::copy_n(x.ptr() + (b * c + offset) * hw, s * hw, part.ptr() + b * s * hw);
        }
        parts.push_back(std::move(part));
        offset += s;
    }
    return parts;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

Tensor linear_forward(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(input, 2, "linear");
    require_rank(weight, 2, "linear weight");
    const std::size_t n = input.dim(0), din = input.dim(1), dout = weight.dim(0);
    if (weight.dim(1) != din) {
        throw ShapeError("linear: input width " + std::to_string(din) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    if (bias.shape() != Shape{dout}) throw ShapeError("linear: bias shape mismatch");
    input.require_finite("linear input");
    Tensor out({n, dout});
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t o = 0; o < dout; ++o) {
            double acc = bias[o];
            for (std::size_t i = 0; i < din; ++i) {
                acc += static_cast<double>(input[b * din + i]) * weight[o * din + i];
            }
            out[b * dout + o] = static_cast<float>(acc);
        }
    }
    return out;
}

LinearGrads linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out) {
    require_rank(input, 2, "linear_backward");
    require_rank(weight, 2, "linear_backward weight");
    const std::size_t n = input.dim(0), din = input.dim(1), dout = weight.dim(0);
    if (weight.dim(1) != din || grad_out.shape() != Shape{n, dout}) {
        throw ShapeError("linear_backward: dimension mismatch");
    }
    LinearGrads g{Tensor({n, din}), Tensor({dout, din}), Tensor({dout})};
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < din; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < dout; ++o) {
                acc += static_cast<double>(grad_out[b * dout + o]) * weight[o * din + i];
            }
            g.input[b * din + i] = static_cast<float>(acc);
        }
    }
    for (std::size_t o = 0; o < dout; ++o) {
        double bsum = 0.0;
        for (std::size_t b = 0; b < n; ++b) bsum += grad_out[b * dout + o];
        g.bias[o] = static_cast<float>(bsum);
        for (std::size_t i = 0; i < din; ++i) {
            double acc = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                acc += static_cast<double>(grad_out[b * dout + o]) * input[b * din + i];
            }
            g.weight[o * din + i] = static_cast<float>(acc);
        }
    }
    return g;
}

Tensor softmax(const Tensor& logits) {
    require_rank(logits, 2, "softmax");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    Tensor out(logits.shape());
    for (std::size_t b = 0; b < n; ++b) {
        const float* row = logits.ptr() + b * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        for (std::size_t j = 0; j < k; ++j) out[b * k + j] = static_cast<float>(std::exp(row[j] - mx) / z);
    }
    return out;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    require_rank(logits, 2, "softmax_cross_entropy");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != n) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    }
    logits.require_finite("logits");
    LossResult r{0.0, Tensor(logits.shape())};
    double total = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= k) {
            throw Error("softmax_cross_entropy: label " + std::to_string(label) + " outside [0," +
                        std::to_string(k) + ")");
        }
        const float* row = logits.ptr() + b * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const double log_z = mx + std::log(z);
        total += (mx - row[label]) + std::log(z);
        for (std::size_t j = 0; j < k; ++j) {
            const double prob = std::exp(row[j] - log_z);
            const double target = (static_cast<int>(j) == label) ? 1.0 : 0.0;
            r.grad_logits[b * k + j] = static_cast<float>((prob - target) / static_cast<double>(n));
        }
    }
    r.loss = total / static_cast<double>(n);
    return r;
}

}  // namespace c2f
