#include "c2f/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "c2f/data.hpp"
#include "c2f/error.hpp"
#include "c2f/image.hpp"
#include "c2f/rng.hpp"

namespace c2f {

namespace {

constexpr double kFloor = 1e-12;
constexpr double kEntropyTol = 1e-5;
constexpr int kMaxSearch = 50;

template <class T>
std::vector<double> sq_dist_impl(const PointSet<T>& x) {
    if (x.values.size() != x.n * x.dim) throw ShapeError("point set size does not match n*dim");
    const std::size_t n = x.n;
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const T* a = x.values.data() + i * x.dim;
        for (std::size_t j = i + 1; j < n; ++j) {
            const T* b = x.values.data() + j * x.dim;
            double s = 0.0;
            for (std::size_t k = 0; k < x.dim; ++k) {
                const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                s += diff * diff;
            }
            d[i * n + j] = d[j * n + i] = s;
        }
    }
    return d;
}

// Fills row with exp(-beta * (d - dmin)) normalized; returns Shannon entropy in nats.
double row_entropy(std::span<const double> d, std::size_t self, double beta, double dmin, std::span<double> row) {
    double sum = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        row[j] = j == self ? 0.0 : std::exp(-beta * (d[j] - dmin));
        sum += row[j];
    }
    sum = std::max(sum, kFloor);
    double h = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        row[j] /= sum;
        if (row[j] > kFloor) h -= row[j] * std::log(row[j]);
    }
    return h;
}

AffinityMatrix symmetrize(std::vector<double> cond, std::size_t n, double perplexity, std::vector<double> sigma,
                          std::vector<double> realized) {
    AffinityMatrix a;
    a.n = n;
    a.perplexity = perplexity;
    a.sigma = std::move(sigma);
    a.row_perplexity = std::move(realized);
    a.p.assign(n * n, 0.0);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = (cond[i * n + j] + cond[j * n + i]) * scale;
            a.p[i * n + j] = a.p[j * n + i] = v;
        }
    }
    return a;
}

template <class T>
AffinityMatrix affinities_impl(const PointSet<T>& x, double perplexity) {
    if (x.n < 4) throw Error("t-SNE needs at least 4 points, got " + std::to_string(x.n));
    const auto d = sq_dist_impl(x);
    std::vector<double> sigma, realized;
    auto cond = conditional_probabilities(d, x.n, perplexity, &sigma, &realized);
    return symmetrize(std::move(cond), x.n, perplexity, std::move(sigma), std::move(realized));
}

}  // namespace

std::vector<double> squared_distances(const PointSet<double>& x) { return sq_dist_impl(x); }
std::vector<double> squared_distances(const PointSet<float>& x) { return sq_dist_impl(x); }

std::vector<double> conditional_probabilities(std::span<const double> sq_dist, std::size_t n, double perplexity,
                                              std::vector<double>* sigma, std::vector<double>* realized) {
    if (sq_dist.size() != n * n) throw ShapeError("distance matrix must be n*n");
    if (n < 2) throw Error("conditional probabilities need at least 2 points");
    if (!(perplexity > 0.0)) throw ConfigError("perplexity must be positive");
    const double target = std::log(perplexity);
    std::vector<double> out(n * n, 0.0);
    if (sigma) sigma->assign(n, 0.0);
    if (realized) realized->assign(n, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> d = sq_dist.subspan(i * n, n);
        std::span<double> row(out.data() + i * n, n);
        double dmin = std::numeric_limits<double>::infinity(), dsum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dmin = std::min(dmin, d[j]);
            dsum += d[j];
        }
        // Start the search at the inverse mean distance so it begins near the right scale.
        const double mean = (dsum - dmin * static_cast<double>(n - 1)) / static_cast<double>(n - 1);
        double beta = mean > kFloor ? 1.0 / mean : 1.0;
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double h = row_entropy(d, i, beta, dmin, row);
        for (int it = 0; it < kMaxSearch && std::abs(h - target) > kEntropyTol; ++it) {
            if (h > target) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = row_entropy(d, i, beta, dmin, row);
        }
        if (sigma) (*sigma)[i] = std::sqrt(1.0 / (2.0 * beta));
        if (realized) (*realized)[i] = std::exp(h);
    }
    return out;
}

AffinityMatrix conditional_affinities(const PointSet<double>& x, double perplexity) {
    return affinities_impl(x, perplexity);
}
AffinityMatrix conditional_affinities(const PointSet<float>& x, double perplexity) {
    return affinities_impl(x, perplexity);
}

void TsneOptions::validate() const {
    if (dims != 2 && dims != 3) throw ConfigError("dims must be 2 or 3, got " + std::to_string(dims));
    if (!(perplexity > 0.0)) throw ConfigError("perplexity must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("t-SNE learning rate must be positive");
    if (iterations == 0) throw ConfigError("t-SNE iterations must be positive");
}

std::vector<double> student_t_affinities(std::span<const double> y, std::size_t n, std::size_t dims) {
    std::vector<double> q(n * n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dims; ++k) {
                const double diff = y[i * dims + k] - y[j * dims + k];
                s += diff * diff;
            }
            const double v = 1.0 / (1.0 + s);
            q[i * n + j] = q[j * n + i] = v;
            total += 2.0 * v;
        }
    }
    for (double& v : q) v /= total;
    return q;
}

double kl_divergence(std::span<const double> p, std::span<const double> q, std::size_t n) {
    if (p.size() != n * n || q.size() != n * n) throw ShapeError("kl_divergence: matrices must be n*n");
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double a = std::max(p[i * n + j], kFloor), b = std::max(q[i * n + j], kFloor);
            kl += a * std::log(a / b);
        }
    }
    return kl;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ShapeError("kl_divergence: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = std::max(p[i], kFloor), b = std::max(q[i], kFloor);
        kl += a * std::log(a / b);
    }
    return kl;
}

EmbeddingResult tsne_embed(const AffinityMatrix& aff, const TsneOptions& opt) {
    opt.validate();
    const std::size_t n = aff.n, d = opt.dims;
    if (aff.p.size() != n * n) throw ShapeError("affinity matrix must be n*n");

    EmbeddingResult res;
    res.n = n;
    res.dims = d;
    res.seed = opt.seed;
    res.points.resize(n * d);
    Rng rng(opt.seed);
    for (double& v : res.points) v = opt.init_sigma * rng.normal();

    std::vector<double> update(n * d, 0.0), gains(n * d, 1.0), grad(n * d), num(n * n);
    std::vector<double>& y = res.points;
    for (std::size_t it = 0; it < opt.iterations; ++it) {
        const double exag = it < opt.exaggeration_iters ? opt.exaggeration : 1.0;
        const double momentum = it < opt.momentum_switch ? opt.initial_momentum : opt.final_momentum;

        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num[i * n + i] = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = y[i * d + k] - y[j * d + k];
                    s += diff * diff;
                }
                num[i * n + j] = num[j * n + i] = 1.0 / (1.0 + s);
                total += 2.0 * num[i * n + j];
            }
        }

        double kl = 0.0;
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double pij = aff.p[i * n + j];
                const double qij = std::max(num[i * n + j] / total, kFloor);
                const double pf = std::max(pij, kFloor);
                kl += pf * std::log(pf / qij);
                const double mult = 4.0 * (exag * pij - qij) * num[i * n + j];
                for (std::size_t k = 0; k < d; ++k) grad[i * d + k] += mult * (y[i * d + k] - y[j * d + k]);
            }
        }
        res.kl_history.push_back(kl);

        for (std::size_t k = 0; k < n * d; ++k) {
            if (!std::isfinite(grad[k])) throw NumericError(fmt::format("t-SNE gradient is not finite at iteration {}", it));
            const bool same_sign = (grad[k] > 0) == (update[k] > 0);
            gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
            update[k] = momentum * update[k] - opt.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        for (std::size_t k = 0; k < d; ++k) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += y[i * d + k];
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) y[i * d + k] -= mean;
        }
    }
    res.iterations = opt.iterations;
    res.kl = kl_divergence(aff.p, student_t_affinities(y, n, d), n);
    return res;
}

EmbeddingResult tsne_embed(const PointSet<double>& x, const TsneOptions& options) {
    options.validate();
    return tsne_embed(conditional_affinities(x, options.perplexity), options);
}

EmbeddingResult tsne_embed(const PointSet<float>& x, const TsneOptions& options) {
    options.validate();
    return tsne_embed(conditional_affinities(x, options.perplexity), options);
}

LabeledFeatures features_for_tsne(const DatasetManifest& manifest, std::string_view split, std::size_t image_size) {
    const SplitManifest& s = manifest.split(split);
    LabeledFeatures out;
    out.features.n = s.samples.size();
    out.features.dim = 3 * image_size * image_size;
    out.features.values.reserve(out.features.n * out.features.dim);
    for (const auto& sample : s.samples) {
        const Tensor img = load_image(sample.path, image_size);
        out.features.values.insert(out.features.values.end(), img.data().begin(), img.data().end());
        out.labels.push_back(sample.label);
        out.files.push_back(sample.path.generic_string());
    }
    return out;
}

std::string embedding_csv(const EmbeddingResult& e, std::span<const int> labels, std::span<const std::string> files) {
    if (labels.size() != e.n || files.size() != e.n) throw Error("embedding_csv: labels/files must match point count");
    std::string out = e.dims == 3 ? "x,y,z,label,file\n" : "x,y,label,file\n";
    for (std::size_t i = 0; i < e.n; ++i) {
        for (std::size_t k = 0; k < e.dims; ++k) out += fmt::format("{:.9g},", e.points[i * e.dims + k]);
        out += fmt::format("{},{}\n", labels[i], files[i]);
    }
    return out;
}

}  // namespace c2f
