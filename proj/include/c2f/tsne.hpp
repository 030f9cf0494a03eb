#pragma once

// Exact t-SNE: perplexity-calibrated Gaussian affinities in the input space,
// Student-t affinities in the embedding, gradient descent on KL(P || Q).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace c2f {

struct DatasetManifest;

// Row-major n x dim point set.
template <class T>
struct PointSet {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<T> values;

    std::span<const T> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

struct AffinityMatrix {
    std::size_t n = 0;
    std::vector<double> p;                // n*n joint probabilities, symmetric, zero diagonal
    double perplexity = 30.0;
    std::vector<double> sigma;            // per-point Gaussian bandwidths
    std::vector<double> row_perplexity;   // realized perplexity of each conditional row

    double at(std::size_t i, std::size_t j) const { return p[i * n + j]; }
};

// Conditional rows p_{j|i} from squared distances, without the size requirement of
// conditional_affinities. Returns n*n row-stochastic values; fills sigma/perplexity if given.
std::vector<double> conditional_probabilities(std::span<const double> sq_dist, std::size_t n, double perplexity,
                                              std::vector<double>* sigma = nullptr,
                                              std::vector<double>* realized = nullptr);

std::vector<double> squared_distances(const PointSet<double>& x);
std::vector<double> squared_distances(const PointSet<float>& x);

// Requires n >= 4 and perplexity > 0.
AffinityMatrix conditional_affinities(const PointSet<double>& x, double perplexity);
AffinityMatrix conditional_affinities(const PointSet<float>& x, double perplexity);

struct TsneOptions {
    std::size_t dims = 2;
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    std::uint64_t seed = 0;
    double learning_rate = 200.0;
    double exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    std::size_t momentum_switch = 250;
    double init_sigma = 1e-4;

    void validate() const;  // throws ConfigError
};

struct EmbeddingResult {
    std::size_t n = 0;
    std::size_t dims = 2;
    std::vector<double> points;       // n*dims
    double kl = 0.0;                  // KL(P || Q) at the final embedding
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    std::vector<double> kl_history;   // KL(P || Q) before each update, unexaggerated
};

// Student-t joint affinities of an embedding.
std::vector<double> student_t_affinities(std::span<const double> y, std::size_t n, std::size_t dims);

// Sum of p*log(p/q) over off-diagonal entries of two n*n matrices, with 1e-12 floors.
double kl_divergence(std::span<const double> p, std::span<const double> q, std::size_t n);
// Flat variant: sums over every entry.
double kl_divergence(std::span<const double> p, std::span<const double> q);

EmbeddingResult tsne_embed(const AffinityMatrix& p, const TsneOptions& options);
EmbeddingResult tsne_embed(const PointSet<double>& x, const TsneOptions& options);
EmbeddingResult tsne_embed(const PointSet<float>& x, const TsneOptions& options);

struct LabeledFeatures {
    PointSet<float> features;
    std::vector<int> labels;
    std::vector<std::string> files;
};

// Raw-pixel features: each image decoded at image_size and flattened (3*S*S values).
LabeledFeatures features_for_tsne(const DatasetManifest& manifest, std::string_view split,
                                  std::size_t image_size = 128);

// CSV with columns x,y[,z],label,file.
std::string embedding_csv(const EmbeddingResult& e, std::span<const int> labels,
                          std::span<const std::string> files);

}  // namespace c2f
