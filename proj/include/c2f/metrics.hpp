#pragma once

// Binary classification metrics: confusion counts, precision, recall, F1,
// accuracy and all-points interpolated average precision.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

struct ConfusionMatrix2 {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    int positive_class = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix2&) const = default;
};

// A ratio whose denominator may vanish; such values are 0 and flagged.
struct Ratio {
    double value = 0.0;
    bool degenerate = false;
};

ConfusionMatrix2 confusion(std::span<const int> predictions, std::span<const int> labels, int positive_class = 0);

Ratio precision(const ConfusionMatrix2& cm);
Ratio recall(const ConfusionMatrix2& cm);
Ratio f1(const ConfusionMatrix2& cm);
double accuracy(const ConfusionMatrix2& cm);  // throws on an empty matrix

// `scores` are positive-class scores, `labels` are 1 for positive and 0 otherwise.
double average_precision(std::span<const double> scores, std::span<const int> labels);

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double ap = 0.0;
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;
    bool ap_defined = true;  // false when the evaluated set has no positives
    ConfusionMatrix2 counts;
};

// Argmax over rows; ties resolve to the lower class index.
std::vector<int> argmax_predictions(const Tensor& logits);

MetricsReport make_report(const ConfusionMatrix2& cm);
// Predictions by argmax of `logits` [N,2]; AP from the softmax score of positive_class.
MetricsReport report(const Tensor& logits, std::span<const int> labels, int positive_class = 0);

// key=value lines, percentages not applied.
std::string format_key_values(const MetricsReport& r);
inline constexpr const char* kReportCsvHeader = "optimizer,accuracy,precision,recall,f1,ap";
std::string format_csv_row(const std::string& optimizer, const MetricsReport& r);
// 2x2 table labelled with the class names.
std::string format_confusion(const MetricsReport& r);

}  // namespace c2f
