#include "c2f/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "c2f/data.hpp"
#include "c2f/error.hpp"
#include "c2f/ops.hpp"

namespace c2f {

ConfusionMatrix2 confusion(std::span<const int> predictions, std::span<const int> labels, int positive_class) {
    if (predictions.size() != labels.size()) {
        throw Error("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
    }
    if (predictions.empty()) throw Error("confusion: no samples");
    if (positive_class != 0 && positive_class != 1) throw Error("positive_class must be 0 or 1");
    ConfusionMatrix2 cm;
    cm.positive_class = positive_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual = labels[i] == positive_class;
        const bool predicted = predictions[i] == positive_class;
        if (actual && predicted) ++cm.tp;
        else if (!actual && predicted) ++cm.fp;
        else if (actual && !predicted) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

Ratio precision(const ConfusionMatrix2& cm) {
    const std::size_t d = cm.tp + cm.fp;
    if (d == 0) return {0.0, true};
    return {static_cast<double>(cm.tp) / static_cast<double>(d), false};
}

Ratio recall(const ConfusionMatrix2& cm) {
    const std::size_t d = cm.tp + cm.fn;
    if (d == 0) return {0.0, true};
    return {static_cast<double>(cm.tp) / static_cast<double>(d), false};
}

Ratio f1(const ConfusionMatrix2& cm) {
    const Ratio p = precision(cm), r = recall(cm);
    if (p.value + r.value == 0.0) return {0.0, true};
    return {2.0 * p.value * r.value / (p.value + r.value), p.degenerate || r.degenerate};
}

double accuracy(const ConfusionMatrix2& cm) {
    if (cm.total() == 0) throw Error("accuracy of an empty confusion matrix");
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("average_precision: scores/labels length mismatch");
    const std::size_t positives =
        static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
    if (positives == 0) throw Error("average_precision: no positive labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // One PR point per distinct score threshold.
    std::vector<double> rec, prec;
    std::size_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        tp += labels[order[i]] != 0;
        ++seen;
        if (i + 1 < order.size() && scores[order[i + 1]] == scores[order[i]]) continue;
        rec.push_back(static_cast<double>(tp) / static_cast<double>(positives));
        prec.push_back(static_cast<double>(tp) / static_cast<double>(seen));
    }
    // Monotone envelope: precision at recall r is the best precision at any recall >= r.
    for (std::size_t i = prec.size() - 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        ap += (rec[i] - prev_recall) * prec[i];
        prev_recall = rec[i];
    }
    return ap;
}

std::vector<int> argmax_predictions(const Tensor& logits) {
    if (logits.rank() != 2) throw ShapeError("argmax_predictions: expected [N,K] logits");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    std::vector<int> out(n);
    for (std::size_t b = 0; b < n; ++b) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (logits[b * k + j] > logits[b * k + best]) best = j;
        }
        out[b] = static_cast<int>(best);
    }
    return out;
}

MetricsReport make_report(const ConfusionMatrix2& cm) {
    MetricsReport r;
    r.counts = cm;
    r.accuracy = accuracy(cm);
    const Ratio p = precision(cm), rc = recall(cm), f = f1(cm);
    r.precision = p.value;
    r.recall = rc.value;
    r.f1 = f.value;
    r.precision_degenerate = p.degenerate;
    r.recall_degenerate = rc.degenerate;
    r.f1_degenerate = f.degenerate;
    r.ap_defined = false;
    return r;
}

MetricsReport report(const Tensor& logits, std::span<const int> labels, int positive_class) {
    if (logits.rank() != 2 || logits.dim(1) != 2) throw ShapeError("report expects [N,2] logits");
    const std::vector<int> predictions = argmax_predictions(logits);
    MetricsReport r = make_report(confusion(predictions, labels, positive_class));
    const Tensor probs = softmax(logits);
    std::vector<double> scores(labels.size());
    std::vector<int> positive(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        scores[i] = probs[i * 2 + static_cast<std::size_t>(positive_class)];
        positive[i] = labels[i] == positive_class ? 1 : 0;
    }
    if (r.counts.tp + r.counts.fn > 0) {
        r.ap = average_precision(scores, positive);
        r.ap_defined = true;
    }
    return r;
}

std::string format_key_values(const MetricsReport& r) {
    std::string out;
    out += fmt::format("accuracy={:.6f}\n", r.accuracy);
    out += fmt::format("precision={:.6f}\n", r.precision);
    out += fmt::format("recall={:.6f}\n", r.recall);
    out += fmt::format("f1={:.6f}\n", r.f1);
    out += fmt::format("ap={:.6f}\n", r.ap);
    out += fmt::format("tp={}\nfp={}\nfn={}\ntn={}\n", r.counts.tp, r.counts.fp, r.counts.fn, r.counts.tn);
    out += fmt::format("positive_class={}\n", r.counts.positive_class);
    std::string flags;
    if (r.precision_degenerate) flags += flags.empty() ? "precision" : ",precision";
    if (r.recall_degenerate) flags += flags.empty() ? "recall" : ",recall";
    if (r.f1_degenerate) flags += flags.empty() ? "f1" : ",f1";
    if (!r.ap_defined) flags += flags.empty() ? "ap" : ",ap";
    out += "degenerate=" + flags + "\n";
    return out;
}

std::string format_csv_row(const std::string& optimizer, const MetricsReport& r) {
    return fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}", optimizer, r.accuracy, r.precision, r.recall, r.f1,
                       r.ap);
}

std::string format_confusion(const MetricsReport& r) {
    // Rows: actual class, columns: predicted class, class indices 0/1.
    const auto& c = r.counts;
    std::size_t cell[2][2];
    const int pos = c.positive_class, neg = 1 - pos;
    cell[pos][pos] = c.tp;
    cell[neg][pos] = c.fp;
    cell[pos][neg] = c.fn;
    cell[neg][neg] = c.tn;
    std::string out = fmt::format("0 = {}, 1 = {}\n", kClassLabels[0], kClassLabels[1]);
    out += fmt::format("{:>12}{:>12}{:>12}\n", "actual\\pred", "0", "1");
    for (int a = 0; a < 2; ++a) out += fmt::format("{:>12}{:>12}{:>12}\n", a, cell[a][0], cell[a][1]);
    out += fmt::format("positive_class={} tp={} fp={} fn={} tn={}\n", pos, c.tp, c.fp, c.fn, c.tn);
    out += fmt::format("accuracy={:.4f}%\n", 100.0 * r.accuracy);
    return out;
}

}  // namespace c2f
