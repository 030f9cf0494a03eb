#include "c2f/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include <fmt/format.h>

#include "c2f/checkpoint.hpp"
#include "c2f/data.hpp"
#include "c2f/error.hpp"
#include "c2f/image.hpp"
#include "c2f/ops.hpp"
#include "c2f/svg.hpp"
#include "c2f/train.hpp"
#include "c2f/tsne.hpp"

namespace fs = std::filesystem;

namespace c2f {

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("short write to " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("output_dir: cannot create " + dir.string() + ": " + ec.message());
}

// Exclusive ownership of an output directory for the lifetime of a run.
class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) : path_(dir / ".lock") {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) {
            throw ConfigError("output_dir: " + dir.string() +
                              " is locked by another run (remove .lock if no run is active)");
        }
        std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
        std::fclose(f);
    }
    ~OutputLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
};

// Curve rows from an existing curves.csv, keeping only epochs <= `upto`.
std::vector<std::string> kept_curve_rows(const fs::path& path, std::size_t upto) {
    std::vector<std::string> rows;
    if (!fs::exists(path)) return rows;
    std::istringstream in(read_text(path));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (std::stoull(line.substr(0, line.find(','))) <= upto) rows.push_back(line);
    }
    return rows;
}

void write_plots(const fs::path& dir, const std::vector<std::string>& rows) {
    Series train{"train_loss", {}, {}}, val{"val_loss", {}, {}}, acc{"val_accuracy_top1", {}, {}};
    for (const auto& r : rows) {
        double e, tl, vl, va;
        if (std::sscanf(r.c_str(), "%lf,%lf,%lf,%lf", &e, &tl, &vl, &va) != 4) continue;
        train.x.push_back(e);
        train.y.push_back(tl);
        val.x.push_back(e);
        val.y.push_back(vl);
        acc.x.push_back(e);
        acc.y.push_back(va);
    }
    const Series losses[] = {train, val};
    write_text(dir / "loss.svg", line_chart("train/loss and val/loss", "epoch", "loss", losses));
    write_text(dir / "accuracy.svg", line_chart("metrics/accuracy_top1", "epoch", "accuracy", {&acc, 1}));
}

void require_same(const RunConfig& a, const RunConfig& b) {
    if (a.optimizer != b.optimizer || a.img_size != b.img_size || a.seed != b.seed) {
        throw CheckpointError(
            fmt::format("resume config (optimizer {}, img_size {}, seed {}) does not match checkpoint ({}, {}, {})",
                        to_string(a.optimizer), a.img_size, a.seed, to_string(b.optimizer), b.img_size, b.seed));
    }
}

}  // namespace

int run_command(const std::function<void()>& fn, std::ostream& err) {
    try {
        fn();
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const CheckpointError& e) {
        err << "checkpoint error: " << e.what() << "\n";
        return kExitCheckpoint;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

void cmd_train(const RunConfig& config, const std::optional<fs::path>& resume, std::ostream& log) {
    config.validate();
    if (config.data_root.empty()) throw ConfigError("data_root: required");

    std::unique_ptr<TrainState> state;
    if (resume) {
        state = state_from_checkpoint(load_checkpoint(*resume));
        require_same(config, state->config);
        state->config = config;
    } else {
        state = make_train_state(config);
    }
    const DatasetManifest manifest = load_manifest(config.data_root);

    const fs::path dir = config.output_dir;
    ensure_dir(dir);
    OutputLock lock(dir);
    write_text(dir / "config.txt", config.to_text());

    std::vector<std::string> rows = resume ? kept_curve_rows(dir / "curves.csv", state->epoch) : std::vector<std::string>{};
    std::ofstream curves(dir / "curves.csv", std::ios::binary | std::ios::trunc);
    if (!curves) throw Error("cannot write " + (dir / "curves.csv").string());
    curves << kCurveHeader << "\n";
    for (const auto& r : rows) curves << r << "\n";
    curves.flush();

    const auto& split_train = manifest.split("train");
    log << fmt::format("training {} on {} images ({} / {}), {} epochs from epoch {}\n", to_string(config.optimizer),
                       split_train.samples.size(), split_train.class_counts[0], split_train.class_counts[1],
                       config.epochs, state->epoch);

    if (state->epoch >= config.epochs) {
        save_checkpoint(dir / "last.ckpt", to_checkpoint(*state));
        write_plots(dir, rows);
        return;
    }

    Trainer trainer(std::move(state), manifest);
    while (trainer.state().epoch < config.epochs) {
        const EpochStats s = trainer.run_epoch();
        const std::string row = format_curve_row(s);
        rows.push_back(row);
        curves << row << "\n";
        curves.flush();
        const Checkpoint ck = to_checkpoint(trainer.state());
        save_checkpoint(dir / "last.ckpt", ck);
        if (trainer.state().best_epoch == s.epoch) save_checkpoint(dir / "best.ckpt", ck);
        log << fmt::format("epoch {:>4}  train_loss {:.4f}  train_acc {:.4f}  val_loss {:.4f}  val_acc {:.4f}\n",
                           s.epoch, s.train_loss, s.train_accuracy, s.val_loss, s.val_accuracy);
    }
    write_plots(dir, rows);
}

MetricsReport cmd_eval(const EvalOptions& o, std::ostream& out) {
    if (o.batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (o.data_root.empty()) throw ConfigError("data_root: required");
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const RunConfig cfg = config_from_checkpoint(ck);
    const Network net = network_from_checkpoint(ck, cfg.img_size);
    const int positive = o.positive_class.value_or(cfg.positive_class);
    if (positive != 0 && positive != 1) throw ConfigError("positive_class: must be 0 or 1");

    const DatasetManifest manifest = load_manifest(o.data_root);
    const SplitManifest& split = manifest.split(o.split);
    BatchLoader loader(split, cfg.img_size, false);
    const Evaluation ev = evaluate(net, loader, o.batch_size);
    const MetricsReport r = report(ev.logits, ev.labels, positive);

    const fs::path dir = o.output_dir.empty() ? o.checkpoint.parent_path() : o.output_dir;
    ensure_dir(dir.empty() ? fs::path(".") : dir);
    const std::string name = to_string(cfg.optimizer);
    write_text(dir / "report.csv", std::string(kReportCsvHeader) + "\n" + format_csv_row(name, r) + "\n");
    write_text(dir / "metrics.txt", format_key_values(r));
    write_text(dir / "confusion.txt", format_confusion(r));

    const Tensor probs = softmax(ev.logits);
    const auto pred = argmax_predictions(ev.logits);
    std::string csv = "index,file,label,prediction,p_autistic,p_non_autistic\n";
    for (std::size_t i = 0; i < pred.size(); ++i) {
        csv += fmt::format("{},{},{},{},{:.9g},{:.9g}\n", i, split.samples[i].path.generic_string(), ev.labels[i],
                           pred[i], probs[i * 2], probs[i * 2 + 1]);
    }
    write_text(dir / "predictions.csv", csv);

    out << fmt::format("split={} samples={}\n", o.split, pred.size()) << format_key_values(r) << format_confusion(r);
    return r;
}

Prediction cmd_predict(const fs::path& checkpoint, const fs::path& image, std::ostream& out) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    const RunConfig cfg = config_from_checkpoint(ck);
    const Network net = network_from_checkpoint(ck, cfg.img_size);
    const Tensor img = load_image(image, cfg.img_size);
    const Tensor logits = net.forward(img.reshaped({1, 3, cfg.img_size, cfg.img_size}));
    const Tensor p = softmax(logits);
    Prediction pr;
    pr.label = argmax_predictions(logits)[0];
    pr.probabilities = {p[0], p[1]};
    out << fmt::format("class={} ({})\np_autistic={:.9g}\np_non_autistic={:.9g}\n", pr.label, kClassLabels[pr.label],
                       pr.probabilities[0], pr.probabilities[1]);
    return pr;
}

void cmd_tsne(const TsneCommand& o, std::ostream& log) {
    TsneOptions opt;
    opt.dims = o.dims;
    opt.perplexity = o.perplexity;
    opt.seed = o.seed;
    opt.iterations = o.iterations;
    opt.validate();
    if (o.features != "pixels" && o.features != "pooled") throw ConfigError("features: must be pixels or pooled");
    if (o.data_root.empty()) throw ConfigError("data_root: required");
    if (o.img_size < 1) throw ConfigError("img_size: must be positive");

    const DatasetManifest manifest = load_manifest(o.data_root);
    LabeledFeatures feats;
    if (o.features == "pixels") {
        feats = features_for_tsne(manifest, o.split, o.img_size);
    } else {
        if (o.checkpoint.empty()) throw ConfigError("checkpoint: required for pooled features");
        const Checkpoint ck = load_checkpoint(o.checkpoint);
        const std::size_t img = config_from_checkpoint(ck).img_size;
        const Network net = network_from_checkpoint(ck, img);
        const SplitManifest& split = manifest.split(o.split);
        BatchLoader loader(split, img, false);
        feats.features.n = split.samples.size();
        for (const auto& group : batch_plan(split.samples.size(), 16, 0, 0, false)) {
            const Tensor pooled = net.pooled_features(loader.load(group).images);
            feats.features.dim = pooled.dim(1);
            feats.features.values.insert(feats.features.values.end(), pooled.data().begin(), pooled.data().end());
        }
        for (const auto& s : split.samples) {
            feats.labels.push_back(s.label);
            feats.files.push_back(s.path.generic_string());
        }
    }
    log << fmt::format("t-SNE of {} points ({} features each), perplexity {}, {}-D\n", feats.features.n,
                       feats.features.dim, o.perplexity, o.dims);
    const EmbeddingResult e = tsne_embed(feats.features, opt);
    ensure_dir(o.output_dir);
    write_text(o.output_dir / "embedding.csv", embedding_csv(e, feats.labels, feats.files));
    const std::vector<std::string> names = {std::string(kClassLabels[0]), std::string(kClassLabels[1])};
    write_text(o.output_dir / "embedding.svg",
               scatter_chart(fmt::format("t-SNE ({}-D, perplexity {})", o.dims, o.perplexity), e.points, e.dims,
                             feats.labels, names));
    log << fmt::format("final KL divergence {:.6f}\n", e.kl);
}

void cmd_report(const ReportCommand& o, std::ostream& out) {
    struct Row {
        std::string name;
        double acc, p, f1, r, ap;
    };
    std::vector<Row> rows;
    if (o.counts) {
        const MetricsReport r = make_report(*o.counts);
        // Counts carry no scores, so AP is undefined.
        rows.push_back({o.name, r.accuracy, r.precision, r.f1, r.recall, std::nan("")});
    }
    for (const auto& path : o.report_files) {
        std::istringstream in(read_text(path));
        std::string line;
        std::getline(in, line);
        if (line != kReportCsvHeader) throw DataError("not a report.csv file: " + path.string());
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            Row row;
            const auto comma = line.find(',');
            row.name = line.substr(0, comma);
            // Stored column order: accuracy, precision, recall, f1, ap.
            if (comma == std::string::npos ||
                std::sscanf(line.c_str() + comma + 1, "%lf,%lf,%lf,%lf,%lf", &row.acc, &row.p, &row.r, &row.f1,
                            &row.ap) != 5) {
                throw DataError("malformed row in " + path.string());
            }
            rows.push_back(row);
        }
    }
    if (rows.empty()) throw ConfigError("report: give counts or at least one report.csv");
    out << fmt::format("{:<12}{:>10}{:>11}{:>9}{:>9}{:>9}\n", "Optimizer", "Accuracy", "Precision", "F1", "Recall", "AP");
    for (const auto& r : rows) {
        const std::string ap = std::isnan(r.ap) ? "n/a" : fmt::format("{:.2f}", 100 * r.ap);
        out << fmt::format("{:<12}{:>10.2f}{:>11.2f}{:>9.2f}{:>9.2f}{:>9}\n", r.name, 100 * r.acc, 100 * r.p,
                           100 * r.f1, 100 * r.r, ap);
    }
}

}  // namespace c2f
