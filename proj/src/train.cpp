#include "c2f/train.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "c2f/error.hpp"
#include "c2f/metrics.hpp"

namespace c2f {

namespace {

std::uint64_t meta_u64(const Checkpoint& ck, std::string_view key) {
    const std::string& v = ck.get(key);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw CheckpointError(fmt::format("checkpoint field {} is not an integer: '{}'", key, v));
    }
    return out;
}

double meta_double(const Checkpoint& ck, std::string_view key) {
    const std::string& v = ck.get(key);
    double out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw CheckpointError(fmt::format("checkpoint field {} is not a number: '{}'", key, v));
    }
    return out;
}

// Copies tensors named prefix + registry name into the registry, checking names and shapes.
void load_registry(const Checkpoint& ck, const std::string& prefix, const ParamRefs& refs) {
    for (const auto& r : refs) {
        const Tensor& src = ck.tensor(prefix + r.name);
        if (src.shape() != r.tensor->shape()) {
            throw CheckpointError(fmt::format("tensor {} has shape {} in checkpoint, expected {}", r.name,
                                              shape_str(src.shape()), shape_str(r.tensor->shape())));
        }
        *r.tensor = src;
    }
}

void check_tensor_table(const Checkpoint& ck, std::size_t expected) {
    if (ck.tensors.size() != expected) {
        throw CheckpointError(
            fmt::format("checkpoint holds {} tensors, the network expects {}", ck.tensors.size(), expected));
    }
}

void check_spec(const Checkpoint& ck, const Network& net) {
    if (ck.get("spec") != net.spec().describe()) {
        throw CheckpointError("checkpoint network spec does not match: " + ck.get("spec"));
    }
}

}  // namespace

TrainState::TrainState(const RunConfig& cfg) : config(cfg), net(NetworkSpec::standard(2)) {}

std::unique_ptr<TrainState> make_train_state(const RunConfig& config) {
    config.validate();
    auto st = std::make_unique<TrainState>(config);
    st->net.init(config.seed);
    st->optimizer = make_optimizer(config.optimizer, st->net.parameters());
    return st;
}

Checkpoint to_checkpoint(TrainState& st) {
    Checkpoint ck;
    ck.set("format", "c2f-checkpoint");
    ck.set("spec", st.net.spec().describe());
    ck.set("num_classes", std::to_string(st.net.spec().num_classes));
    ck.set("epoch", std::to_string(st.epoch));
    ck.set("best_val_accuracy", fmt::format("{}", st.best_val_accuracy));
    ck.set("best_epoch", std::to_string(st.best_epoch));
    // All randomness derives from the seed and the epoch index.
    ck.set("rng_seed", std::to_string(st.config.seed));
    ck.set("rng_epoch", std::to_string(st.epoch));
    ck.set("optimizer_step", std::to_string(st.optimizer.step));
    for (const auto& [k, v] : st.config.to_pairs()) ck.set("config." + k, v);
    for (const auto& p : st.net.parameters()) ck.tensors.emplace_back("param." + p.name, *p.tensor);
    for (const auto& b : st.net.buffers()) ck.tensors.emplace_back("buffer." + b.name, *b.tensor);
    for (const auto& o : st.optimizer.buffers()) ck.tensors.emplace_back("optim." + o.name, *o.tensor);
    return ck;
}

RunConfig config_from_checkpoint(const Checkpoint& ck) {
    RunConfig cfg;
    try {
        for (const auto& key : config_keys()) apply_setting(cfg, key, ck.get("config." + key));
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("invalid config echo in checkpoint: ") + e.what());
    }
    return cfg;
}

Network network_from_checkpoint(const Checkpoint& ck, std::optional<std::size_t> expected_img_size) {
    const std::uint64_t classes = meta_u64(ck, "num_classes");
    if (classes != 2) throw CheckpointError(fmt::format("checkpoint has {} classes, expected 2", classes));
    Network net(NetworkSpec::standard(2));
    check_spec(ck, net);
    const std::uint64_t img = meta_u64(ck, "config.img_size");
    if (expected_img_size && img != *expected_img_size) {
        throw CheckpointError(
            fmt::format("checkpoint was trained at img_size {}, incompatible with requested {}", img, *expected_img_size));
    }
    load_registry(ck, "param.", net.parameters());
    load_registry(ck, "buffer.", net.buffers());
    return net;
}

std::unique_ptr<TrainState> state_from_checkpoint(const Checkpoint& ck) {
    const RunConfig cfg = config_from_checkpoint(ck);
    auto st = std::make_unique<TrainState>(cfg);
    st->net = network_from_checkpoint(ck, cfg.img_size);
    st->optimizer = make_optimizer(cfg.optimizer, st->net.parameters());
    load_registry(ck, "optim.", st->optimizer.buffers());
    check_tensor_table(ck, st->net.parameters().size() + st->net.buffers().size() + st->optimizer.buffers().size());
    st->optimizer.step = meta_u64(ck, "optimizer_step");
    st->epoch = meta_u64(ck, "epoch");
    st->best_val_accuracy = meta_double(ck, "best_val_accuracy");
    st->best_epoch = meta_u64(ck, "best_epoch");
    if (meta_u64(ck, "rng_seed") != cfg.seed || meta_u64(ck, "rng_epoch") != st->epoch) {
        throw CheckpointError("checkpoint RNG state disagrees with its config");
    }
    return st;
}

Evaluation evaluate(const Network& net, BatchLoader& loader, std::size_t batch_size) {
    if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    const std::size_t n = loader.size();
    Evaluation ev;
    ev.logits = Tensor({n, 2});
    double loss_sum = 0.0;
    for (const auto& group : batch_plan(n, batch_size, 0, 0, false)) {
        Batch b = loader.load(group);
        Tensor logits = net.forward(b.images);
        loss_sum += softmax_cross_entropy(logits, b.labels).loss * static_cast<double>(group.size());
        for (std::size_t k = 0; k < group.size(); ++k) {
            ev.logits[group[k] * 2] = logits[k * 2];
            ev.logits[group[k] * 2 + 1] = logits[k * 2 + 1];
        }
        ev.labels.insert(ev.labels.end(), b.labels.begin(), b.labels.end());
    }
    ev.loss = loss_sum / static_cast<double>(n);
    const auto pred = argmax_predictions(ev.logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += pred[i] == ev.labels[i];
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    return ev;
}

std::string format_curve_row(const EpochStats& s) {
    return fmt::format("{},{:.9g},{:.9g},{:.9g}", s.epoch, s.train_loss, s.val_loss, s.val_accuracy);
}

Trainer::Trainer(std::unique_ptr<TrainState> state, const DatasetManifest& manifest)
    : state_(std::move(state)),
      train_(manifest.split("train"), state_->config.img_size, true, state_->config.workers),
      valid_(manifest.split("valid"), state_->config.img_size, true, state_->config.workers) {}

EpochStats Trainer::run_epoch() {
    try {
        return run_epoch_unchecked();
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        if (msg.find("epoch") != std::string::npos) throw;
        throw NumericError(fmt::format("epoch {}: {}", state_->epoch + 1, msg));
    }
}

EpochStats Trainer::run_epoch_unchecked() {
    TrainState& st = *state_;
    const TrainHyper h = st.config.hyper();
    EpochStats s;
    s.epoch = st.epoch + 1;

    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    const ParamRefs params = st.net.parameters();
    for (const auto& group : batch_plan(train_.size(), h.batch_size, h.seed, s.epoch, true)) {
        Batch b = train_.load(group);
        Tensor logits = st.net.forward(b.images, true);
        LossResult loss = softmax_cross_entropy(logits, b.labels);
        if (!std::isfinite(loss.loss)) throw NumericError(fmt::format("non-finite training loss at epoch {}", s.epoch));
        const auto pred = argmax_predictions(logits);
        for (std::size_t k = 0; k < pred.size(); ++k) correct += pred[k] == b.labels[k];
        seen += group.size();
        loss_sum += loss.loss * static_cast<double>(group.size());
        optimizer_step(params, st.net.backward(loss.grad_logits), st.optimizer, h);
    }
    s.train_loss = loss_sum / static_cast<double>(seen);
    s.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);

    const Evaluation ev = evaluate(st.net, valid_, h.batch_size);
    if (!std::isfinite(ev.loss)) throw NumericError(fmt::format("non-finite validation loss at epoch {}", s.epoch));
    s.val_loss = ev.loss;
    s.val_accuracy = ev.accuracy;

    st.epoch = s.epoch;
    if (s.val_accuracy > st.best_val_accuracy) {
        st.best_val_accuracy = s.val_accuracy;
        st.best_epoch = s.epoch;
    }
    return s;
}

}  // namespace c2f
