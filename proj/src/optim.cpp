#include "c2f/optim.hpp"

#include <cmath>

#include "c2f/error.hpp"

namespace c2f {

namespace {

void check_alignment(const ParamRefs& params, const GradRefs& grads, const OptimizerState& state,
                     OptimizerKind expected) {
    if (state.kind != expected) throw Error("optimizer state was created for " + to_string(state.kind));
    if (params.size() != grads.size() || params.size() != state.keys.size()) {
        throw Error("optimizer: registry sizes differ (params " + std::to_string(params.size()) + ", grads " +
                    std::to_string(grads.size()) + ", state " + std::to_string(state.keys.size()) + ")");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != grads[i].name || params[i].name != state.keys[i]) {
            throw Error("optimizer: key mismatch at position " + std::to_string(i) + ": '" + params[i].name +
                        "' vs '" + grads[i].name + "' vs '" + state.keys[i] + "'");
        }
        if (params[i].tensor->shape() != grads[i].tensor->shape()) {
            throw ShapeError("optimizer: gradient shape differs for " + params[i].name);
        }
    }
}

void adam_family_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h,
                      bool decoupled) {
    h.validate();
    check_alignment(params, grads, state, decoupled ? OptimizerKind::adamw : OptimizerKind::adam);
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(h.beta1, t);
    const double bc2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i].tensor;
        const Tensor& g = *grads[i].tensor;
        Tensor& m = state.first_moment[i];
        Tensor& s = state.second_moment[i];
        for (std::size_t j = 0; j < w.numel(); ++j) {
            double wj = w[j];
            double gj = g[j];
            if (decoupled) {
                wj -= h.lr0 * h.weight_decay * wj;
            } else if (h.weight_decay != 0.0) {
                gj += h.weight_decay * wj;
            }
            const double mj = h.beta1 * m[j] + (1.0 - h.beta1) * gj;
            const double sj = h.beta2 * s[j] + (1.0 - h.beta2) * gj * gj;
            m[j] = static_cast<float>(mj);
            s[j] = static_cast<float>(sj);
            wj -= h.lr0 * (mj / bc1) / (std::sqrt(sj / bc2) + h.eps);
            w[j] = static_cast<float>(wj);
        }
    }
}

}  // namespace

OptimizerKind parse_optimizer_kind(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    if (name == "adamw") return OptimizerKind::adamw;
    if (name == "rmsprop") return OptimizerKind::rmsprop;
    throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd, adam, adamw or rmsprop)");
}

std::string to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::adamw: return "adamw";
        case OptimizerKind::rmsprop: return "rmsprop";
    }
    return "unknown";
}

TrainHyper TrainHyper::defaults_for(OptimizerKind kind) {
    TrainHyper h;
    if (kind == OptimizerKind::sgd) h.weight_decay = 0.0005;
    if (kind == OptimizerKind::adamw) h.weight_decay = 0.01;
    return h;
}

void TrainHyper::validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("betas must lie in [0,1)");
    }
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in [0,1)");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

ParamRefs OptimizerState::buffers() {
    ParamRefs out;
    auto add = [&](const char* prefix, std::vector<Tensor>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back({std::string(prefix) + keys[i], &v[i]});
    };
    add("velocity.", velocity);
    add("first_moment.", first_moment);
    add("second_moment.", second_moment);
    return out;
}

OptimizerState make_optimizer(OptimizerKind kind, const ParamRefs& params) {
    OptimizerState st;
    st.kind = kind;
    for (const auto& p : params) {
        st.keys.push_back(p.name);
        const Tensor zero(p.tensor->shape());
        switch (kind) {
            case OptimizerKind::sgd: st.velocity.push_back(zero); break;
            case OptimizerKind::adam:
            case OptimizerKind::adamw:
                st.first_moment.push_back(zero);
                st.second_moment.push_back(zero);
                break;
            case OptimizerKind::rmsprop:
                st.velocity.push_back(zero);
                st.second_moment.push_back(zero);
                break;
        }
    }
    return st;
}

OptimizerState make_optimizer(std::string_view kind, const ParamRefs& params) {
    return make_optimizer(parse_optimizer_kind(kind), params);
}

void sgd_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h) {
    h.validate();
    check_alignment(params, grads, state, OptimizerKind::sgd);
    state.step += 1;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i].tensor;
        const Tensor& g = *grads[i].tensor;
        Tensor& v = state.velocity[i];
        for (std::size_t j = 0; j < w.numel(); ++j) {
            const double gj = g[j] + h.weight_decay * w[j];
            const double vj = h.momentum * v[j] + gj;
            v[j] = static_cast<float>(vj);
            w[j] = static_cast<float>(w[j] - h.lr0 * vj);
        }
    }
}

void adam_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h) {
    adam_family_step(params, grads, state, h, false);
}

void adamw_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h) {
    adam_family_step(params, grads, state, h, true);
}

void rmsprop_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h) {
    h.validate();
    check_alignment(params, grads, state, OptimizerKind::rmsprop);
    state.step += 1;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i].tensor;
        const Tensor& g = *grads[i].tensor;
        Tensor& s = state.second_moment[i];
        Tensor& v = state.velocity[i];
        for (std::size_t j = 0; j < w.numel(); ++j) {
            const double gj = g[j] + h.weight_decay * w[j];
            const double sj = h.alpha * s[j] + (1.0 - h.alpha) * gj * gj;
            s[j] = static_cast<float>(sj);
            const double update = h.lr0 * gj / (std::sqrt(sj) + h.eps);
            if (h.momentum > 0.0) {
                const double vj = h.momentum * v[j] + update;
                v[j] = static_cast<float>(vj);
                w[j] = static_cast<float>(w[j] - vj);
            } else {
                w[j] = static_cast<float>(w[j] - update);
            }
        }
    }
}

void optimizer_step(const ParamRefs& params, const GradRefs& grads, OptimizerState& state, const TrainHyper& h) {
    switch (state.kind) {
        case OptimizerKind::sgd: sgd_step(params, grads, state, h); break;
        case OptimizerKind::adam: adam_step(params, grads, state, h); break;
        case OptimizerKind::adamw: adamw_step(params, grads, state, h); break;
        case OptimizerKind::rmsprop: rmsprop_step(params, grads, state, h); break;
    }
}

}  // namespace c2f
