#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gst/graph.hpp"
#include "gst/rng.hpp"
#include "gst/tensor.hpp"

namespace gst {

// Micro encoder-decoder with a dual head: one [1,H,W] input image in, a
// predicted mean image and a per-pixel log-variance map out. Three stride-2
// encoder stages, a bottleneck conv, three nearest-upsample decoder stages
// with skip concats, dropout after each decoder stage.
struct ModelConfig {
    int input_h = 64;
    int input_w = 64;
    int base_channels = 8;
    float dropout_rate = 0.2f;
    // Clamp band for the log-variance head; sigma^2 = exp(log_var) stays in
    // [exp(logvar_min), exp(logvar_max)], strictly positive, so the
    // 1/sigma^2 loss term never divides by zero. The floor also bounds how
    // much the variance-normalized residual can outweigh the plain source
    // L2 term: with logvar_min = 0 a pseudo-label residual is never weighted
    // above 1, which keeps fixed-lr SGD on the joint loss stable.
    float logvar_min = 0.0f;
    float logvar_max = 2.0f;
    std::uint64_t seed = 0;
};

void validate(const ModelConfig& config);

struct ConvSpec {
    std::string name;
    int in_ch, out_ch, k, stride, pad;
};

// Layer table derived from the config. The stride-2 stages use 4x4 kernels:
// the exact-output-extent contract of conv2d rules out odd kernels at
// stride 2 on even extents, and 4x4 is the usual choice for this backbone.
std::vector<ConvSpec> layer_specs(const ModelConfig& config);

template <typename S>
struct TranslatorParamsT {
    ModelConfig config;
    std::vector<std::pair<std::string, TensorT<S>>> tensors;

    TensorT<S>& at(std::string_view name) {
        for (auto& [n, t] : tensors)
            if (n == name) return t;
        throw Error("translator: unknown parameter '" + std::string(name) + "'");
    }
    const TensorT<S>& at(std::string_view name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw Error("translator: unknown parameter '" + std::string(name) + "'");
    }
    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : tensors) n += t.size();
        return n;
    }
};

using TranslatorParams = TranslatorParamsT<float>;

// Fan-in-scaled uniform init (variance 1/fan_in), zero biases. The one
// exception is the log-variance head bias, which starts at the clamp floor:
// the beta*log(sigma^2) regularizer otherwise back-propagates a large
// constant-sign gradient through the shared decoder until the head reaches
// the floor on its own, and under plain SGD that transient distorts the
// features the mean head needs. Deterministic for a given rng seed.
template <typename S>
TranslatorParamsT<S> build_model(const ModelConfig& config, Rng& rng) {
    validate(config);
    TranslatorParamsT<S> params;
    params.config = config;
    for (const ConvSpec& spec : layer_specs(config)) {
        const int fan_in = spec.in_ch * spec.k * spec.k;
        double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
        // The variance head starts as a near-constant map at the clamp floor.
        // A full-scale random readout would put O(1) noise on the aleatoric
        // map and drown the MC-variance ordering that drives the masks.
        if (spec.name == "logvar_head") limit *= 0.01;
        TensorT<S> weight({spec.out_ch, spec.in_ch, spec.k, spec.k});
        for (auto& v : weight.data) v = static_cast<S>(rng.uniform(-limit, limit));
        params.tensors.emplace_back(spec.name + ".weight", std::move(weight));
        TensorT<S> bias({spec.out_ch});
        if (spec.name == "logvar_head")
            std::fill(bias.data.begin(), bias.data.end(), S(config.logvar_min));
        params.tensors.emplace_back(spec.name + ".bias", std::move(bias));
    }
    return params;
}

// (name, graph node id) per parameter tensor, in parameter order.
using ParamLeaves = std::vector<std::pair<std::string, int>>;

template <typename S>
ParamLeaves add_param_leaves(GraphT<S>& g, const TranslatorParamsT<S>& params) {
    ParamLeaves leaves;
    leaves.reserve(params.tensors.size());
    for (const auto& [name, t] : params.tensors)
        leaves.emplace_back(name, g.leaf(t, /*requires_grad=*/true));
    return leaves;
}

inline int leaf_id(const ParamLeaves& leaves, std::string_view name) {
    for (const auto& [n, id] : leaves)
        if (n == name) return id;
    throw Error("translator: no leaf for parameter '" + std::string(name) + "'");
}

// Appends the full forward pass to the graph and returns the ids of the two
// head outputs (y_mean, log_var). `stochastic` turns the dropout sites on;
// both MC sampling and training use the same path.
template <typename S>
std::pair<int, int> forward_on_graph(GraphT<S>& g, const ModelConfig& config,
                                     const ParamLeaves& leaves, int x_id,
                                     bool stochastic, Rng* rng) {
    const TensorT<S>& x = g.value(x_id);
    if (x.shape != Shape{1, config.input_h, config.input_w})
        throw Error("translator: input shape " + shape_str(x.shape) + " does not match config [1," +
                    std::to_string(config.input_h) + "," + std::to_string(config.input_w) + "]");
    if (stochastic && config.dropout_rate > 0.0f && rng == nullptr)
        throw Error("translator: stochastic forward needs an rng");

    auto conv = [&](const char* name, int in, int stride, int pad) {
        return g.conv2d(in, leaf_id(leaves, std::string(name) + ".weight"),
                        leaf_id(leaves, std::string(name) + ".bias"), stride, pad);
    };

    const int e1 = g.relu(conv("enc1", x_id, 2, 1));
    const int e2 = g.relu(conv("enc2", e1, 2, 1));
    const int e3 = g.relu(conv("enc3", e2, 2, 1));
    const int bott = g.relu(conv("bottleneck", e3, 1, 1));

    auto decoder = [&](const char* name, int in, int skip) {
        const int up = g.upsample2x(in);
        const int cat = g.concat_channels(up, skip);
        const int act = g.relu(conv(name, cat, 1, 1));
        Rng dummy(0);
        return g.dropout(act, config.dropout_rate, stochastic, rng ? *rng : dummy);
    };

    const int d1 = decoder("dec1", bott, e2);
    const int d2 = decoder("dec2", d1, e1);
    const int d3 = decoder("dec3", d2, x_id);

    const int y_mean = conv("mean_head", d3, 1, 0);
    const int log_var = g.clamp(conv("logvar_head", d3, 1, 0), S(config.logvar_min),
                                S(config.logvar_max));
    return {y_mean, log_var};
}

// One-shot inference: builds a throwaway tape. mc_mode=true samples the
// dropout sites; mc_mode=false is deterministic.
template <typename S>
std::pair<TensorT<S>, TensorT<S>> translator_forward(const TranslatorParamsT<S>& params,
                                                     const TensorT<S>& x, bool mc_mode,
                                                     Rng* rng) {
    GraphT<S> g;
    const auto leaves = add_param_leaves(g, params);
    const int x_id = g.leaf(x);
    const auto [y_mean, log_var] = forward_on_graph(g, params.config, leaves, x_id, mc_mode, rng);
    return {g.value(y_mean), g.value(log_var)};
}

// Versioned binary checkpoint: config echo + named float32 arrays.
// Round-trips bit-exactly.
void save_checkpoint(const TranslatorParams& params, const std::string& path);
TranslatorParams load_checkpoint(const std::string& path);

}  // namespace gst
