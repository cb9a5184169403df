#include "gst/selftrain.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "gst/metrics.hpp"

namespace gst {

namespace {

constexpr std::uint64_t kInitSalt = 0x696e6974;      // model init stream
constexpr std::uint64_t kPretrainSalt = 0x70726574;  // pretrain shuffle+dropout
constexpr std::uint64_t kRoundSalt = 0x726f756e;     // per-round base
constexpr std::uint64_t kStepASalt = 0x73746570;
constexpr std::uint64_t kStepBSalt = 0x73746571;

void require_image_batch(std::span<const Tensor> a, std::span<const Tensor> b,
                         const char* what) {
    if (a.empty() || a.size() != b.size())
        throw Error(std::string(what) + ": batch sizes differ or are empty");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].shape != b[i].shape)
            throw Error(std::string(what) + ": shape mismatch at image " + std::to_string(i) +
                        ": " + shape_str(a[i].shape) + " vs " + shape_str(b[i].shape));
}

}  // namespace

const char* to_string(ThresholdScope s) {
    return s == ThresholdScope::per_image ? "per_image" : "global";
}

ThresholdScope threshold_scope_from_string(const std::string& s) {
    if (s == "per_image") return ThresholdScope::per_image;
    if (s == "global") return ThresholdScope::global;
    throw ConfigError("threshold_scope must be per_image|global, got '" + s + "'");
}

void validate(const GstConfig& config) {
    if (config.k < 2) throw ConfigError("gst config: K must be >= 2");
    if (!(config.beta >= 0.0)) throw ConfigError("gst config: beta must be >= 0");
    if (!(config.p_start > 0.0 && config.p_start <= config.p_end && config.p_end <= 1.0))
        throw ConfigError("gst config: need 0 < p_start <= p_end <= 1");
    if (config.rounds < 1) throw ConfigError("gst config: rounds must be >= 1");
    if (config.epochs_per_round < 1) throw ConfigError("gst config: epochs_per_round must be >= 1");
    if (config.pretrain_epochs < 0) throw ConfigError("gst config: pretrain_epochs must be >= 0");
    if (!(config.lr > 0.0)) throw ConfigError("gst config: lr must be > 0");
    if (config.batch < 1) throw ConfigError("gst config: batch must be >= 1");
}

double round_p(const GstConfig& config, int round_index) {
    if (round_index < 0 || round_index >= config.rounds)
        throw Error("round_p: round index out of range");
    if (config.rounds == 1) return config.p_start;
    return config.p_start + (config.p_end - config.p_start) * static_cast<double>(round_index) /
                                static_cast<double>(config.rounds - 1);
}

double source_loss(std::span<const Tensor> y, std::span<const Tensor> y_tilde) {
    require_image_batch(y, y_tilde, "source_loss");
    double total = 0.0;
    for (std::size_t b = 0; b < y.size(); ++b) {
        double img = 0.0;
        for (std::size_t i = 0; i < y[b].data.size(); ++i) {
            const double d = static_cast<double>(y[b].data[i]) -
                             static_cast<double>(y_tilde[b].data[i]);
            img += d * d;
        }
        total += img;
    }
    return total / static_cast<double>(y.size());
}

double target_loss(std::span<const Tensor> y_hat, std::span<const Tensor> y_tilde,
                   std::span<const Tensor> log_var, std::span<const Tensor> mask, double beta,
                   bool mask_regularizer) {
    require_image_batch(y_hat, y_tilde, "target_loss");
    require_image_batch(y_hat, log_var, "target_loss");
    require_image_batch(y_hat, mask, "target_loss");
    double total = 0.0;
    for (std::size_t b = 0; b < y_hat.size(); ++b) {
        double img = 0.0;
        for (std::size_t i = 0; i < y_hat[b].data.size(); ++i) {
            const double m = mask[b].data[i];
            if (m != 0.0 && m != 1.0)
                throw Error("target_loss: mask must be binary, found " + std::to_string(m));
            const double lv = log_var[b].data[i];
            const double r = (static_cast<double>(y_hat[b].data[i]) -
                              static_cast<double>(y_tilde[b].data[i])) *
                             m;
            img += std::exp(-lv) * r * r + beta * lv * (mask_regularizer ? m : 1.0);
        }
        total += img;
    }
    return total / static_cast<double>(y_hat.size());
}

namespace {

struct TargetBatchItem {
    const Tensor* x;
    const PseudoLabelSet* labels;
};

struct BatchStats {
    double loss_src = 0.0;
    double loss_tgt = 0.0;
    double grad_norm = 0.0;  // pre-clip global L2 norm
};

// One SGD step on batch-mean(source L2) + batch-mean(masked heteroscedastic).
// Either side may be empty. The update direction is plain SGD; the step is
// rescaled when the global gradient norm exceeds config.grad_clip_norm,
// which bounds the variance-normalized term's worst batches.
BatchStats train_batch(TranslatorParams& params,
                       std::span<const std::size_t> src_idx,
                       const SourceDataset& source,
                       std::span<const TargetBatchItem> tgt,
                       const GstConfig& config, bool dropout_active, Rng& rng) {
    Graph g;
    const auto leaves = add_param_leaves(g, params);

    int src_sum = -1;
    for (const std::size_t s : src_idx) {
        const int x_id = g.leaf(source.x[s]);
        const auto [y_mean, log_var] =
            forward_on_graph(g, params.config, leaves, x_id, dropout_active, &rng);
        (void)log_var;  // pretraining and the source term use the mean head only
        const int err = image_sq_err_node(g, y_mean, g.leaf(source.y[s]));
        src_sum = src_sum < 0 ? err : g.add(src_sum, err);
    }

    int tgt_sum = -1;
    for (const TargetBatchItem& item : tgt) {
        const int x_id = g.leaf(*item.x);
        const auto [y_mean, log_var] = forward_on_graph(g, params.config, leaves, x_id,
                                                        config.target_forward_dropout, &rng);
        const int loss = image_target_loss_node(g, y_mean, log_var, g.leaf(item.labels->y_hat),
                                                g.leaf(item.labels->mask),
                                                static_cast<float>(config.beta),
                                                config.mask_regularizer);
        tgt_sum = tgt_sum < 0 ? loss : g.add(tgt_sum, loss);
    }

    int total = -1;
    double src_value = 0.0, tgt_value = 0.0;
    if (src_sum >= 0) {
        total = g.scale(src_sum, 1.0f / static_cast<float>(src_idx.size()));
        src_value = g.value(total).data[0];
    }
    if (tgt_sum >= 0) {
        const int scaled = g.scale(tgt_sum, 1.0f / static_cast<float>(tgt.size()));
        tgt_value = g.value(scaled).data[0];
        total = total < 0 ? scaled : g.add(total, scaled);
    }
    if (total < 0) throw Error("train_batch: empty batch");

    g.backward(total);
    double norm_sq = 0.0;
    for (const auto& [name, leaf] : leaves)
        for (const float v : g.grad(leaf).data) norm_sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(norm_sq);
    double lr = config.lr;
    if (config.grad_clip_norm > 0.0 && norm > config.grad_clip_norm)
        lr *= config.grad_clip_norm / norm;
    for (const auto& [name, leaf] : leaves)
        sgd_step(params.at(name), g.grad(leaf), lr);
    return {src_value, tgt_value, norm};
}

// Clip to [0,1]: predictions are scored like the on-disk PGM pipeline sees
// them.
Tensor clip01(Tensor t) {
    for (auto& v : t.data) v = std::min(1.0f, std::max(0.0f, v));
    return t;
}

}  // namespace

std::pair<double, double> validation_metrics(const TranslatorParams& params,
                                             const SourceDataset& source) {
    std::vector<std::size_t> idx;
    for (std::size_t i = source.train_count; i < source.x.size(); ++i) idx.push_back(i);
    if (idx.empty())
        for (std::size_t i = 0; i < std::min<std::size_t>(4, source.x.size()); ++i)
            idx.push_back(i);
    if (idx.empty()) throw Error("validation_metrics: empty dataset");

    double psnr_acc = 0.0, ssim_acc = 0.0;
    for (const std::size_t i : idx) {
        const auto [y_mean, log_var] =
            translator_forward(params, source.x[i], /*mc_mode=*/false, nullptr);
        const Tensor pred = clip01(y_mean);
        psnr_acc += psnr(pred, source.y[i]);
        ssim_acc += ssim(pred, source.y[i]);
    }
    return {psnr_acc / static_cast<double>(idx.size()),
            ssim_acc / static_cast<double>(idx.size())};
}

TranslatorParams pretrain(TranslatorParams params, const SourceDataset& source,
                          const GstConfig& config, TrainLog* log) {
    validate(config);
    if (source.x.empty()) throw Error("pretrain: empty source dataset");
    Rng rng(derive_seed(config.seed, kPretrainSalt));

    std::vector<std::size_t> order(source.train_count);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(config.batch)) {
            const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(config.batch));
            const std::span<const std::size_t> chunk(order.data() + pos, end - pos);
            const BatchStats stats =
                train_batch(params, chunk, source, {}, config, config.pretrain_dropout, rng);
            epoch_loss += stats.loss_src;
            ++batches;
        }
        if (log) {
            log->train_loss.push_back(epoch_loss / std::max(1, batches));
            std::vector<Tensor> val_pred;
            std::vector<Tensor> val_truth;
            for (std::size_t i = source.train_count; i < source.x.size(); ++i) {
                auto [y_mean, log_var] =
                    translator_forward(params, source.x[i], /*mc_mode=*/false, nullptr);
                val_pred.push_back(std::move(y_mean));
                val_truth.push_back(source.y[i]);
            }
            log->val_loss.push_back(val_pred.empty() ? 0.0 : source_loss(val_truth, val_pred));
        }
    }
    return params;
}

PseudoLabelStep pseudo_label_step(const TranslatorParams& params,
                                  const std::vector<Tensor>& targets, double p,
                                  const GstConfig& config, std::uint64_t seed) {
    PseudoLabelStep step;
    step.bundles.reserve(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto samples = mc_sample(params, targets[t], config.k,
                                       derive_seed(seed, static_cast<std::uint64_t>(t)),
                                       config.mc_threads);
        step.bundles.push_back(make_bundle(samples));
    }

    if (config.threshold_scope == ThresholdScope::per_image) {
        for (const UncertaintyBundle& b : step.bundles)
            step.labels.push_back(make_pseudo_labels(b, p, config.ablation));
        return step;
    }

    // global scope: one threshold over the pooled pixels of all images
    std::vector<Tensor> pooled;
    pooled.reserve(step.bundles.size());
    for (const UncertaintyBundle& b : step.bundles) {
        switch (config.ablation) {
            case Ablation::gst_a: pooled.push_back(b.u_epistemic); break;
            case Ablation::gst_e: pooled.push_back(b.u_aleatoric); break;
            case Ablation::full: pooled.push_back(b.u_total); break;
        }
    }
    auto [masks, epsilon] = select_mask_global(pooled, p);
    for (std::size_t t = 0; t < step.bundles.size(); ++t) {
        PseudoLabelSet set;
        set.y_hat = step.bundles[t].mu;
        set.mask = std::move(masks[t]);
        set.epsilon = epsilon;
        set.p = p;
        step.labels.push_back(std::move(set));
    }
    return step;
}

std::pair<TranslatorParams, RoundReport> adapt_round(TranslatorParams params,
                                                     const SourceDataset& source,
                                                     const std::vector<Tensor>& targets, double p,
                                                     int round_index, const GstConfig& config) {
    validate(config);
    if (targets.empty()) throw Error("adapt_round: empty target set");
    if (source.x.empty()) throw Error("adapt_round: empty source dataset");
    const auto t0 = std::chrono::steady_clock::now();

    const std::uint64_t round_seed =
        derive_seed(derive_seed(config.seed, kRoundSalt), static_cast<std::uint64_t>(round_index));

    // a) pseudo-label and mask generation, frozen for the whole round
    PseudoLabelStep step_a =
        pseudo_label_step(params, targets, p, config, derive_seed(round_seed, kStepASalt));

    RoundReport report;
    report.round = round_index;
    report.p = p;
    double mask_frac = 0.0;
    for (const PseudoLabelSet& set : step_a.labels) {
        report.epsilons.push_back(set.epsilon);
        double ones = 0.0;
        for (float v : set.mask.data) ones += v;
        mask_frac += ones / static_cast<double>(set.mask.size());
    }
    report.masked_fraction = mask_frac / static_cast<double>(step_a.labels.size());
    if (config.threshold_scope == ThresholdScope::global)
        report.epsilons.assign(1, step_a.labels.front().epsilon);
    report.epsilon_mean =
        std::accumulate(report.epsilons.begin(), report.epsilons.end(), 0.0) /
        static_cast<double>(report.epsilons.size());

    // b) retraining with equal-count source/target batches
    Rng rng(derive_seed(round_seed, kStepBSalt));
    std::vector<std::size_t> src_pool(source.train_count);
    std::iota(src_pool.begin(), src_pool.end(), 0);
    shuffle(src_pool, rng);
    std::size_t src_pos = 0;
    auto next_source = [&]() {
        if (src_pos == src_pool.size()) {
            shuffle(src_pool, rng);
            src_pos = 0;
        }
        return src_pool[src_pos++];
    };

    std::vector<std::size_t> tgt_order(targets.size());
    std::iota(tgt_order.begin(), tgt_order.end(), 0);

    double src_acc = 0.0, tgt_acc = 0.0;
    int batches = 0;
    for (int epoch = 0; epoch < config.epochs_per_round; ++epoch) {
        shuffle(tgt_order, rng);
        for (std::size_t pos = 0; pos < tgt_order.size();
             pos += static_cast<std::size_t>(config.batch)) {
            const std::size_t end =
                std::min(tgt_order.size(), pos + static_cast<std::size_t>(config.batch));
            std::vector<TargetBatchItem> tgt_batch;
            std::vector<std::size_t> src_batch;
            for (std::size_t i = pos; i < end; ++i) {
                tgt_batch.push_back(
                    {&targets[tgt_order[i]], &step_a.labels[tgt_order[i]]});
                src_batch.push_back(next_source());
            }
            const BatchStats stats = train_batch(params, src_batch, source, tgt_batch, config,
                                                 /*dropout_active=*/true, rng);
            src_acc += stats.loss_src;
            tgt_acc += stats.loss_tgt;
            ++batches;
        }
    }
    report.loss_src = src_acc / std::max(1, batches);
    report.loss_tgt = tgt_acc / std::max(1, batches);
    std::tie(report.psnr_val, report.ssim_val) = validation_metrics(params, source);
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(params), std::move(report)};
}

GstRun run_gst(const GstConfig& config, const ModelConfig& model_config,
               const SourceDataset& source, const std::vector<Tensor>& targets,
               const TranslatorParams* init, const RoundCallback& callback) {
    validate(config);
    TranslatorParams params;
    if (init) {
        params = *init;
    } else {
        ModelConfig mc = model_config;
        mc.seed = config.seed;
        Rng rng(derive_seed(config.seed, kInitSalt));
        params = build_model<float>(mc, rng);
        params = pretrain(std::move(params), source, config);
    }

    GstRun run;
    for (int r = 0; r < config.rounds; ++r) {
        auto [next, report] =
            adapt_round(std::move(params), source, targets, round_p(config, r), r, config);
        params = std::move(next);
        if (callback) callback(r, params, report);
        run.reports.push_back(std::move(report));
    }
    run.params = std::move(params);
    return run;
}

}  // namespace gst
