#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gst/graph.hpp"
#include "gst/synthdata.hpp"
#include "gst/translator.hpp"
#include "gst/uncertainty.hpp"

namespace gst {

enum class ThresholdScope { per_image, global };

const char* to_string(ThresholdScope s);
ThresholdScope threshold_scope_from_string(const std::string& s);

// Hyperparameters of one adaptation run. p anneals linearly from p_start to
// p_end over the rounds.
struct GstConfig {
    int k = 20;
    double beta = 1.0;
    double p_start = 0.30;
    double p_end = 0.80;
    int rounds = 6;
    int epochs_per_round = 2;
    int pretrain_epochs = 20;
    double lr = 0.01;
    int batch = 4;  // per domain
    std::uint64_t seed = 0;
    Ablation ablation = Ablation::full;
    bool mask_regularizer = true;  // mask the beta*log(sigma^2) term too
    ThresholdScope threshold_scope = ThresholdScope::per_image;
    bool pretrain_dropout = true;
    // Dropout on the step-b target forward. Off by default: the pseudo-label
    // is the MC mean, so the mean path is regressed onto it; sampling here
    // feeds dropout noise into the variance-normalized residual instead.
    bool target_forward_dropout = false;
    // Global gradient-norm cap per SGD step (0 disables). The 1/sigma^2 loss
    // term produces occasional batches whose gradients exceed the stable
    // step size for the shared lr; rescaling those keeps plain SGD bounded.
    double grad_clip_norm = 250.0;
    int mc_threads = 0;  // 0 = hardware concurrency
};

void validate(const GstConfig& config);

// p for round r of the configured schedule; a single round runs at p_start.
double round_p(const GstConfig& config, int round_index);

struct RoundReport {
    int round = 0;
    double p = 0.0;
    std::vector<float> epsilons;   // per target image (single entry under global scope)
    double epsilon_mean = 0.0;
    double masked_fraction = 0.0;  // mean selected fraction over target images
    double loss_src = 0.0;         // batch-mean source loss over the round
    double loss_tgt = 0.0;
    double psnr_val = 0.0;         // held-out source validation snapshot
    double ssim_val = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;
};

// --- losses ------------------------------------------------------------

// Per-image sum of squared error, averaged over the batch.
double source_loss(std::span<const Tensor> y, std::span<const Tensor> y_tilde);

// Masked heteroscedastic loss, averaged over the batch:
//   sum_n exp(-lv_n) * ((y_hat_n - y_tilde_n) * m_n)^2 + beta * lv_n * (m_n or 1)
// sigma^2 enters as exp(log_var), so the variance-normalized term never
// divides by zero.
double target_loss(std::span<const Tensor> y_hat, std::span<const Tensor> y_tilde,
                   std::span<const Tensor> log_var, std::span<const Tensor> mask, double beta,
                   bool mask_regularizer);

// Graph builders for the same two losses (per image; batch assembly and the
// 1/B scaling happen at the call site).
template <typename S>
int image_sq_err_node(GraphT<S>& g, int y_tilde, int y_ref) {
    const int diff = g.sub(y_ref, y_tilde);
    return g.sum(g.mul(diff, diff));
}

template <typename S>
int image_target_loss_node(GraphT<S>& g, int y_tilde, int log_var, int y_hat, int mask, S beta,
                           bool mask_regularizer) {
    const int residual = g.mul(g.sub(y_hat, y_tilde), mask);
    const int fit = g.mul(g.mul(residual, residual), g.exp(g.scale(log_var, S(-1))));
    const int reg = mask_regularizer ? g.mul(log_var, mask) : log_var;
    return g.sum(g.add(fit, g.scale(reg, beta)));
}

// --- training drivers ---------------------------------------------------

// SGD on the source regression loss for pretrain_epochs. Deterministic given
// config.seed; throws on non-finite loss or gradients.
TranslatorParams pretrain(TranslatorParams params, const SourceDataset& source,
                          const GstConfig& config, TrainLog* log = nullptr);

// Step-a outputs for one round, kept for reporting and heatmap dumps.
struct PseudoLabelStep {
    std::vector<PseudoLabelSet> labels;
    std::vector<UncertaintyBundle> bundles;
};

PseudoLabelStep pseudo_label_step(const TranslatorParams& params,
                                  const std::vector<Tensor>& targets, double p,
                                  const GstConfig& config, std::uint64_t seed);

// One self-training round: (a) MC-dropout pseudo-labels and masks, (b)
// epochs_per_round epochs of SGD on source_loss + target_loss with the
// pseudo-labels frozen. Batches pair `batch` target images with an equal
// number of source images.
std::pair<TranslatorParams, RoundReport> adapt_round(TranslatorParams params,
                                                     const SourceDataset& source,
                                                     const std::vector<Tensor>& targets, double p,
                                                     int round_index, const GstConfig& config);

struct GstRun {
    TranslatorParams params;
    std::vector<RoundReport> reports;
};

using RoundCallback =
    std::function<void(int round, const TranslatorParams&, const RoundReport&)>;

// Full driver: pretrain (unless `init` is given), then the annealed rounds.
// The callback fires after every round so callers can persist checkpoints
// and report rows.
GstRun run_gst(const GstConfig& config, const ModelConfig& model_config,
               const SourceDataset& source, const std::vector<Tensor>& targets,
               const TranslatorParams* init = nullptr, const RoundCallback& callback = {});

// Deterministic validation snapshot (mean PSNR/SSIM on the held-out source
// split; falls back to a few training images when the split is empty).
std::pair<double, double> validation_metrics(const TranslatorParams& params,
                                             const SourceDataset& source);

}  // namespace gst
