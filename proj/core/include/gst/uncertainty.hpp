#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gst/tensor.hpp"
#include "gst/translator.hpp"

namespace gst {

// Which uncertainty feeds the pseudo-label mask. `full` combines both;
// gst_a keeps the epistemic map only, gst_e the aleatoric map only. The
// training loss is identical in all three.
enum class Ablation { full, gst_a, gst_e };

const char* to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

// Per-image uncertainty maps from one K-pass MC sweep.
struct UncertaintyBundle {
    Tensor mu;           // predictive mean over the K passes
    Tensor u_epistemic;  // population variance (divisor K) of the K means
    Tensor u_aleatoric;  // mean of exp(log_var) over the K passes
    Tensor u_total;      // u_epistemic + u_aleatoric
    Tensor sigma2_mean;  // same map as u_aleatoric, kept for diagnostics
};

// Pseudo-label and selection mask for one target image and one round.
// y_hat and mask are constants during retraining; no gradient reaches them.
struct PseudoLabelSet {
    Tensor y_hat;
    Tensor mask;  // values exactly 0 or 1; popcount == floor(p*N)
    float epsilon = 0.0f;
    double p = 0.0;
};

// K stochastic forward passes with independent dropout streams derived from
// `seed`; pass k is identical no matter how the passes are scheduled, so the
// sweep may run in parallel. Returns (y_mean, log_var) pairs in pass order.
std::vector<std::pair<Tensor, Tensor>> mc_sample(const TranslatorParams& params, const Tensor& x,
                                                 int k_passes, std::uint64_t seed,
                                                 int threads = 0);

// Predictive mean and per-pixel population variance (divisor K) of the K
// mean images.
std::pair<Tensor, Tensor> epistemic_map(const std::vector<Tensor>& mean_samples);

// Mean of exp(log_var) over the K passes; returned twice (map, diagnostics).
std::pair<Tensor, Tensor> aleatoric_map(const std::vector<Tensor>& logvar_samples);

UncertaintyBundle make_bundle(const std::vector<std::pair<Tensor, Tensor>>& samples);

// Keeps the floor(p*N) lowest-uncertainty pixels, ties broken by ascending
// flat index; epsilon is the largest selected value (inclusive boundary).
std::pair<Tensor, float> select_mask(const Tensor& u_total, double p);

// Joint selection over several images: one threshold across the pooled
// pixels, floor(p * total_N) selected overall.
std::pair<std::vector<Tensor>, float> select_mask_global(const std::vector<Tensor>& u, double p);

// y_hat = mu; mask from the ablation-selected uncertainty map.
PseudoLabelSet make_pseudo_labels(const UncertaintyBundle& bundle, double p,
                                  Ablation ablation = Ablation::full);

// 8-bit PGM heatmap, affine-normalized to [0,255]; the (min,max) scale goes
// to <path>.scale.txt so values can be recovered.
void write_heatmap_pgm(const Tensor& map, const std::string& path);

}  // namespace gst
