#include "gst/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "gst/parallel.hpp"
#include "gst/pgm.hpp"

namespace gst {

const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::gst_a: return "gst_a";
        case Ablation::gst_e: return "gst_e";
    }
    return "?";
}

Ablation ablation_from_string(const std::string& s) {
    if (s == "full") return Ablation::full;
    if (s == "gst_a") return Ablation::gst_a;
    if (s == "gst_e") return Ablation::gst_e;
    throw ConfigError("ablation must be one of full|gst_a|gst_e, got '" + s + "'");
}

std::vector<std::pair<Tensor, Tensor>> mc_sample(const TranslatorParams& params, const Tensor& x,
                                                 int k_passes, std::uint64_t seed, int threads) {
    if (k_passes < 2) throw Error("mc_sample: K must be >= 2 (variance undefined below)");
    std::vector<std::pair<Tensor, Tensor>> samples(static_cast<std::size_t>(k_passes));
    parallel_for(k_passes, threads, [&](int k) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        samples[static_cast<std::size_t>(k)] =
            translator_forward(params, x, /*mc_mode=*/true, &rng);
    });
    return samples;
}

std::pair<Tensor, Tensor> epistemic_map(const std::vector<Tensor>& mean_samples) {
    if (mean_samples.size() < 2) throw Error("epistemic_map: need K >= 2 samples");
    const Shape shape = mean_samples.front().shape;
    for (const Tensor& t : mean_samples)
        if (t.shape != shape) throw Error("epistemic_map: sample shape mismatch");
    const double k = static_cast<double>(mean_samples.size());

    Tensor mu(shape), var(shape);
    for (std::size_t i = 0; i < mu.data.size(); ++i) {
        double acc = 0.0;
        for (const Tensor& t : mean_samples) acc += static_cast<double>(t.data[i]);
        mu.data[i] = static_cast<float>(acc / k);
    }
    for (std::size_t i = 0; i < var.data.size(); ++i) {
        double acc = 0.0;
        for (const Tensor& t : mean_samples) {
            const double d = static_cast<double>(t.data[i]) - static_cast<double>(mu.data[i]);
            acc += d * d;
        }
        var.data[i] = static_cast<float>(acc / k);
    }
    return {std::move(mu), std::move(var)};
}

std::pair<Tensor, Tensor> aleatoric_map(const std::vector<Tensor>& logvar_samples) {
    if (logvar_samples.size() < 2) throw Error("aleatoric_map: need K >= 2 samples");
    const Shape shape = logvar_samples.front().shape;
    for (const Tensor& t : logvar_samples)
        if (t.shape != shape) throw Error("aleatoric_map: sample shape mismatch");
    const double k = static_cast<double>(logvar_samples.size());

    Tensor u(shape);
    for (std::size_t i = 0; i < u.data.size(); ++i) {
        double acc = 0.0;
        for (const Tensor& t : logvar_samples) acc += std::exp(static_cast<double>(t.data[i]));
        u.data[i] = static_cast<float>(acc / k);
    }
    return {u, u};
}

UncertaintyBundle make_bundle(const std::vector<std::pair<Tensor, Tensor>>& samples) {
    std::vector<Tensor> means, logvars;
    means.reserve(samples.size());
    logvars.reserve(samples.size());
    for (const auto& [m, lv] : samples) {
        means.push_back(m);
        logvars.push_back(lv);
    }
    UncertaintyBundle b;
    std::tie(b.mu, b.u_epistemic) = epistemic_map(means);
    std::tie(b.u_aleatoric, b.sigma2_mean) = aleatoric_map(logvars);
    b.u_total = Tensor(b.mu.shape);
    for (std::size_t i = 0; i < b.u_total.data.size(); ++i)
        b.u_total.data[i] = b.u_epistemic.data[i] + b.u_aleatoric.data[i];
    return b;
}

namespace {

// floor(p*N) with a tiny absolute guard so that p values like 0.3 (not
// representable in binary) still select the mathematically intended count.
std::int64_t selected_count(double p, std::int64_t n) {
    return static_cast<std::int64_t>(std::floor(p * static_cast<double>(n) + 1e-9));
}

}  // namespace

std::pair<Tensor, float> select_mask(const Tensor& u_total, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw Error("select_mask: p must be in (0,1]");
    const std::int64_t n = u_total.size();
    const std::int64_t k = selected_count(p, n);
    if (k < 1)
        throw Error("select_mask: floor(p*N) is zero for N=" + std::to_string(n) +
                    "; increase p");

    std::vector<std::int32_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        return u_total.data[static_cast<std::size_t>(a)] <
               u_total.data[static_cast<std::size_t>(b)];
    });

    Tensor mask(u_total.shape);
    for (std::int64_t i = 0; i < k; ++i)
        mask.data[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1.0f;
    const float epsilon = u_total.data[static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)])];
    return {std::move(mask), epsilon};
}

std::pair<std::vector<Tensor>, float> select_mask_global(const std::vector<Tensor>& u, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw Error("select_mask: p must be in (0,1]");
    if (u.empty()) throw Error("select_mask: empty image set");
    std::int64_t total = 0;
    for (const Tensor& t : u) total += t.size();
    const std::int64_t k = selected_count(p, total);
    if (k < 1) throw Error("select_mask: floor(p*N) is zero; increase p");

    // pool indexed by (image, pixel), flat order = concatenation order
    std::vector<std::pair<std::int32_t, std::int32_t>> order;
    order.reserve(static_cast<std::size_t>(total));
    for (std::size_t img = 0; img < u.size(); ++img)
        for (std::int64_t px = 0; px < u[img].size(); ++px)
            order.emplace_back(static_cast<std::int32_t>(img), static_cast<std::int32_t>(px));
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return u[static_cast<std::size_t>(a.first)].data[static_cast<std::size_t>(a.second)] <
               u[static_cast<std::size_t>(b.first)].data[static_cast<std::size_t>(b.second)];
    });

    std::vector<Tensor> masks;
    masks.reserve(u.size());
    for (const Tensor& t : u) masks.emplace_back(t.shape);
    for (std::int64_t i = 0; i < k; ++i) {
        const auto& [img, px] = order[static_cast<std::size_t>(i)];
        masks[static_cast<std::size_t>(img)].data[static_cast<std::size_t>(px)] = 1.0f;
    }
    const auto& [img, px] = order[static_cast<std::size_t>(k - 1)];
    const float epsilon = u[static_cast<std::size_t>(img)].data[static_cast<std::size_t>(px)];
    return {std::move(masks), epsilon};
}

PseudoLabelSet make_pseudo_labels(const UncertaintyBundle& bundle, double p, Ablation ablation) {
    const Tensor* u = &bundle.u_total;
    if (ablation == Ablation::gst_a) u = &bundle.u_epistemic;
    if (ablation == Ablation::gst_e) u = &bundle.u_aleatoric;
    PseudoLabelSet set;
    set.y_hat = bundle.mu;
    std::tie(set.mask, set.epsilon) = select_mask(*u, p);
    set.p = p;
    return set;
}

void write_heatmap_pgm(const Tensor& map, const std::string& path) {
    float lo = map.data.empty() ? 0.0f : map.data[0];
    float hi = lo;
    for (float v : map.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float span = hi > lo ? hi - lo : 1.0f;
    Tensor norm(map.shape);
    for (std::size_t i = 0; i < map.data.size(); ++i) norm.data[i] = (map.data[i] - lo) / span;
    write_pgm(norm, path);

    std::ofstream os(path + ".scale.txt", std::ios::trunc);
    if (!os) throw Error("heatmap: cannot write scale sidecar for '" + path + "'");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "min %.9g\nmax %.9g\n", static_cast<double>(lo),
                  static_cast<double>(hi));
    os << buf;
}

}  // namespace gst
