#include <chrono>
#include <cstdio>
#include "gst/metrics.hpp"
#include "gst/selftrain.hpp"
#include "gst/synthdata.hpp"
#include "gst/uncertainty.hpp"

using namespace gst;

static Tensor clip01(Tensor t) {
    for (auto& v : t.data) v = std::min(1.0f, std::max(0.0f, v));
    return t;
}

static std::pair<double, double> target_metrics(const TranslatorParams& p,
                                                const std::vector<Tensor>& xs,
                                                const std::vector<Tensor>& oracle) {
    double ps = 0, ss = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        auto [ym, lv] = translator_forward(p, xs[i], false, nullptr);
        Tensor pred = clip01(ym);
        ps += psnr(pred, oracle[i]);
        ss += ssim(pred, oracle[i]);
    }
    return {ps / xs.size(), ss / xs.size()};
}

int main(int argc, char** argv) {
    std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 11;
    double lr = argc > 2 ? std::stod(argv[2]) : 1e-4;
    float clamp = argc > 3 ? std::stof(argv[3]) : 4.0f;
    int pre_epochs = argc > 4 ? std::stoi(argv[4]) : 20;
    DomainSpec src_spec;  // period 8, gamma 1.0, noise 0
    src_spec.seed = 100;
    DomainSpec tgt_spec = src_spec;
    tgt_spec.tag_period = 12;
    tgt_spec.contrast_gamma = 1.4;
    tgt_spec.noise_sigma = 0.02;
    tgt_spec.seed = 200;

    SourceDataset ds;
    for (int i = 0; i < 200; ++i) {
        auto [tagged, clean] = generate_image_pair(src_spec, 64, 64, (std::uint64_t)i);
        ds.x.push_back(tagged); ds.y.push_back(clean); ds.ids.push_back("s");
    }
    ds.train_count = 180;
    std::vector<Tensor> tx, tclean;
    for (int i = 0; i < 24; ++i) {
        auto [tagged, clean] = generate_image_pair(tgt_spec, 64, 64, (std::uint64_t)i);
        tx.push_back(tagged); tclean.push_back(clean);
    }

    GstConfig cfg;
    cfg.lr = lr;
    cfg.seed = seed;
    cfg.pretrain_epochs = pre_epochs;
    ModelConfig mc;
    mc.seed = seed;

    std::printf("seed %llu lr %g clamp %.1f epochs %d\n", (unsigned long long)seed, lr, clamp, pre_epochs);

    auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(seed, 0x696e6974));
    auto params = build_model<float>(mc, rng);
    params = pretrain(std::move(params), ds, cfg);
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto [bp, bs] = target_metrics(params, tx, tclean);
    auto [vp, vs] = validation_metrics(params, ds);
    std::printf("pretrain %.1fs: src-val psnr %.2f ssim %.3f | target psnr %.2f ssim %.4f\n",
                dt, vp, vs, bp, bs);

    auto run = run_gst(cfg, mc, ds, tx, &params,
                       [&](int r, const TranslatorParams& p, const RoundReport& rep) {
                           auto [tp, ts] = target_metrics(p, tx, tclean);
                           std::printf(
                               "round %d p=%.2f eps=%.4g frac=%.3f Ls=%.1f Lt=%.2f | tgt psnr "
                               "%.2f ssim %.4f (%.1fs)\n",
                               r, rep.p, rep.epsilon_mean, rep.masked_fraction, rep.loss_src,
                               rep.loss_tgt, tp, ts, rep.seconds);
                       });
    auto [ap, as] = target_metrics(run.params, tx, tclean);
    std::printf("final: target psnr %.2f (%+.2f dB) ssim %.4f (%+.4f)\n", ap, ap - bp, as,
                as - bs);
    double tot = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("total %.1fs\n", tot);
    return 0;
}
