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
static std::pair<double,double> tmetrics(const TranslatorParams& p, const std::vector<Tensor>& xs,
                                         const std::vector<Tensor>& oracle) {
    double ps = 0, ss = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        auto [ym, lv] = translator_forward(p, xs[i], false, nullptr);
        Tensor pr = clip01(ym);
        ps += psnr(pr, oracle[i]); ss += ssim(pr, oracle[i]);
    }
    return {ps / xs.size(), ss / xs.size()};
}

int main(int argc, char** argv) {
    double lr = argc > 1 ? std::stod(argv[1]) : 1e-4;
    float clamp = argc > 2 ? std::stof(argv[2]) : 2.0f;
    int null_shift = argc > 3 ? std::stoi(argv[3]) : 0;
    double clip = argc > 4 ? std::stod(argv[4]) : 250.0;
    std::uint64_t seed = argc > 5 ? std::stoull(argv[5]) : 11;
    int tfd = argc > 6 ? std::stoi(argv[6]) : 0;

    DomainSpec src_spec; src_spec.seed = 100;
    DomainSpec tgt_spec = src_spec;
    if (!null_shift) { tgt_spec.tag_period = 12; tgt_spec.contrast_gamma = 1.4; tgt_spec.noise_sigma = 0.02; }
    tgt_spec.seed = 200;

    SourceDataset ds;
    for (int i = 0; i < 200; ++i) {
        auto [tg, cl] = generate_image_pair(src_spec, 64, 64, (std::uint64_t)i);
        ds.x.push_back(tg); ds.y.push_back(cl); ds.ids.push_back("s");
    }
    ds.train_count = 180;
    std::vector<Tensor> tx, tc;
    for (int i = 0; i < 24; ++i) {
        auto [tg, cl] = generate_image_pair(tgt_spec, 64, 64, (std::uint64_t)i);
        tx.push_back(tg); tc.push_back(cl);
    }

    GstConfig cfg; cfg.lr = lr; cfg.seed = seed; cfg.grad_clip_norm = clip;
    cfg.target_forward_dropout = tfd != 0;
    ModelConfig mc; mc.seed = seed; mc.logvar_min = -clamp; mc.logvar_max = 2.0f;
    Rng rng(derive_seed(seed, 0x696e6974));
    auto params = build_model<float>(mc, rng);
    TrainLog log;
    params = pretrain(std::move(params), ds, cfg, &log);
    std::printf("lr %g clamp %.1f null %d clip %g seed %llu | val-loss last4: %.1f %.1f %.1f %.1f\n",
                lr, clamp, null_shift, clip, (unsigned long long)seed, log.val_loss[16],
                log.val_loss[17], log.val_loss[18], log.val_loss[19]);
    auto [bp, bs] = tmetrics(params, tx, tc);
    std::printf("baseline tgt psnr %.2f ssim %.4f\n", bp, bs);

    auto run = run_gst(cfg, mc, ds, tx, &params,
                       [&](int r, const TranslatorParams& p, const RoundReport& rep) {
                           auto [tp, ts] = tmetrics(p, tx, tc);
                           std::printf("r%d p=%.2f eps=%.3g Ls=%.1f Lt=%.1f val=%.2f | tgt %.2f/%.4f\n",
                                       r, rep.p, rep.epsilon_mean, rep.loss_src, rep.loss_tgt,
                                       rep.psnr_val, tp, ts);
                       });
    auto [ap, as] = tmetrics(run.params, tx, tc);
    {
        std::vector<double> per;
        for (size_t i = 0; i < tx.size(); ++i) {
            auto [ym, lv] = translator_forward(run.params, tx[i], false, nullptr);
            per.push_back(psnr(clip01(ym), tc[i]));
        }
        std::sort(per.begin(), per.end());
        std::printf("target per-img psnr: min %.1f med %.1f max %.1f\n", per.front(),
                    per[per.size() / 2], per.back());
    }
    std::printf("RESULT lr=%g clamp=%.1f null=%d clip=%g seed=%llu : %+0.2f dB, ssim %+0.4f\n",
                lr, clamp, null_shift, clip, (unsigned long long)seed, ap - bp, as - bs);
    return 0;
}
