#include <cstdio>
#include "gst/metrics.hpp"
#include "gst/pgm.hpp"
#include "gst/selftrain.hpp"
#include "gst/synthdata.hpp"
#include "gst/uncertainty.hpp"

using namespace gst;
static Tensor clip01(Tensor t) { for (auto& v : t.data) v = std::min(1.0f, std::max(0.0f, v)); return t; }

int main() {
    DomainSpec src_spec; src_spec.seed = 100;
    DomainSpec tgt_spec = src_spec;
    tgt_spec.tag_period = 12; tgt_spec.contrast_gamma = 1.4; tgt_spec.noise_sigma = 0.02; tgt_spec.seed = 200;
    SourceDataset ds;
    for (int i = 0; i < 200; ++i) {
        auto [tg, cl] = generate_image_pair(src_spec, 64, 64, (std::uint64_t)i);
        ds.x.push_back(tg); ds.y.push_back(cl); ds.ids.push_back("s");
    }
    ds.train_count = 180;
    GstConfig cfg; cfg.lr = 1e-4; cfg.seed = 11; cfg.grad_clip_norm = 250; cfg.pretrain_epochs = 20;
    ModelConfig mc; mc.seed = 11;
    Rng rng(derive_seed(11, 0x696e6974));
    auto params = build_model<float>(mc, rng);
    params = pretrain(std::move(params), ds, cfg);

    for (int i = 0; i < 3; ++i) {
        auto [tg, cl] = generate_image_pair(tgt_spec, 64, 64, (std::uint64_t)i);
        auto [ym, lv] = translator_forward(params, tg, false, nullptr);
        Tensor pred = clip01(ym);
        Tensor err({1, 64, 64});
        for (size_t n = 0; n < err.data.size(); ++n)
            err.data[n] = std::min(1.0f, std::abs(pred.data[n] - cl.data[n]) * 4.0f);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "/tmp/t%d_in.pgm", i); write_pgm(tg, buf);
        std::snprintf(buf, sizeof(buf), "/tmp/t%d_pred.pgm", i); write_pgm(pred, buf);
        std::snprintf(buf, sizeof(buf), "/tmp/t%d_oracle.pgm", i); write_pgm(cl, buf);
        std::snprintf(buf, sizeof(buf), "/tmp/t%d_err.pgm", i); write_pgm(err, buf);
        // also source case for contrast
        auto [stg, scl] = generate_image_pair(src_spec, 64, 64, (std::uint64_t)(i + 500));
        auto [sym, slv] = translator_forward(params, stg, false, nullptr);
        std::snprintf(buf, sizeof(buf), "/tmp/s%d_in.pgm", i); write_pgm(stg, buf);
        std::snprintf(buf, sizeof(buf), "/tmp/s%d_pred.pgm", i); write_pgm(clip01(sym), buf);
        std::snprintf(buf, sizeof(buf), "/tmp/s%d_oracle.pgm", i); write_pgm(scl, buf);
    }
    std::printf("dumped\n");
    return 0;
}
