#include "gst/translator.hpp"

#include <cstring>
#include <fstream>

namespace gst {

void validate(const ModelConfig& config) {
    if (config.input_h <= 0 || config.input_w <= 0 || config.input_h % 8 != 0 ||
        config.input_w % 8 != 0)
        throw Error("model config: input extents must be positive multiples of 8, got " +
                    std::to_string(config.input_h) + "x" + std::to_string(config.input_w));
    if (config.base_channels < 1) throw Error("model config: base_channels must be >= 1");
    if (!(config.dropout_rate >= 0.0f && config.dropout_rate < 1.0f))
        throw Error("model config: dropout_rate must be in [0,1)");
    if (!(config.logvar_min >= -10.0f && config.logvar_min < config.logvar_max &&
          config.logvar_max <= 10.0f))
        throw Error("model config: need -10 <= logvar_min < logvar_max <= 10");
}

std::vector<ConvSpec> layer_specs(const ModelConfig& config) {
    const int c = config.base_channels;
    return {
        {"enc1", 1, c, 4, 2, 1},
        {"enc2", c, 2 * c, 4, 2, 1},
        {"enc3", 2 * c, 4 * c, 4, 2, 1},
        {"bottleneck", 4 * c, 4 * c, 3, 1, 1},
        {"dec1", 4 * c + 2 * c, 2 * c, 3, 1, 1},
        {"dec2", 2 * c + c, c, 3, 1, 1},
        {"dec3", c + 1, c, 3, 1, 1},
        {"mean_head", c, 1, 1, 1, 0},
        {"logvar_head", c, 1, 1, 1, 0},
    };
}

namespace {

constexpr char kMagic[8] = {'G', 'S', 'T', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const TranslatorParams& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, 1);  // format version
    put<std::int32_t>(os, params.config.input_h);
    put<std::int32_t>(os, params.config.input_w);
    put<std::int32_t>(os, params.config.base_channels);
    put<float>(os, params.config.dropout_rate);
    put<float>(os, params.config.logvar_min);
    put<float>(os, params.config.logvar_max);
    put<std::uint64_t>(os, params.config.seed);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& [name, t] : params.tensors) {
        put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint8_t>(os, static_cast<std::uint8_t>(t.shape.size()));
        for (int d : t.shape) put<std::int32_t>(os, d);
        put<std::uint64_t>(os, static_cast<std::uint64_t>(t.data.size()));
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!os) throw Error("checkpoint: write to '" + path + "' failed");
}

TranslatorParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("checkpoint: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw Error("checkpoint: '" + path + "' is not a checkpoint file");
    const auto version = get<std::uint32_t>(is);
    if (version != 1) throw Error("checkpoint: unsupported version " + std::to_string(version));

    TranslatorParams params;
    params.config.input_h = get<std::int32_t>(is);
    params.config.input_w = get<std::int32_t>(is);
    params.config.base_channels = get<std::int32_t>(is);
    params.config.dropout_rate = get<float>(is);
    params.config.logvar_min = get<float>(is);
    params.config.logvar_max = get<float>(is);
    params.config.seed = get<std::uint64_t>(is);
    const auto count = get<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = get<std::uint16_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto ndim = get<std::uint8_t>(is);
        Shape shape(ndim);
        for (auto& d : shape) d = get<std::int32_t>(is);
        const auto n = get<std::uint64_t>(is);
        if (n != static_cast<std::uint64_t>(numel(shape)))
            throw Error("checkpoint: tensor '" + name + "' size mismatch");
        std::vector<float> data(n);
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!is) throw Error("checkpoint: truncated tensor '" + name + "'");
        params.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return params;
}

}  // namespace gst
