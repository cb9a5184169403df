#include "gst/pgm.hpp"

#include <cmath>
#include <fstream>
#include <utility>

namespace gst {

namespace {
std::function<void(const std::string&)>& read_hook() {
    static std::function<void(const std::string&)> hook;
    return hook;
}
}  // namespace

void set_pgm_read_hook(std::function<void(const std::string&)> hook) {
    read_hook() = std::move(hook);
}

void write_pgm(const Tensor& image, const std::string& path) {
    if (image.shape.size() != 3 || image.shape[0] != 1)
        throw Error("pgm: expected [1,H,W] image, got " + shape_str(image.shape));
    const int h = image.shape[1], w = image.shape[2];
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("pgm: cannot open '" + path + "' for writing");
    os << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            float v = image.data[static_cast<std::size_t>(i) * w + j];
            v = std::min(1.0f, std::max(0.0f, v));
            row[static_cast<std::size_t>(j)] =
                static_cast<unsigned char>(std::lround(v * 255.0f));
        }
        os.write(reinterpret_cast<const char*>(row.data()), w);
    }
    if (!os) throw Error("pgm: write to '" + path + "' failed");
}

Tensor read_pgm(const std::string& path) {
    if (read_hook()) read_hook()(path);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("pgm: cannot open '" + path + "'");
    std::string magic;
    is >> magic;
    if (magic != "P5") throw Error("pgm: '" + path + "' is not binary PGM (P5)");

    auto next_token = [&is, &path]() {
        std::string tok;
        for (;;) {
            if (!(is >> tok)) throw Error("pgm: truncated header in '" + path + "'");
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is, rest);
                continue;
            }
            return tok;
        }
    };

    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0) throw Error("pgm: bad extents in '" + path + "'");
    if (maxval != 255) throw Error("pgm: only maxval 255 supported, '" + path + "' has " +
                                   std::to_string(maxval));
    is.get();  // single whitespace after maxval

    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw Error("pgm: truncated pixel data in '" + path + "'");

    Tensor image({1, h, w});
    for (std::size_t i = 0; i < raw.size(); ++i)
        image.data[i] = static_cast<float>(raw[i]) / 255.0f;
    return image;
}

}  // namespace gst
