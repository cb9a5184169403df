#include "gst/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gst/pgm.hpp"
#include "gst/rng.hpp"

namespace fs = std::filesystem;

namespace gst {

namespace {

constexpr std::uint64_t kPairSalt = 0x70616972;  // per-image stream tag

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(std::string("manifest: bad ") + what + " value '" + s + "'");
    }
}

}  // namespace

void validate(const DomainSpec& spec) {
    if (!(spec.tag_period >= 2.0))
        throw Error("domain spec: tag_period must be >= 2 (Nyquist), got " +
                    fmt_double(spec.tag_period));
    if (!(spec.tag_depth >= 0.0 && spec.tag_depth <= 1.0))
        throw Error("domain spec: tag_depth must be in [0,1]");
    if (!(spec.contrast_gamma > 0.0)) throw Error("domain spec: contrast_gamma must be > 0");
    if (!(spec.noise_sigma >= 0.0)) throw Error("domain spec: noise_sigma must be >= 0");
    if (spec.blob_count < 0) throw Error("domain spec: blob_count must be >= 0");
}

std::string spec_hash(const DomainSpec& spec, int width, int height) {
    std::ostringstream os;
    os << fmt_double(spec.tag_period) << '|' << fmt_double(spec.tag_angle) << '|'
       << fmt_double(spec.tag_depth) << '|' << fmt_double(spec.contrast_gamma) << '|'
       << fmt_double(spec.noise_sigma) << '|' << spec.blob_count << '|' << spec.seed << '|'
       << width << 'x' << height;
    const std::string s = os.str();
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::pair<Tensor, Tensor> generate_image_pair(const DomainSpec& spec, int width, int height,
                                              std::uint64_t id) {
    validate(spec);
    if (width <= 0 || height <= 0) throw Error("generate_image_pair: bad image size");
    Rng rng(derive_seed(derive_seed(spec.seed, kPairSalt), id));

    struct Blob {
        double cx, cy, sigma, amp;
    };
    // Compact bumps leave genuinely dark background between them, like bright
    // tissue on a dark field; the min-max normalization below then barely
    // moves the floor.
    std::vector<Blob> blobs(static_cast<std::size_t>(spec.blob_count));
    for (auto& b : blobs) {
        b.cx = rng.uniform(0.0, width);
        b.cy = rng.uniform(0.0, height);
        b.sigma = rng.uniform(width / 14.0, width / 6.0);
        b.amp = rng.uniform(0.5, 1.0);
    }

    Tensor clean({1, height, width});
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) {
            double v = 0.0;
            for (const Blob& b : blobs) {
                const double dx = j - b.cx, dy = i - b.cy;
                v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
            }
            clean.data[static_cast<std::size_t>(i) * width + j] = static_cast<float>(v);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const double span = hi > lo ? hi - lo : 1.0;
    for (auto& v : clean.data) {
        // float storage can land a hair outside [lo,hi]; clip before pow
        double u = (static_cast<double>(v) - lo) / span;
        u = std::min(1.0, std::max(0.0, u));
        v = static_cast<float>(std::pow(u, spec.contrast_gamma));
    }

    // tagged = clean * (1 - depth*(1+cos(phase))/2) + noise, clipped to [0,1]
    Tensor tagged({1, height, width});
    const double cos_a = std::cos(spec.tag_angle), sin_a = std::sin(spec.tag_angle);
    const double k = 2.0 * 3.14159265358979323846 / spec.tag_period;
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) {
            const double phase = k * (j * cos_a + i * sin_a);
            const double mod = 1.0 - spec.tag_depth * (1.0 + std::cos(phase)) / 2.0;
            double v = clean.data[static_cast<std::size_t>(i) * width + j] * mod;
            if (spec.noise_sigma > 0.0) v += rng.normal(0.0, spec.noise_sigma);
            tagged.data[static_cast<std::size_t>(i) * width + j] =
                static_cast<float>(std::min(1.0, std::max(0.0, v)));
        }
    return {std::move(tagged), std::move(clean)};
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("manifest: cannot open '" + path + "' for writing");
    const DomainSpec& s = manifest.spec;
    os << "gst-manifest v" << manifest.version << "\n";
    os << "role " << manifest.role << "\n";
    os << "size " << manifest.width << " " << manifest.height << "\n";
    os << "spec tag_period=" << fmt_double(s.tag_period) << " tag_angle=" << fmt_double(s.tag_angle)
       << " tag_depth=" << fmt_double(s.tag_depth)
       << " contrast_gamma=" << fmt_double(s.contrast_gamma)
       << " noise_sigma=" << fmt_double(s.noise_sigma) << " blob_count=" << s.blob_count
       << " seed=" << s.seed << "\n";
    os << "spec_hash " << spec_hash(s, manifest.width, manifest.height) << "\n";
    for (const auto& e : manifest.entries)
        os << "entry " << e.id << " " << e.tagged_path << " "
           << (e.clean_path.empty() ? "-" : e.clean_path) << "\n";
    if (!os) throw Error("manifest: write to '" + path + "' failed");
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("manifest: cannot open '" + path + "'");
    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();

    std::string line;
    if (!std::getline(is, line) || line.rfind("gst-manifest v", 0) != 0)
        throw Error("manifest: '" + path + "' missing header");
    m.version = std::stoi(line.substr(14));
    if (m.version != 1) throw Error("manifest: unsupported version in '" + path + "'");

    std::string recorded_hash;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "role") {
            ls >> m.role;
            if (m.role != "source" && m.role != "target")
                throw Error("manifest: bad role '" + m.role + "'");
        } else if (tag == "size") {
            ls >> m.width >> m.height;
        } else if (tag == "spec") {
            std::string kv;
            while (ls >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw Error("manifest: bad spec token '" + kv + "'");
                const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
                if (key == "tag_period") m.spec.tag_period = parse_double(val, "tag_period");
                else if (key == "tag_angle") m.spec.tag_angle = parse_double(val, "tag_angle");
                else if (key == "tag_depth") m.spec.tag_depth = parse_double(val, "tag_depth");
                else if (key == "contrast_gamma") m.spec.contrast_gamma = parse_double(val, "contrast_gamma");
                else if (key == "noise_sigma") m.spec.noise_sigma = parse_double(val, "noise_sigma");
                else if (key == "blob_count") m.spec.blob_count = std::stoi(val);
                else if (key == "seed") m.spec.seed = std::stoull(val);
                else throw Error("manifest: unknown spec key '" + key + "'");
            }
        } else if (tag == "spec_hash") {
            ls >> recorded_hash;
        } else if (tag == "entry") {
            ManifestEntry e;
            std::string clean;
            ls >> e.id >> e.tagged_path >> clean;
            if (e.id.empty() || e.tagged_path.empty() || clean.empty())
                throw Error("manifest: malformed entry line '" + line + "'");
            if (clean != "-") e.clean_path = clean;
            m.entries.push_back(std::move(e));
        } else {
            throw Error("manifest: unknown line tag '" + tag + "'");
        }
    }
    if (m.role.empty() || m.width <= 0 || m.height <= 0)
        throw Error("manifest: '" + path + "' missing role or size");
    if (!recorded_hash.empty() && recorded_hash != spec_hash(m.spec, m.width, m.height))
        throw Error("manifest: spec hash mismatch in '" + path + "'");
    return m;
}

namespace {

std::string resolve(const DatasetManifest& m, const std::string& rel) {
    if (rel.empty()) return rel;
    fs::path p(rel);
    if (p.is_absolute() || m.base_dir.empty()) return rel;
    return (fs::path(m.base_dir) / p).string();
}

}  // namespace

BuildResult build_datasets(const DomainSpec& source_spec, const DomainSpec& target_spec,
                           int n_source, int n_target, int image_size,
                           const std::string& out_dir) {
    validate(source_spec);
    validate(target_spec);
    if (n_source < 1 || n_target < 1)
        throw Error("build_datasets: need at least one image per domain");
    if (image_size <= 0) throw Error("build_datasets: bad image size");

    const fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root / "source", ec);
    fs::create_directories(root / "target", ec);
    if (!fs::is_directory(root / "source") || !fs::is_directory(root / "target"))
        throw Error("build_datasets: cannot create output directories under '" + out_dir + "'");

    auto make_id = [](const char* prefix, int i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s_%03d", prefix, i);
        return std::string(buf);
    };

    BuildResult result;
    result.source.role = "source";
    result.source.spec = source_spec;
    result.source.width = result.source.height = image_size;
    result.source.base_dir = root.string();
    for (int i = 0; i < n_source; ++i) {
        const std::string id = make_id("src", i);
        auto [tagged, clean] =
            generate_image_pair(source_spec, image_size, image_size, static_cast<std::uint64_t>(i));
        ManifestEntry e;
        e.id = id;
        e.tagged_path = "source/" + id + ".pgm";
        e.clean_path = "source/" + id + "_clean.pgm";
        write_pgm(tagged, (root / e.tagged_path).string());
        write_pgm(clean, (root / e.clean_path).string());
        result.source.entries.push_back(std::move(e));
    }

    result.target.role = "target";
    result.target.spec = target_spec;
    result.target.width = result.target.height = image_size;
    result.target.base_dir = root.string();
    for (int i = 0; i < n_target; ++i) {
        const std::string id = make_id("tgt", i);
        auto [tagged, clean] =
            generate_image_pair(target_spec, image_size, image_size, static_cast<std::uint64_t>(i));
        ManifestEntry e;
        e.id = id;
        e.tagged_path = "target/" + id + ".pgm";
        e.clean_path = "target/" + id + "_clean.pgm";  // oracle-only
        write_pgm(tagged, (root / e.tagged_path).string());
        write_pgm(clean, (root / e.clean_path).string());
        result.target.entries.push_back(std::move(e));
    }

    write_manifest(result.source, (root / "source_manifest.txt").string());
    write_manifest(result.target, (root / "target_manifest.txt").string());
    return result;
}

SourceDataset load_source_dataset(const DatasetManifest& manifest, double val_fraction) {
    if (manifest.role != "source")
        throw Error("load_source_dataset: manifest role is '" + manifest.role + "'");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw Error("load_source_dataset: val_fraction must be in [0,1)");
    SourceDataset ds;
    for (const auto& e : manifest.entries) {
        if (e.clean_path.empty())
            throw Error("load_source_dataset: source entry '" + e.id + "' has no clean image");
        ds.x.push_back(read_pgm(resolve(manifest, e.tagged_path)));
        ds.y.push_back(read_pgm(resolve(manifest, e.clean_path)));
        ds.ids.push_back(e.id);
    }
    const std::size_t n = ds.x.size();
    std::size_t val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
    if (val >= n) val = n - 1;
    ds.train_count = n - val;
    return ds;
}

std::vector<Tensor> load_target_inputs(const DatasetManifest& manifest) {
    if (manifest.role != "target")
        throw Error("load_target_inputs: manifest role is '" + manifest.role + "'");
    std::vector<Tensor> xs;
    for (const auto& e : manifest.entries) xs.push_back(read_pgm(resolve(manifest, e.tagged_path)));
    return xs;
}

std::vector<Tensor> load_oracle_cleans(const DatasetManifest& manifest) {
    std::vector<Tensor> ys;
    for (const auto& e : manifest.entries) {
        if (e.clean_path.empty())
            throw Error("load_oracle_cleans: entry '" + e.id + "' has no clean image recorded");
        ys.push_back(read_pgm(resolve(manifest, e.clean_path)));
    }
    return ys;
}

}  // namespace gst
