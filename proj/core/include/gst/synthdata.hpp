#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gst/tensor.hpp"

namespace gst {

// Knobs of one synthetic imaging domain. The clean image is a smooth random
// blob field; the tagged companion is the same field under a sinusoidal
// stripe modulation plus optional Gaussian noise. Domain shift = different
// stripe period/angle, contrast gamma, or noise level.
struct DomainSpec {
    double tag_period = 8.0;      // pixels per stripe cycle, >= 2
    double tag_angle = 0.0;       // stripe direction, radians
    double tag_depth = 0.7;       // modulation strength in [0,1]
    double contrast_gamma = 1.0;  // applied to the clean field, > 0
    double noise_sigma = 0.0;     // additive Gaussian noise on the tagged image
    int blob_count = 6;
    std::uint64_t seed = 0;
};

void validate(const DomainSpec& spec);
std::string spec_hash(const DomainSpec& spec, int width, int height);

struct ManifestEntry {
    std::string id;
    std::string tagged_path;
    std::string clean_path;  // empty = none recorded
};

struct DatasetManifest {
    int version = 1;
    std::string role;  // "source" | "target"
    DomainSpec spec;
    int width = 0, height = 0;
    std::vector<ManifestEntry> entries;
    std::string base_dir;  // directory the entry paths are relative to
};

// (tagged, clean) pair, both [1,H,W] in [0,1]. Deterministic in
// (spec, size, id): the per-image stream is derived from spec.seed and id.
std::pair<Tensor, Tensor> generate_image_pair(const DomainSpec& spec, int width, int height,
                                              std::uint64_t id);

struct BuildResult {
    DatasetManifest source;
    DatasetManifest target;
};

// Writes source pairs, target tagged images and the target oracle cleans
// under out_dir (source/, target/), plus one manifest per domain. Target
// cleans are recorded in the manifest for evaluation only; the training
// loaders below never open them.
BuildResult build_datasets(const DomainSpec& source_spec, const DomainSpec& target_spec,
                           int n_source, int n_target, int image_size,
                           const std::string& out_dir);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

struct SourceDataset {
    std::vector<Tensor> x;  // tagged
    std::vector<Tensor> y;  // clean
    std::vector<std::string> ids;
    std::size_t train_count = 0;  // entries [0, train_count) train, rest validate
};

// Loads (tagged, clean) pairs; the trailing val_fraction of the entries is
// the held-out validation split.
SourceDataset load_source_dataset(const DatasetManifest& manifest, double val_fraction = 0.1);

// Tagged target images only -- the adaptation input view.
std::vector<Tensor> load_target_inputs(const DatasetManifest& manifest);

// Target oracle cleans. Evaluation-only by contract.
std::vector<Tensor> load_oracle_cleans(const DatasetManifest& manifest);

}  // namespace gst
