#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lesen/tensor.hpp"

namespace lesen {

struct DatasetSpec {
    int image_height = 64;
    int image_width = 64;
    int n_samples = 92;
    double tube_width_min = 2.0;
    double tube_width_max = 5.0;
    double contrast_a = 0.9;
    double contrast_b = 0.9;
    double noise_sigma_a = 0.12;
    double noise_sigma_b = 0.12;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument naming the bad field
};

struct MultiModalSample {
    Tensor modality_a;  // T1w analogue, values in [0,1]
    Tensor modality_b;  // FA analogue, values in [0,1]
    std::optional<Tensor> mask;  // binary, same shape when present
    std::string sample_id;

    void validate() const;
};

struct SplitManifest {
    std::vector<std::string> labeled_ids;
    std::vector<std::string> unlabeled_ids;
    std::vector<std::string> test_ids;
};

// Tube geometry: a random cubic Bezier curve with a per-sample width.
// Exposed so tests can re-rasterize the mask independently of the generator.
struct TubeGeometry {
    double px[4];
    double py[4];
    double width;
};

TubeGeometry sample_tube(const DatasetSpec& spec, int sample_index);
Tensor rasterize_tube(const TubeGeometry& tube, int height, int width);

std::string sample_id_for_index(int index);

// Generates spec.n_samples samples under root/samples/<id>/ plus root/manifest.tsv.
// Pure function of spec (bit-identical output for identical spec).
std::vector<std::string> generate_dataset(const DatasetSpec& spec, const std::string& root);

MultiModalSample load_sample(const std::string& dataset_dir, const std::string& sample_id);

std::vector<std::string> list_dataset_ids(const std::string& dataset_dir);

SplitManifest make_splits(const std::string& dataset_dir, int n_labeled, int n_unlabeled,
                          int n_test, std::uint64_t seed);

void write_split_manifest(const SplitManifest& m, const std::string& path);
SplitManifest read_split_manifest(const std::string& path);

}  // namespace lesen
