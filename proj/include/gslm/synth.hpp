#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gslm/tensor.hpp"

namespace gslm {

// Recipe for the synthetic multi-label corpus. Every object is a large
// low-contrast body whose appearance is nearly shared across classes (a weak
// per-class tint is the only body-level signal) plus a small high-contrast
// class-specific part. Classifiers key on the part, which keeps activation
// maps confined to a small region of the object and leaves the body to be
// recovered by later training stages. Rendering uses integer raster geometry
// and xoshiro256** only, so corpora are byte-identical across platforms.
struct SceneSpec {
    int image_size = 64;
    int classes = 4;
    uint64_t seed = 1;
    double noise_amplitude = 0.05;  // i.i.d. uniform per channel
    int min_objects = 2;
    int max_objects = 2;

    void validate() const;
};

struct Placement {
    int class_id = 0;  // 1-based
    int x0 = 0, y0 = 0;
};

struct Sample {
    Tensor image;                    // 3xSxS in [0,1]
    std::vector<int> labels;         // length C; labels[c-1] = 1 iff class c present
    std::vector<uint8_t> gt_mask;    // SxS, 0 background, c class id (evaluation only)
    std::vector<uint8_t> part_mask;  // SxS, 1 on discriminating parts
    std::vector<Placement> placements;
};

// Pure function of (spec, index).
Sample render_sample(const SceneSpec& spec, int index);

struct ManifestRow {
    std::string id;
    std::string split;  // "train" | "eval"
    std::vector<int> labels;
};

// Writes images (tensor containers), masks (8-bit PGM with class-index
// values) and manifest.csv (id, split, label bitstring). Fully determined by
// spec.seed. Asserts the corpus invariants on every sample.
std::vector<ManifestRow> generate_dataset(const SceneSpec& spec, int n_train, int n_eval,
                                          const std::filesystem::path& out_dir);

// Training-side view: images and image-level labels only. Ground-truth masks
// are loaded through load_mask and are never touched by training code.
struct Dataset {
    std::filesystem::path dir;
    int image_size = 0;
    int classes = 0;
    std::vector<ManifestRow> rows;
    std::vector<Tensor> images;  // parallel to rows

    std::vector<size_t> split_indices(const std::string& split) const;
};

Dataset load_dataset(const std::filesystem::path& dir);
std::vector<uint8_t> load_mask(const std::filesystem::path& dir, const std::string& id);

std::string sample_id(int index);

}  // namespace gslm
