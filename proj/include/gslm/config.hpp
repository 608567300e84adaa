#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace gslm {

// Flat key-value run configuration. Precedence: CLI override > config file >
// defaults. Unknown keys are rejected, and the resolved snapshot is written
// into the run directory before any work starts.
struct RunConfig {
    uint64_t seed = 1;
    int threads = 0;  // 0 = hardware concurrency
    std::string data_dir;
    std::string out_dir;

    // corpus
    int image_size = 64;
    int classes = 4;
    int n_train = 500;
    int n_eval = 100;
    double noise_amplitude = 0.05;

    // optimization
    double glm_lr = 1.0;
    double slm_lr = 0.01;
    int batch_size = 16;
    int epochs = 5;
    double poly_power = 0.9;
    double weight_decay = 0.001;
    double momentum = 0.9;
    double backbone_lr_scale = 0.1;

    // mechanism
    double alpha = 0.5;
    double k = 6.0;
    double theta_fg = 0.30;
    double theta_bg = 0.05;
    int slm_iterations = 3;
    bool boundary_constraint = true;
    bool seed_reactivation = true;
    bool coarse_generation = true;

    // dense CRF
    int crf_iterations = 10;
    double crf_spatial_weight = 3.0;
    double crf_spatial_bandwidth = 3.0;
    double crf_bilateral_weight = 10.0;
    double crf_bilateral_bandwidth = 0.0;  // 0 = auto (scales with image size)
    double crf_color_bandwidth = 0.1;

    // evaluation / guards
    double bg_threshold = 0.15;
    double divergence_loss_limit = 1e3;

    void validate() const;
};

// Ordered key->string view of a config (also the snapshot format, one
// "key=value" per line; doubles use max round-trip precision).
std::map<std::string, std::string> config_to_map(const RunConfig& c);
void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value);
RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base);
std::string config_snapshot(const RunConfig& c);
RunConfig parse_snapshot(const std::filesystem::path& path);

std::string format_double(double v);  // %.17g with literal "nan"

}  // namespace gslm
