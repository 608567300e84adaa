#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gslm/coarse.hpp"
#include "gslm/config.hpp"
#include "gslm/losses.hpp"
#include "gslm/metrics.hpp"
#include "gslm/net.hpp"
#include "gslm/synth.hpp"

namespace gslm {

enum class StageKind { Glm, Slm };

struct StageConfig {
    StageKind kind = StageKind::Glm;
    int epochs = 5;
    int batch_size = 16;
    double base_lr = 1.0;
    double alpha = 0.5;
    double k = 6.0;
    double theta_fg = 0.30;
    double theta_bg = 0.05;
    bool boundary_constraint = true;
    bool seed_reactivation = true;
    bool coarse_generation = true;
    double poly_power = 0.9;
    double weight_decay = 0.001;
    double momentum = 0.9;
    double backbone_lr_scale = 0.1;
    uint64_t seed = 1;
    int threads = 0;
    double divergence_loss_limit = 1e3;
    CrfParams crf;
};

StageConfig stage_config_from(const RunConfig& c, StageKind kind);

struct TrainResult {
    bool diverged = false;
    int steps = 0;
    double first_epoch_mean_cls = 0.0;
    double last_epoch_mean_cls = 0.0;
};

// Supervision for one SLM stage, in train-split manifest order.
struct SupervisionSet {
    std::vector<std::string> ids;
    std::vector<ConfidenceCam> cams;
    uint64_t content_hash = 0;

    double mean_confusion_fraction() const;
};

uint64_t supervision_hash(const SupervisionSet& s);

// Training consumes images and image-level labels only; ground-truth masks
// are never read on these paths.
TrainResult train_glm(TinyCamNet& net, const Dataset& ds, const StageConfig& cfg,
                      int stage_index, const std::filesystem::path& trainlog);
TrainResult train_slm(TinyCamNet& net, const Dataset& ds, const SupervisionSet& supervision,
                      const StageConfig& cfg, int stage_index,
                      const std::filesystem::path& trainlog, uint64_t* consumed_hash = nullptr);

// Forward every training sample through `net`, derive per-class maps
// (global-max normalization for a Glm source, bounded normalization for Slm)
// and turn them into three-valued supervision. With coarse generation
// disabled the maps are thresholded directly into dense binary supervision.
SupervisionSet produce_confidence_cams(const TinyCamNet& net, const Dataset& ds,
                                       CamSource source, const StageConfig& cfg);

struct StageMetricsRow {
    int stage = 0;
    std::string split;
    double miou = 0.0;
    std::vector<double> per_class_iou;
    UnderOver under_over;
    double confusion_fraction = 0.0;  // NaN when the stage emitted no supervision
    Histogram32 histogram;
};

struct RunState {
    std::filesystem::path run_dir;
    int stages_completed = 0;  // trained stages; 1 = baseline only
    bool diverged = false;
    int diverged_stage = -1;
    std::vector<uint64_t> supervision_emitted;
    std::vector<uint64_t> supervision_consumed;
    std::vector<StageMetricsRow> metrics;

    const StageMetricsRow* find(int stage, const std::string& split) const;
    double final_train_miou() const;
};

// Full pipeline: baseline stage trained with image-level labels, then
// cfg.slm_iterations rounds of supervision generation + retraining, each
// initialized from the previous stage's weights. Always dumps per-stage
// parameters, activation maps (both splits) and supervision; when `evaluate`
// is set, also computes metrics.csv / histograms.csv (the only step that
// reads ground-truth masks).
RunState run_gslm(const Dataset& ds, const RunConfig& cfg,
                  const std::filesystem::path& run_dir, bool evaluate = true);

// Recomputes all metric rows from the dumped artifacts. Byte-identical to
// what run_gslm wrote (the in-run evaluation uses this same path).
std::vector<StageMetricsRow> evaluate_run(const std::filesystem::path& run_dir,
                                          const Dataset& ds);
void write_metrics_files(const std::filesystem::path& run_dir,
                         const std::vector<StageMetricsRow>& rows);
std::string metrics_csv_text(const std::vector<StageMetricsRow>& rows);

int stage_count(const std::filesystem::path& run_dir);

struct SweepRow {
    double value = 0.0;
    std::string status;  // OK | DIVERGED
    int stages_completed = 0;
    double final_train_miou = 0.0;
};

// parameter in {theta_fg, theta_bg, k, alpha, iterations}; one run_gslm per
// value under out_dir, shared seed, plus an aggregate sweep.csv.
std::vector<SweepRow> sweep(const std::string& parameter, const std::vector<double>& values,
                            const Dataset& ds, const RunConfig& base,
                            const std::filesystem::path& out_dir);

const std::vector<std::string>& sweep_parameter_names();

}  // namespace gslm
