#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gslm/cam.hpp"

namespace gslm {

// Per-class pixel counts; index 0 is background, 1..C are object classes.
struct ConfusionCounts {
    explicit ConfusionCounts(int classes)
        : classes(classes), tp(static_cast<size_t>(classes) + 1, 0),
          fp(static_cast<size_t>(classes) + 1, 0), fn(static_cast<size_t>(classes) + 1, 0) {}
    int classes;
    std::vector<long> tp, fp, fn;

    void add(const ConfusionCounts& o);
};

// argmax over present classes of the nearest-upsampled maps; background where
// the best value falls below bg_threshold. Ties go to the smallest class id.
std::vector<uint8_t> seed_to_mask(const Cam& cam, double bg_threshold, int out_h, int out_w);

ConfusionCounts confusion(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gt,
                          int classes);

// Mean IoU over background + object classes; classes absent from both pred
// and gt (empty union) are excluded from the mean. Rejects the all-empty case.
double miou(const ConfusionCounts& c);
std::vector<double> per_class_iou(const ConfusionCounts& c);  // NaN for empty-union classes

// Mean FN/TP and FP/TP over foreground classes. A foreground class with
// TP = 0 but pixels in play cannot be scored (division by zero); it is
// excluded from the mean and flagged.
struct UnderOver {
    double m_under = 0.0;
    double m_over = 0.0;
    bool tp_zero_warning = false;
    int scored_classes = 0;
};
UnderOver under_over(const ConfusionCounts& c);

// 32-bin histograms of activation values over [0,1], split by whether the
// ground truth assigns the pixel to the map's class (fg) or not (bg).
struct Histogram32 {
    std::array<long, 32> fg{};
    std::array<long, 32> bg{};
    void add(const Histogram32& o);
    long fg_total() const;
    long bg_total() const;
    double fg_mass_above(double threshold) const;  // fraction of fg pixels in bins >= threshold
};
void confidence_histogram(Histogram32& acc, const Cam& cam, const std::vector<uint8_t>& gt_mask,
                          int h, int w);

struct MetricsReport {
    double miou = 0.0;
    std::vector<double> per_class_iou;
    UnderOver under_over;
    double confusion_fraction = 0.0;
    Histogram32 histogram;
};

}  // namespace gslm
