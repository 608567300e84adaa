#include "gslm/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gslm/image.hpp"

namespace gslm {

void ConfusionCounts::add(const ConfusionCounts& o) {
    if (o.classes != classes) throw std::invalid_argument("ConfusionCounts: class count mismatch");
    for (size_t c = 0; c < tp.size(); ++c) {
        tp[c] += o.tp[c];
        fp[c] += o.fp[c];
        fn[c] += o.fn[c];
    }
}

std::vector<uint8_t> seed_to_mask(const Cam& cam, double bg_threshold, int out_h, int out_w) {
    if (!(bg_threshold > 0.0 && bg_threshold < 1.0))
        throw std::invalid_argument("seed_to_mask: threshold must be in (0,1)");
    std::vector<uint8_t> mask(static_cast<size_t>(out_h) * out_w, 0);
    std::vector<double> best(mask.size(), 0.0);
    for (const auto& [cls, map] : cam.maps) {
        const int sh = map.extent(0), sw = map.extent(1);
        for (int y = 0; y < out_h; ++y) {
            const int sy = nearest_index(y, sh, out_h);
            for (int x = 0; x < out_w; ++x) {
                const double v = map.at(sy, nearest_index(x, sw, out_w));
                const size_t i = static_cast<size_t>(y) * out_w + x;
                if (v > best[i]) {  // ties keep the smaller class id (map order)
                    best[i] = v;
                    mask[i] = static_cast<uint8_t>(cls);
                }
            }
        }
    }
    for (size_t i = 0; i < mask.size(); ++i)
        if (best[i] < bg_threshold) mask[i] = 0;
    return mask;
}

ConfusionCounts confusion(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gt,
                          int classes) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("confusion: size mismatch " + std::to_string(pred.size()) +
                                    " vs " + std::to_string(gt.size()));
    ConfusionCounts c(classes);
    for (size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i], g = gt[i];
        if (p > classes || g > classes)
            throw std::invalid_argument("confusion: label exceeds class count " + std::to_string(classes));
        if (p == g) {
            ++c.tp[static_cast<size_t>(p)];
        } else {
            ++c.fp[static_cast<size_t>(p)];
            ++c.fn[static_cast<size_t>(g)];
        }
    }
    return c;
}

std::vector<double> per_class_iou(const ConfusionCounts& c) {
    std::vector<double> out(static_cast<size_t>(c.classes) + 1,
                            std::numeric_limits<double>::quiet_NaN());
    for (size_t k = 0; k < out.size(); ++k) {
        const long u = c.tp[k] + c.fp[k] + c.fn[k];
        if (u > 0) out[k] = static_cast<double>(c.tp[k]) / static_cast<double>(u);
    }
    return out;
}

double miou(const ConfusionCounts& c) {
    const std::vector<double> ious = per_class_iou(c);
    double acc = 0.0;
    int n = 0;
    for (double v : ious)
        if (!std::isnan(v)) {
            acc += v;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("miou: every class has an empty union");
    return acc / n;
}

UnderOver under_over(const ConfusionCounts& c) {
    UnderOver uo;
    double su = 0.0, so = 0.0;
    for (int k = 1; k <= c.classes; ++k) {
        const size_t i = static_cast<size_t>(k);
        if (c.tp[i] > 0) {
            su += static_cast<double>(c.fn[i]) / static_cast<double>(c.tp[i]);
            so += static_cast<double>(c.fp[i]) / static_cast<double>(c.tp[i]);
            ++uo.scored_classes;
        } else if (c.fn[i] > 0 || c.fp[i] > 0) {
            uo.tp_zero_warning = true;  // unbounded ratio, excluded from the mean
        }
    }
    if (uo.scored_classes == 0) {
        uo.m_under = std::numeric_limits<double>::quiet_NaN();
        uo.m_over = std::numeric_limits<double>::quiet_NaN();
        uo.tp_zero_warning = true;
    } else {
        uo.m_under = su / uo.scored_classes;
        uo.m_over = so / uo.scored_classes;
    }
    return uo;
}

void Histogram32::add(const Histogram32& o) {
    for (size_t i = 0; i < fg.size(); ++i) {
        fg[i] += o.fg[i];
        bg[i] += o.bg[i];
    }
}

long Histogram32::fg_total() const {
    long t = 0;
    for (long v : fg) t += v;
    return t;
}

long Histogram32::bg_total() const {
    long t = 0;
    for (long v : bg) t += v;
    return t;
}

double Histogram32::fg_mass_above(double threshold) const {
    const long total = fg_total();
    if (total == 0) return 0.0;
    long acc = 0;
    for (size_t i = 0; i < fg.size(); ++i)
        if (static_cast<double>(i) / 32.0 >= threshold) acc += fg[i];
    return static_cast<double>(acc) / static_cast<double>(total);
}

void confidence_histogram(Histogram32& acc, const Cam& cam, const std::vector<uint8_t>& gt_mask,
                          int h, int w) {
    if (gt_mask.size() != static_cast<size_t>(h) * w)
        throw std::invalid_argument("confidence_histogram: mask size mismatch");
    for (const auto& [cls, map] : cam.maps) {
        const int sh = map.extent(0), sw = map.extent(1);
        for (int y = 0; y < h; ++y) {
            const int sy = nearest_index(y, sh, h);
            for (int x = 0; x < w; ++x) {
                const double v = map.at(sy, nearest_index(x, sw, w));
                int bin = static_cast<int>(v * 32.0);
                if (bin > 31) bin = 31;
                if (bin < 0) bin = 0;
                const bool is_fg = gt_mask[static_cast<size_t>(y) * w + x] == cls;
                if (is_fg)
                    ++acc.fg[static_cast<size_t>(bin)];
                else
                    ++acc.bg[static_cast<size_t>(bin)];
            }
        }
    }
}

}  // namespace gslm
