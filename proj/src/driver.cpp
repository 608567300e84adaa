#include "gslm/driver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gslm/image.hpp"
#include "gslm/parallel.hpp"
#include "gslm/rng.hpp"
#include "gslm/tensor_io.hpp"

namespace gslm {

namespace fs = std::filesystem;

StageConfig stage_config_from(const RunConfig& c, StageKind kind) {
    StageConfig s;
    s.kind = kind;
    s.epochs = c.epochs;
    s.batch_size = c.batch_size;
    s.base_lr = kind == StageKind::Glm ? c.glm_lr : c.slm_lr;
    s.alpha = c.alpha;
    s.k = c.k;
    s.theta_fg = c.theta_fg;
    s.theta_bg = c.theta_bg;
    s.boundary_constraint = c.boundary_constraint;
    s.seed_reactivation = c.seed_reactivation;
    s.coarse_generation = c.coarse_generation;
    s.poly_power = c.poly_power;
    s.weight_decay = c.weight_decay;
    s.momentum = c.momentum;
    s.backbone_lr_scale = c.backbone_lr_scale;
    s.seed = c.seed;
    s.threads = c.threads;
    s.divergence_loss_limit = c.divergence_loss_limit;
    s.crf.iterations = c.crf_iterations;
    s.crf.spatial_weight = c.crf_spatial_weight;
    s.crf.spatial_bandwidth = c.crf_spatial_bandwidth;
    s.crf.bilateral_weight = c.crf_bilateral_weight;
    s.crf.bilateral_bandwidth = c.crf_bilateral_bandwidth;
    s.crf.color_bandwidth = c.crf_color_bandwidth;
    return s;
}

double SupervisionSet::mean_confusion_fraction() const {
    long ignore = 0, total = 0;
    for (const ConfidenceCam& c : cams)
        for (const auto& [cls, map] : c.maps) {
            total += static_cast<long>(map.size());
            for (int8_t v : map) ignore += v == -1;
        }
    return total == 0 ? std::numeric_limits<double>::quiet_NaN()
                      : static_cast<double>(ignore) / static_cast<double>(total);
}

uint64_t supervision_hash(const SupervisionSet& s) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    auto mix = [&h](const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (size_t i = 0; i < s.ids.size(); ++i) {
        mix(s.ids[i].data(), s.ids[i].size());
        for (const auto& [cls, map] : s.cams[i].maps) {
            mix(&cls, sizeof cls);
            mix(map.data(), map.size());
        }
    }
    return h;
}

namespace {

struct ElementResult {
    LossBreakdown bd;
    GradSink sink;
};

ElementResult element_pass(const TinyCamNet& net, const Tensor& image,
                           const std::vector<int>& labels, const Tensor* act_target,
                           const StageConfig& cfg) {
    Tape tape;
    const Tape::Id img = tape.input(image);
    const Tape::Id logits = net.forward(tape, img);
    const Tape::Id pred = tape.sigmoid(tape.global_average_pool(logits));
    const std::vector<double> target(labels.begin(), labels.end());
    const Tape::Id cls = classification_loss(tape, pred, target);
    ElementResult r;
    r.bd.cls = tape.value(cls).item();
    Tape::Id loss = cls;
    if (cfg.kind == StageKind::Slm) {
        const Tape::Id maps = cfg.seed_reactivation
                                  ? tape.scale(tape.relu_k(logits, cfg.k), 1.0 / cfg.k)
                                  : tape.max_norm_cam(logits);
        const std::vector<char> present(labels.begin(), labels.end());
        long px = 0;
        const Tape::Id act = activation_loss(tape, maps, *act_target, present, &px);
        r.bd.act = tape.value(act).item();
        r.bd.supervised_pixels = px;
        loss = total_loss(tape, cls, act, cfg.alpha);
    }
    r.bd.total = tape.value(loss).item();
    tape.backward(loss, r.sink);
    return r;
}

// Supervision downsampled to logit resolution; absent classes stay ignored.
Tensor build_loss_target(const ConfidenceCam& conf, int classes, int h, int w) {
    Tensor t({classes, h, w}, -1.0);
    for (const auto& [cls, map] : conf.maps) {
        for (int y = 0; y < h; ++y) {
            const int sy = nearest_index(y, conf.h, h);
            for (int x = 0; x < w; ++x)
                t.at(cls - 1, y, x) =
                    static_cast<double>(map[static_cast<size_t>(sy) * conf.w + nearest_index(x, conf.w, w)]);
        }
    }
    return t;
}

void append_trainlog(const fs::path& path, int stage, int step, double lr,
                     const LossBreakdown& bd) {
    std::ofstream f(path, std::ios::app);
    f << stage << "," << step << "," << format_double(lr) << "," << format_double(bd.cls) << ","
      << format_double(bd.act) << "," << format_double(bd.total) << "," << bd.supervised_pixels
      << "\n";
}

TrainResult run_training(TinyCamNet& net, const Dataset& ds,
                         const std::vector<Tensor>* act_targets,  // per train-split position
                         const StageConfig& cfg, int stage_index, const fs::path& trainlog) {
    const std::vector<size_t> train_idx = ds.split_indices("train");
    if (train_idx.empty()) throw std::invalid_argument("training: empty train split");
    const int n = static_cast<int>(train_idx.size());
    const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const int max_iterations = cfg.epochs * steps_per_epoch;

    const std::vector<Parameter*> params = net.parameters();
    SgdOptimizer opt(cfg.base_lr, std::max(max_iterations, 1), cfg.poly_power, cfg.weight_decay,
                     cfg.momentum, {{"backbone.", cfg.backbone_lr_scale}});
    Xoshiro256ss shuffle_rng(mix_seed(cfg.seed, 0x5A5A0000ULL + static_cast<uint64_t>(stage_index)));

    TrainResult result;
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    int iteration = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(shuffle_rng.uniform_int(i + 1))]);
        double epoch_cls = 0.0;
        int epoch_batches = 0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, n - start);
            std::vector<ElementResult> results(static_cast<size_t>(b));
            parallel_for(b, cfg.threads, [&](int e) {
                const int pos = order[static_cast<size_t>(start + e)];
                const size_t row = train_idx[static_cast<size_t>(pos)];
                results[static_cast<size_t>(e)] =
                    element_pass(net, ds.images[row], ds.rows[row].labels,
                                 act_targets ? &(*act_targets)[static_cast<size_t>(pos)] : nullptr, cfg);
            });

            for (Parameter* p : params) p->zero_grad();
            LossBreakdown bd;
            for (int e = 0; e < b; ++e) {
                const ElementResult& r = results[static_cast<size_t>(e)];
                for (Parameter* p : params) {
                    auto it = r.sink.find(p);
                    if (it == r.sink.end()) continue;
                    for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += it->second[i];
                }
                bd.cls += r.bd.cls;
                bd.act += r.bd.act;
                bd.total += r.bd.total;
                bd.supervised_pixels += r.bd.supervised_pixels;
            }
            const double inv_b = 1.0 / b;
            for (Parameter* p : params)
                for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= inv_b;
            bd.cls *= inv_b;
            bd.act *= inv_b;
            bd.total *= inv_b;

            if (!std::isfinite(bd.total) || bd.total > cfg.divergence_loss_limit) {
                result.diverged = true;
                append_trainlog(trainlog, stage_index, iteration, 0.0, bd);
                return result;
            }

            const double lr = poly_lr(cfg.base_lr, iteration, std::max(max_iterations, 1), cfg.poly_power);
            opt.step(params, iteration);
            append_trainlog(trainlog, stage_index, iteration, lr, bd);
            ++iteration;
            epoch_cls += bd.cls;
            ++epoch_batches;
        }
        if (epoch_batches > 0) {
            const double mean = epoch_cls / epoch_batches;
            if (epoch == 0) result.first_epoch_mean_cls = mean;
            result.last_epoch_mean_cls = mean;
        }
    }
    result.steps = iteration;
    return result;
}

}  // namespace

TrainResult train_glm(TinyCamNet& net, const Dataset& ds, const StageConfig& cfg,
                      int stage_index, const fs::path& trainlog) {
    if (cfg.kind != StageKind::Glm) throw std::invalid_argument("train_glm: config kind is not Glm");
    return run_training(net, ds, nullptr, cfg, stage_index, trainlog);
}

TrainResult train_slm(TinyCamNet& net, const Dataset& ds, const SupervisionSet& supervision,
                      const StageConfig& cfg, int stage_index, const fs::path& trainlog,
                      uint64_t* consumed_hash) {
    if (cfg.kind != StageKind::Slm) throw std::invalid_argument("train_slm: config kind is not Slm");
    const std::vector<size_t> train_idx = ds.split_indices("train");
    if (supervision.ids.size() != train_idx.size())
        throw std::invalid_argument("train_slm: supervision covers " +
                                    std::to_string(supervision.ids.size()) + " samples, train split has " +
                                    std::to_string(train_idx.size()));
    for (size_t i = 0; i < train_idx.size(); ++i)
        if (supervision.ids[i] != ds.rows[train_idx[i]].id)
            throw std::invalid_argument("train_slm: supervision missing for sample " +
                                        ds.rows[train_idx[i]].id);
    if (consumed_hash) *consumed_hash = supervision_hash(supervision);

    const int s4 = ds.image_size / 4;
    std::vector<Tensor> targets(train_idx.size());
    parallel_for(static_cast<int>(train_idx.size()), cfg.threads, [&](int i) {
        targets[static_cast<size_t>(i)] =
            build_loss_target(supervision.cams[static_cast<size_t>(i)], ds.classes, s4, s4);
    });
    return run_training(net, ds, &targets, cfg, stage_index, trainlog);
}

SupervisionSet produce_confidence_cams(const TinyCamNet& net, const Dataset& ds,
                                       CamSource source, const StageConfig& cfg) {
    const std::vector<size_t> train_idx = ds.split_indices("train");
    SupervisionSet out;
    out.ids.resize(train_idx.size());
    out.cams.resize(train_idx.size());
    parallel_for(static_cast<int>(train_idx.size()), cfg.threads, [&](int i) {
        const size_t row = train_idx[static_cast<size_t>(i)];
        Tape tape;
        const Tape::Id logits = net.forward(tape, tape.input(ds.images[row]));
        const Tensor& lv = tape.value(logits);
        const Cam cam = source == CamSource::Glm ? compute_cam(lv, ds.rows[row].labels)
                                                 : seed_reactivation_cam(lv, ds.rows[row].labels, cfg.k);
        out.ids[static_cast<size_t>(i)] = ds.rows[row].id;
        if (cfg.coarse_generation) {
            out.cams[static_cast<size_t>(i)] =
                coarse_generate(ds.images[row], cam, cfg.theta_fg, cfg.theta_bg, cfg.crf,
                                cfg.boundary_constraint);
        } else {
            // dense binary supervision: no refinement, no ignore band
            ConfidenceCam conf;
            conf.h = ds.image_size;
            conf.w = ds.image_size;
            for (const auto& [cls, map] : cam.maps) {
                Tensor up = nearest_resize(map, conf.h, conf.w);
                std::vector<int8_t> m(up.size());
                for (size_t p = 0; p < up.size(); ++p) m[p] = up[p] >= cfg.theta_fg ? 1 : 0;
                conf.maps.emplace(cls, std::move(m));
            }
            out.cams[static_cast<size_t>(i)] = std::move(conf);
        }
    });
    out.content_hash = supervision_hash(out);
    return out;
}

const StageMetricsRow* RunState::find(int stage, const std::string& split) const {
    for (const auto& r : metrics)
        if (r.stage == stage && r.split == split) return &r;
    return nullptr;
}

double RunState::final_train_miou() const {
    double v = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : metrics)
        if (r.split == "train") v = r.miou;
    return v;
}

namespace {

fs::path stage_dir(const fs::path& run_dir, int stage) {
    return run_dir / ("stage_" + std::to_string(stage));
}

Cam stage_cam_for(const Tensor& logits, const std::vector<int>& labels, int stage,
                  const RunConfig& cfg) {
    if (stage == 0 || !cfg.seed_reactivation) return compute_cam(logits, labels);
    Cam cam = seed_reactivation_cam(logits, labels, cfg.k);
    cam.stage = stage;
    return cam;
}

void dump_stage_cams(const fs::path& run_dir, int stage, const Dataset& ds,
                     const TinyCamNet& net, const RunConfig& cfg) {
    const fs::path dir = stage_dir(run_dir, stage) / "cams";
    fs::create_directories(dir);
    std::vector<Cam> cams(ds.rows.size());
    parallel_for(static_cast<int>(ds.rows.size()), cfg.threads, [&](int i) {
        Tape tape;
        const Tape::Id logits = net.forward(tape, tape.input(ds.images[static_cast<size_t>(i)]));
        cams[static_cast<size_t>(i)] =
            stage_cam_for(tape.value(logits), ds.rows[static_cast<size_t>(i)].labels, stage, cfg);
    });
    int viz_left = 8;
    for (size_t i = 0; i < ds.rows.size(); ++i) {
        const std::string& id = ds.rows[i].id;
        const bool viz = ds.rows[i].split == "train" && viz_left > 0;
        if (viz) --viz_left;
        for (const auto& [cls, map] : cams[i].maps) {
            const std::string base = id + "_c" + std::to_string(cls);
            write_gten(dir / (base + ".gten"), map);
            if (viz) {
                const Tensor up = nearest_resize(map, ds.image_size, ds.image_size);
                write_pgm(dir / (base + ".pgm"), ds.image_size, ds.image_size, map_to_bytes(up));
            }
        }
    }
}

void dump_supervision(const fs::path& run_dir, int emitting_stage, const SupervisionSet& sup) {
    const fs::path dir = stage_dir(run_dir, emitting_stage) / "confidence";
    fs::create_directories(dir);
    int viz_left = 8;
    for (size_t i = 0; i < sup.ids.size(); ++i) {
        const bool viz = viz_left > 0;
        if (viz) --viz_left;
        for (const auto& [cls, map] : sup.cams[i].maps) {
            const std::string base = sup.ids[i] + "_c" + std::to_string(cls);
            write_gten(dir / (base + ".gten"),
                       confidence_to_tensor(map, sup.cams[i].h, sup.cams[i].w));
            if (viz) write_confidence_pgm(dir / (base + ".pgm"), map, sup.cams[i].h, sup.cams[i].w);
        }
    }
}

constexpr const char* kTrainlogHeader = "stage,step,lr,cls_loss,act_loss,total_loss,supervised_pixels\n";

}  // namespace

int stage_count(const fs::path& run_dir) {
    int n = 0;
    while (fs::exists(stage_dir(run_dir, n) / "params")) ++n;
    return n;
}

RunState run_gslm(const Dataset& ds, const RunConfig& cfg, const fs::path& run_dir, bool evaluate) {
    cfg.validate();
    if (ds.image_size % 4 != 0)
        throw std::invalid_argument("run_gslm: image size must be divisible by 4");
    RunState state;
    state.run_dir = run_dir;
    fs::create_directories(run_dir);
    {
        std::ofstream snap(run_dir / "config.txt", std::ios::trunc);
        snap << config_snapshot(cfg);
        if (!snap) throw std::runtime_error("run_gslm: cannot write config snapshot");
    }
    {
        std::ofstream log(run_dir / "trainlog.csv", std::ios::trunc);
        log << kTrainlogHeader;
    }
    const fs::path trainlog = run_dir / "trainlog.csv";

    TinyCamNet net(ds.classes, cfg.seed);
    const StageConfig glm_cfg = stage_config_from(cfg, StageKind::Glm);
    const StageConfig slm_cfg = stage_config_from(cfg, StageKind::Slm);

    std::vector<std::vector<Tensor>> snapshots;
    const TrainResult glm_res = train_glm(net, ds, glm_cfg, 0, trainlog);
    if (glm_res.diverged) {
        state.diverged = true;
        state.diverged_stage = 0;
    } else {
        net.save(stage_dir(run_dir, 0) / "params");
        snapshots.push_back(net.snapshot_values());
        state.stages_completed = 1;
    }

    for (int i = 1; i <= cfg.slm_iterations && !state.diverged; ++i) {
        const CamSource source =
            (i == 1 || !cfg.seed_reactivation) ? CamSource::Glm : CamSource::Slm;
        SupervisionSet sup = produce_confidence_cams(net, ds, source, slm_cfg);
        dump_supervision(run_dir, i - 1, sup);
        state.supervision_emitted.push_back(sup.content_hash);

        uint64_t consumed = 0;
        const TrainResult res = train_slm(net, ds, sup, slm_cfg, i, trainlog, &consumed);
        state.supervision_consumed.push_back(consumed);
        if (res.diverged) {
            state.diverged = true;
            state.diverged_stage = i;
            break;
        }
        net.save(stage_dir(run_dir, i) / "params");
        snapshots.push_back(net.snapshot_values());
        state.stages_completed = i + 1;
    }

    {
        std::ofstream hashes(run_dir / "supervision_hashes.csv", std::ios::trunc);
        hashes << "transition,emitted,consumed\n";
        for (size_t i = 0; i < state.supervision_emitted.size(); ++i) {
            hashes << i << "," << state.supervision_emitted[i] << ",";
            if (i < state.supervision_consumed.size()) hashes << state.supervision_consumed[i];
            hashes << "\n";
        }
    }

    for (int s = 0; s < state.stages_completed; ++s) {
        net.restore_values(snapshots[static_cast<size_t>(s)]);
        dump_stage_cams(run_dir, s, ds, net, cfg);
    }
    if (!snapshots.empty()) net.restore_values(snapshots.back());

    if (evaluate) {
        state.metrics = evaluate_run(run_dir, ds);
        write_metrics_files(run_dir, state.metrics);
    }
    return state;
}

std::vector<StageMetricsRow> evaluate_run(const fs::path& run_dir, const Dataset& ds) {
    const RunConfig cfg = parse_snapshot(run_dir / "config.txt");
    const int stages = stage_count(run_dir);
    std::vector<StageMetricsRow> rows;
    for (int s = 0; s < stages; ++s) {
        const fs::path cam_dir = stage_dir(run_dir, s) / "cams";
        // supervision emitted by this stage, when present
        double conf_fraction = std::numeric_limits<double>::quiet_NaN();
        const fs::path conf_dir = stage_dir(run_dir, s) / "confidence";
        if (fs::exists(conf_dir)) {
            long ignore = 0, total = 0;
            for (const size_t row : ds.split_indices("train")) {
                for (size_t c = 0; c < ds.rows[row].labels.size(); ++c) {
                    if (!ds.rows[row].labels[c]) continue;
                    const fs::path p =
                        conf_dir / (ds.rows[row].id + "_c" + std::to_string(c + 1) + ".gten");
                    const Tensor t = read_gten(p);
                    total += static_cast<long>(t.size());
                    for (size_t i = 0; i < t.size(); ++i) ignore += t[i] == -1.0;
                }
            }
            if (total > 0) conf_fraction = static_cast<double>(ignore) / static_cast<double>(total);
        }

        for (const std::string& split : {std::string("train"), std::string("eval")}) {
            ConfusionCounts counts(ds.classes);
            Histogram32 hist;
            for (const size_t row : ds.split_indices(split)) {
                Cam cam;
                for (size_t c = 0; c < ds.rows[row].labels.size(); ++c) {
                    if (!ds.rows[row].labels[c]) continue;
                    const fs::path p =
                        cam_dir / (ds.rows[row].id + "_c" + std::to_string(c + 1) + ".gten");
                    cam.maps.emplace(static_cast<int>(c) + 1, read_gten(p));
                }
                const std::vector<uint8_t> mask = load_mask(ds.dir, ds.rows[row].id);
                const std::vector<uint8_t> pred =
                    seed_to_mask(cam, cfg.bg_threshold, ds.image_size, ds.image_size);
                counts.add(confusion(pred, mask, ds.classes));
                confidence_histogram(hist, cam, mask, ds.image_size, ds.image_size);
            }
            StageMetricsRow r;
            r.stage = s;
            r.split = split;
            r.miou = miou(counts);
            r.per_class_iou = per_class_iou(counts);
            r.under_over = under_over(counts);
            r.confusion_fraction =
                split == "train" ? conf_fraction : std::numeric_limits<double>::quiet_NaN();
            r.histogram = hist;
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

std::string metrics_csv_text(const std::vector<StageMetricsRow>& rows) {
    std::ostringstream os;
    os << "stage,split,miou";
    const size_t n_iou = rows.empty() ? 0 : rows[0].per_class_iou.size();
    for (size_t c = 0; c < n_iou; ++c) os << ",iou_" << c;
    os << ",m_under,m_over,confusion_fraction\n";
    for (const auto& r : rows) {
        os << r.stage << "," << r.split << "," << format_double(r.miou);
        for (double v : r.per_class_iou) os << "," << format_double(v);
        os << "," << format_double(r.under_over.m_under) << "," << format_double(r.under_over.m_over)
           << "," << format_double(r.confusion_fraction) << "\n";
    }
    return os.str();
}

void write_metrics_files(const fs::path& run_dir, const std::vector<StageMetricsRow>& rows) {
    {
        std::ofstream f(run_dir / "metrics.csv", std::ios::trunc);
        f << metrics_csv_text(rows);
        if (!f) throw std::runtime_error("cannot write metrics.csv");
    }
    std::ofstream h(run_dir / "histograms.csv", std::ios::trunc);
    h << "stage,split,bin_low,fg_count,bg_count\n";
    for (const auto& r : rows)
        for (int b = 0; b < 32; ++b)
            h << r.stage << "," << r.split << "," << format_double(b / 32.0) << ","
              << r.histogram.fg[static_cast<size_t>(b)] << "," << r.histogram.bg[static_cast<size_t>(b)]
              << "\n";
    if (!h) throw std::runtime_error("cannot write histograms.csv");
}

const std::vector<std::string>& sweep_parameter_names() {
    static const std::vector<std::string> names = {"theta_fg", "theta_bg", "k", "alpha",
                                                   "iterations"};
    return names;
}

std::vector<SweepRow> sweep(const std::string& parameter, const std::vector<double>& values,
                            const Dataset& ds, const RunConfig& base, const fs::path& out_dir) {
    const auto& names = sweep_parameter_names();
    if (std::find(names.begin(), names.end(), parameter) == names.end()) {
        std::string msg = "sweep: unknown parameter '" + parameter + "', valid:";
        for (const auto& n : names) msg += " " + n;
        throw std::invalid_argument(msg);
    }
    if (values.empty()) throw std::invalid_argument("sweep: empty value list");

    std::vector<SweepRow> rows;
    fs::create_directories(out_dir);
    for (double v : values) {
        RunConfig cfg = base;
        if (parameter == "theta_fg") cfg.theta_fg = v;
        else if (parameter == "theta_bg") cfg.theta_bg = v;
        else if (parameter == "k") cfg.k = v;
        else if (parameter == "alpha") cfg.alpha = v;
        else cfg.slm_iterations = static_cast<int>(v);

        std::ostringstream name;
        name << parameter << "_" << format_double(v);
        const RunState state = run_gslm(ds, cfg, out_dir / name.str(), true);
        SweepRow row;
        row.value = v;
        row.status = state.diverged ? "DIVERGED" : "OK";
        row.stages_completed = state.stages_completed;
        row.final_train_miou = state.final_train_miou();
        rows.push_back(row);
    }
    std::ofstream f(out_dir / "sweep.csv", std::ios::trunc);
    f << "parameter,value,status,stages_completed,final_train_miou\n";
    for (const auto& r : rows)
        f << parameter << "," << format_double(r.value) << "," << r.status << ","
          << r.stages_completed << "," << format_double(r.final_train_miou) << "\n";
    if (!f) throw std::runtime_error("sweep: cannot write sweep.csv");
    return rows;
}

}  // namespace gslm
