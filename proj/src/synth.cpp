#include "gslm/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "gslm/image.hpp"
#include "gslm/rng.hpp"
#include "gslm/tensor_io.hpp"

namespace gslm {

namespace {

struct Rgb {
    double r, g, b;
};

constexpr Rgb kBackground = {0.15, 0.18, 0.22};
constexpr Rgb kBodyBase = {0.46, 0.46, 0.46};
constexpr double kBodyChecker = 0.03;
// The body's class tint fades with distance from the part: responses form a
// continuum instead of a single level, so staged retraining keeps finding
// newly-exposed body regions round after round.
constexpr double kBodyTintNear = 0.16;
constexpr double kBodyTintFar = 0.03;
constexpr int kPartSize = 13;

// Saturated core colors; the discriminating part is loud, the body is the
// same hue at a tenth of the strength on gray.
Rgb class_color(int class_id) {
    switch ((class_id - 1) % 4) {
        case 0: return {0.85, 0.15, 0.15};
        case 1: return {0.15, 0.75, 0.20};
        case 2: return {0.20, 0.30, 0.90};
        default: return {0.85, 0.80, 0.15};
    }
}

Rgb body_color(int class_id, int px, int py, double toward_part) {
    const Rgb c = class_color(class_id);
    const double chk = ((px / 4) + (py / 4)) % 2 == 0 ? kBodyChecker : -kBodyChecker;
    const double t = kBodyTintFar + (kBodyTintNear - kBodyTintFar) * toward_part;
    return {kBodyBase.r + t * (c.r - kBodyBase.r) + chk,
            kBodyBase.g + t * (c.g - kBodyBase.g) + chk,
            kBodyBase.b + t * (c.b - kBodyBase.b) + chk};
}

Rgb part_color(int class_id, int x, int y) {
    const Rgb c = class_color(class_id);
    const double chk = ((x / 2) + (y / 2)) % 2 == 0 ? 0.06 : -0.06;
    return {std::clamp(c.r + chk, 0.0, 1.0), std::clamp(c.g + chk, 0.0, 1.0),
            std::clamp(c.b + chk, 0.0, 1.0)};
}

struct ObjectGeom {
    int class_id;
    int x0, y0;          // object bounding box top-left
    int body_w, body_h;  // body rect; part sits to its right, vertically centered
    int part_dy;

    int bbox_w() const { return body_w + kPartSize; }
    int bbox_h() const { return body_h; }
    bool overlaps(const ObjectGeom& o) const {
        // 1px separation gap
        return !(x0 + bbox_w() + 1 <= o.x0 || o.x0 + o.bbox_w() + 1 <= x0 ||
                 y0 + bbox_h() + 1 <= o.y0 || o.y0 + o.bbox_h() + 1 <= y0);
    }
};

}  // namespace

void SceneSpec::validate() const {
    if (classes < 1) throw std::invalid_argument("SceneSpec: need at least one class");
    if (image_size < 48) throw std::invalid_argument("SceneSpec: image size must be >= 48");
    if (image_size % 4 != 0) throw std::invalid_argument("SceneSpec: image size must be divisible by 4");
    if (min_objects < 1 || max_objects < min_objects || max_objects > classes)
        throw std::invalid_argument("SceneSpec: bad object count range");
    if (noise_amplitude < 0.0 || noise_amplitude > 0.2)
        throw std::invalid_argument("SceneSpec: noise amplitude out of range");
}

Sample render_sample(const SceneSpec& spec, int index) {
    spec.validate();
    if (index < 0) throw std::invalid_argument("render_sample: negative index");
    const int s = spec.image_size;
    Xoshiro256ss rng(mix_seed(spec.seed, static_cast<uint64_t>(index)));

    const Rgb bg = kBackground;

    const int n_obj = spec.min_objects + rng.uniform_int(spec.max_objects - spec.min_objects + 1);
    std::vector<int> class_pool(static_cast<size_t>(spec.classes));
    for (int c = 0; c < spec.classes; ++c) class_pool[static_cast<size_t>(c)] = c + 1;
    for (int i = spec.classes - 1; i > 0; --i)
        std::swap(class_pool[static_cast<size_t>(i)], class_pool[static_cast<size_t>(rng.uniform_int(i + 1))]);

    std::vector<ObjectGeom> objects;
    for (int k = 0; k < n_obj; ++k) {
        ObjectGeom g;
        g.class_id = class_pool[static_cast<size_t>(k)];
        g.body_w = 35 + rng.uniform_int(3);   // 35..37
        g.body_h = 20;
        g.part_dy = (g.body_h - kPartSize) / 2 + rng.uniform_int(3) - 1;
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            g.x0 = 1 + rng.uniform_int(s - g.bbox_w() - 2);
            g.y0 = 1 + rng.uniform_int(s - g.bbox_h() - 2);
            placed = std::none_of(objects.begin(), objects.end(),
                                  [&](const ObjectGeom& o) { return g.overlaps(o); });
        }
        if (placed) objects.push_back(g);
    }
    if (objects.empty())
        throw std::logic_error("render_sample: failed to place any object");

    Sample sample;
    sample.image = Tensor({3, s, s});
    sample.labels.assign(static_cast<size_t>(spec.classes), 0);
    sample.gt_mask.assign(static_cast<size_t>(s) * s, 0);
    sample.part_mask.assign(static_cast<size_t>(s) * s, 0);

    auto put = [&](int x, int y, const Rgb& c) {
        const size_t i = static_cast<size_t>(y) * s + x;
        sample.image[i] = c.r;
        sample.image[static_cast<size_t>(s) * s + i] = c.g;
        sample.image[2 * static_cast<size_t>(s) * s + i] = c.b;
    };

    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) put(x, y, bg);

    for (const ObjectGeom& g : objects) {
        sample.labels[static_cast<size_t>(g.class_id) - 1] = 1;
        sample.placements.push_back({g.class_id, g.x0, g.y0});
        for (int y = 0; y < g.body_h; ++y)
            for (int x = 0; x < g.body_w; ++x) {
                const int px = g.x0 + x, py = g.y0 + y;
                const double toward_part = g.body_w > 1 ? static_cast<double>(x) / (g.body_w - 1) : 1.0;
                put(px, py, body_color(g.class_id, px, py, toward_part));
                sample.gt_mask[static_cast<size_t>(py) * s + px] = static_cast<uint8_t>(g.class_id);
            }
        const int px0 = g.x0 + g.body_w, py0 = g.y0 + g.part_dy;
        for (int y = 0; y < kPartSize; ++y)
            for (int x = 0; x < kPartSize; ++x) {
                const int px = px0 + x, py = py0 + y;
                put(px, py, part_color(g.class_id, x, y));
                sample.gt_mask[static_cast<size_t>(py) * s + px] = static_cast<uint8_t>(g.class_id);
                sample.part_mask[static_cast<size_t>(py) * s + px] = 1;
            }
    }

    // Additive uniform noise, fixed raster order.
    const double amp = spec.noise_amplitude;
    for (size_t i = 0; i < sample.image.size(); ++i) {
        const double v = sample.image[i] + (rng.uniform() * 2.0 - 1.0) * amp;
        sample.image[i] = std::min(std::max(v, 0.0), 1.0);
    }
    return sample;
}

std::string sample_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%06d", index);
    return buf;
}

namespace {

void check_sample(const SceneSpec& spec, const Sample& sample) {
    const int s = spec.image_size;
    std::vector<long> object_px(static_cast<size_t>(spec.classes) + 1, 0);
    std::vector<long> part_px(static_cast<size_t>(spec.classes) + 1, 0);
    for (size_t i = 0; i < sample.gt_mask.size(); ++i) {
        const int c = sample.gt_mask[i];
        if (c > spec.classes) throw std::logic_error("corpus: mask value out of range");
        ++object_px[static_cast<size_t>(c)];
        if (sample.part_mask[i]) ++part_px[static_cast<size_t>(c)];
    }
    bool any = false;
    for (int c = 1; c <= spec.classes; ++c) {
        const long obj = object_px[static_cast<size_t>(c)];
        const long part = part_px[static_cast<size_t>(c)];
        const int lbl = sample.labels[static_cast<size_t>(c) - 1];
        if ((obj > 0) != (lbl == 1)) throw std::logic_error("corpus: labels disagree with mask");
        if (obj > 0) {
            any = true;
            if (obj - part < 4 * part) throw std::logic_error("corpus: body/part area ratio below 4");
        }
    }
    if (!any) throw std::logic_error("corpus: sample without objects");
    (void)s;
}

}  // namespace

std::vector<ManifestRow> generate_dataset(const SceneSpec& spec, int n_train, int n_eval,
                                          const std::filesystem::path& out_dir) {
    spec.validate();
    if (n_train < 1 || n_eval < 1)
        throw std::invalid_argument("generate_dataset: need n_train, n_eval >= 1");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "masks");

    std::vector<ManifestRow> rows;
    std::ofstream manifest(out_dir / "manifest.csv", std::ios::trunc);
    if (!manifest) throw std::runtime_error("generate_dataset: cannot write manifest in " + out_dir.string());
    manifest << "id,split,labels\n";
    for (int i = 0; i < n_train + n_eval; ++i) {
        const Sample sample = render_sample(spec, i);
        check_sample(spec, sample);
        ManifestRow row;
        row.id = sample_id(i);
        row.split = i < n_train ? "train" : "eval";
        row.labels = sample.labels;
        write_gten(out_dir / "images" / (row.id + ".gten"), sample.image);
        write_pgm(out_dir / "masks" / (row.id + ".pgm"), spec.image_size, spec.image_size,
                  sample.gt_mask);
        manifest << row.id << "," << row.split << ",";
        for (int v : row.labels) manifest << (v ? '1' : '0');
        manifest << "\n";
        rows.push_back(std::move(row));
    }
    manifest.flush();
    if (!manifest) throw std::runtime_error("generate_dataset: manifest write failed");
    return rows;
}

std::vector<size_t> Dataset::split_indices(const std::string& split) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < rows.size(); ++i)
        if (rows[i].split == split) out.push_back(i);
    return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "manifest.csv");
    if (!manifest) throw std::runtime_error("load_dataset: missing manifest.csv in " + dir.string());
    Dataset ds;
    ds.dir = dir;
    std::string line;
    std::getline(manifest, line);  // header
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::runtime_error("load_dataset: malformed manifest row: " + line);
        ManifestRow row;
        row.id = line.substr(0, c1);
        row.split = line.substr(c1 + 1, c2 - c1 - 1);
        for (char ch : line.substr(c2 + 1)) {
            if (ch == '\r') continue;
            if (ch != '0' && ch != '1')
                throw std::runtime_error("load_dataset: bad label bitstring in row: " + line);
            row.labels.push_back(ch == '1');
        }
        ds.rows.push_back(std::move(row));
    }
    if (ds.rows.empty()) throw std::runtime_error("load_dataset: empty manifest");
    ds.classes = static_cast<int>(ds.rows[0].labels.size());
    ds.images.reserve(ds.rows.size());
    for (const auto& row : ds.rows) {
        Tensor img = read_gten(dir / "images" / (row.id + ".gten"));
        if (img.rank() != 3 || img.extent(0) != 3)
            throw std::runtime_error("load_dataset: image " + row.id + " is not 3xHxW");
        ds.images.push_back(std::move(img));
    }
    ds.image_size = ds.images[0].extent(1);
    return ds;
}

std::vector<uint8_t> load_mask(const std::filesystem::path& dir, const std::string& id) {
    Pgm pgm = read_pgm(dir / "masks" / (id + ".pgm"));
    return pgm.pixels;
}

}  // namespace gslm
