#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "gslm/synth.hpp"

using namespace gslm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("gslm_synth_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("rendering is a pure function of spec and index") {
    const SceneSpec spec;
    const Sample a = render_sample(spec, 17);
    const Sample b = render_sample(spec, 17);
    CHECK(a.gt_mask == b.gt_mask);
    for (size_t i = 0; i < a.image.size(); ++i) CHECK(a.image[i] == b.image[i]);
    CHECK_THROWS_AS(render_sample(spec, -1), std::invalid_argument);
}

TEST_CASE("every sample has at least one object and valid mask values") {
    const SceneSpec spec;
    for (int i = 0; i < 50; ++i) {
        const Sample s = render_sample(spec, i);
        int present = 0;
        for (int v : s.labels) present += v;
        CHECK(present >= 1);
        for (uint8_t v : s.gt_mask) CHECK(v <= spec.classes);
        for (size_t p = 0; p < s.image.size(); ++p) {
            CHECK(s.image[p] >= 0.0);
            CHECK(s.image[p] <= 1.0);
        }
    }
}

TEST_CASE("labels always match the mask and bodies dominate parts") {
    const SceneSpec spec;
    for (int i = 0; i < 50; ++i) {
        const Sample s = render_sample(spec, i);
        std::vector<long> obj(static_cast<size_t>(spec.classes) + 1, 0);
        std::vector<long> part(static_cast<size_t>(spec.classes) + 1, 0);
        for (size_t p = 0; p < s.gt_mask.size(); ++p) {
            ++obj[s.gt_mask[p]];
            if (s.part_mask[p]) ++part[s.gt_mask[p]];
        }
        for (int c = 1; c <= spec.classes; ++c) {
            CHECK((obj[static_cast<size_t>(c)] > 0) == (s.labels[static_cast<size_t>(c) - 1] == 1));
            if (obj[static_cast<size_t>(c)] > 0) {
                CHECK(part[static_cast<size_t>(c)] > 0);
                CHECK(obj[static_cast<size_t>(c)] - part[static_cast<size_t>(c)] >=
                      4 * part[static_cast<size_t>(c)]);
            }
        }
    }
}

TEST_CASE("distinct indices give distinct placements") {
    const SceneSpec spec;
    std::vector<std::vector<Placement>> placements;
    for (int i = 0; i < 200; ++i) placements.push_back(render_sample(spec, i).placements);
    int collisions = 0;
    int pairs = 0;
    for (int a = 0; a < 200 && pairs < 1000; ++a)
        for (int b = a + 1; b < 200 && pairs < 1000; ++b) {
            ++pairs;
            const auto& pa = placements[static_cast<size_t>(a)];
            const auto& pb = placements[static_cast<size_t>(b)];
            if (pa.size() != pb.size()) continue;
            bool same = true;
            for (size_t k = 0; k < pa.size(); ++k)
                same = same && pa[k].class_id == pb[k].class_id && pa[k].x0 == pb[k].x0 &&
                       pa[k].y0 == pb[k].y0;
            collisions += same;
        }
    CHECK(pairs == 1000);
    CHECK(collisions == 0);
}

TEST_CASE("generation is byte deterministic and classes are well covered") {
    SceneSpec spec;
    spec.seed = 5;
    const fs::path a = temp_dir("a");
    const fs::path b = temp_dir("b");
    const auto rows_a = generate_dataset(spec, 200, 20, a);
    const auto rows_b = generate_dataset(spec, 200, 20, b);
    CHECK(rows_a.size() == 220);

    CHECK(file_bytes(a / "manifest.csv") == file_bytes(b / "manifest.csv"));
    for (const char* rel : {"images/s000000.gten", "images/s000123.gten", "masks/s000057.pgm",
                            "masks/s000219.pgm"})
        CHECK(file_bytes(a / rel) == file_bytes(b / rel));

    // every class appears in at least 20 training images
    std::vector<int> coverage(static_cast<size_t>(spec.classes), 0);
    for (const auto& row : rows_a)
        if (row.split == "train")
            for (size_t c = 0; c < row.labels.size(); ++c) coverage[c] += row.labels[c];
    for (int c = 0; c < spec.classes; ++c) CHECK(coverage[static_cast<size_t>(c)] >= 20);

    CHECK_THROWS_AS(generate_dataset(spec, 0, 1, a), std::invalid_argument);
    SceneSpec bad;
    bad.classes = 0;
    CHECK_THROWS_AS(generate_dataset(bad, 1, 1, a), std::invalid_argument);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("dataset round trip keeps labels and splits") {
    SceneSpec spec;
    spec.seed = 9;
    const fs::path dir = temp_dir("load");
    generate_dataset(spec, 12, 4, dir);
    const Dataset ds = load_dataset(dir);
    CHECK(ds.rows.size() == 16);
    CHECK(ds.classes == 4);
    CHECK(ds.image_size == 64);
    CHECK(ds.split_indices("train").size() == 12);
    CHECK(ds.split_indices("eval").size() == 4);
    for (size_t i = 0; i < ds.rows.size(); ++i) {
        const Sample s = render_sample(spec, static_cast<int>(i));
        CHECK(ds.rows[i].labels == s.labels);
        const auto mask = load_mask(dir, ds.rows[i].id);
        CHECK(mask == s.gt_mask);
    }
    fs::remove_all(dir);
}
