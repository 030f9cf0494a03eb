#include <cmath>
#include <filesystem>
#include <set>
#include <string>

#include "c2f/data.hpp"
#include "c2f/error.hpp"
#include "c2f/image.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace c2f;
namespace fs = std::filesystem;

namespace {

RgbImage solid(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    RgbImage img{w, h, {}};
    for (std::size_t i = 0; i < w * h; ++i) img.pixels.insert(img.pixels.end(), {r, g, b});
    return img;
}

void write_tree(const fs::path& root, std::size_t train, std::size_t test, std::size_t valid) {
    const std::size_t counts[] = {train, test, valid};
    const auto bytes = encode_ppm(solid(2, 2, 10, 20, 30));
    for (std::size_t s = 0; s < 3; ++s) {
        for (auto cls : kClassFolders) {
            const fs::path dir = root / std::string(kSplitNames[s]) / std::string(cls);
            fs::create_directories(dir);
            for (std::size_t i = 0; i < counts[s]; ++i) write_file(dir / ("f" + std::to_string(i) + ".ppm"), bytes);
        }
    }
}

}  // namespace

TEST_CASE("decode_image") {
    SUBCASE("constant gray survives resizing") {
        for (auto bytes : {encode_ppm(solid(37, 23, 128, 128, 128)), encode_png(solid(300, 200, 128, 128, 128))}) {
            Tensor t = decode_image(bytes, 128);
            CHECK(t.shape() == Shape{3, 128, 128});
            for (float v : t.data()) CHECK(v == doctest::Approx(128.0 / 255.0).epsilon(1e-6));
        }
    }
    SUBCASE("256x256 to 128") {
        CHECK(decode_image(encode_png(solid(256, 256, 1, 2, 3)), 128).shape() == Shape{3, 128, 128});
    }
    SUBCASE("black/white pair averages to one half") {
        RgbImage img{2, 1, {0, 0, 0, 255, 255, 255}};
        Tensor t = decode_image(encode_ppm(img), 1);
        for (float v : t.data()) CHECK(v == doctest::Approx(0.5));
    }
    SUBCASE("png and jpeg decode") {
        RgbImage img{4, 4, {}};
        for (std::size_t i = 0; i < 16; ++i) img.pixels.insert(img.pixels.end(), {200, 40, static_cast<std::uint8_t>(i * 10)});
        CHECK(decode_rgb(encode_png(img)).pixels == img.pixels);
        RgbImage j = decode_rgb(encode_jpeg(solid(16, 16, 200, 100, 50)));
        CHECK(j.width == 16);
        CHECK(std::abs(int(j.pixels[0]) - 200) <= 3);
        CHECK(std::abs(int(j.pixels[1]) - 100) <= 3);
    }
    SUBCASE("errors") {
        const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5};
        CHECK_THROWS_AS(decode_image(junk, 8), DataError);
        auto png = encode_png(solid(4, 4, 1, 1, 1));
        png.resize(png.size() / 2);
        CHECK_THROWS_AS(decode_image(png, 8), DataError);
        const std::string empty_ppm = "P6\n0 3\n255\n";
        CHECK_THROWS_AS(decode_image(std::vector<std::uint8_t>(empty_ppm.begin(), empty_ppm.end()), 8), DataError);
    }
}

TEST_CASE("load_manifest") {
    c2f::test::TempDir tmp;
    SUBCASE("full-size layout counts") {
        write_tree(tmp.path(), 1327, 140, 40);
        DatasetManifest m = load_manifest(tmp.path());
        CHECK(m.split("train").samples.size() == 2654);
        CHECK(m.split("train").class_counts == std::array<std::size_t, 2>{1327, 1327});
        CHECK(m.split("test").samples.size() == 280);
        CHECK(m.split("test").class_counts == std::array<std::size_t, 2>{140, 140});
        CHECK(m.split("valid").samples.size() == 80);
        CHECK(m.split("valid").class_counts == std::array<std::size_t, 2>{40, 40});
        CHECK(load_manifest(tmp.path()) == m);

        const auto& train = m.split("train").samples;
        for (std::size_t i = 1; i < train.size(); ++i) {
            if (train[i].label == train[i - 1].label) {
                CHECK(train[i - 1].path.generic_string() < train[i].path.generic_string());
            }
            CHECK(train[i].path.parent_path().filename() == std::string(kClassFolders[train[i].label]));
        }
    }
    SUBCASE("missing split") {
        write_tree(tmp.path(), 2, 2, 2);
        fs::remove_all(tmp.path() / "valid");
        try {
            load_manifest(tmp.path());
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()) == "missing split: valid");
        }
    }
    SUBCASE("missing and empty class folders") {
        write_tree(tmp.path(), 2, 2, 2);
        fs::remove_all(tmp.path() / "test" / "autistic");
        CHECK_THROWS_WITH_AS(load_manifest(tmp.path()), doctest::Contains("autistic"), DataError);
        fs::create_directories(tmp.path() / "test" / "autistic");
        CHECK_THROWS_WITH_AS(load_manifest(tmp.path()), doctest::Contains("empty class folder"), DataError);
    }
    SUBCASE("folder names are matched case-insensitively") {
        write_tree(tmp.path(), 2, 2, 2);
        fs::rename(tmp.path() / "train" / "non_autistic", tmp.path() / "train" / "Non_Autistic");
        fs::rename(tmp.path() / "train" / "autistic", tmp.path() / "train" / "Autistic");
        DatasetManifest m = load_manifest(tmp.path());
        CHECK(m.split("train").class_counts == std::array<std::size_t, 2>{2, 2});
    }
}

TEST_CASE("batch_plan") {
    auto plan = batch_plan(280, 32, 1, 0, true);
    CHECK(plan.size() == 9);
    CHECK(plan.back().size() == 24);

    auto ordered = batch_plan(10, 4, 99, 3, false);
    std::size_t expect = 0;
    for (const auto& b : ordered) {
        for (auto i : b) CHECK(i == expect++);
    }

    CHECK(batch_plan(50, 7, 5, 2, true) == batch_plan(50, 7, 5, 2, true));
    CHECK(batch_plan(50, 50, 5, 2, true) != batch_plan(50, 50, 5, 3, true));
    for (std::uint64_t epoch = 0; epoch < 5; ++epoch) {
        std::set<std::size_t> seen;
        for (const auto& b : batch_plan(33, 8, 7, epoch, true)) seen.insert(b.begin(), b.end());
        CHECK(seen.size() == 33);
    }
    CHECK(batch_plan(2, 2, 0, 0, true) != batch_plan(2, 2, 0, 1, true));
    CHECK_THROWS_AS(batch_plan(10, 0, 0, 0, false), ConfigError);
}

TEST_CASE("synthetic dataset") {
    c2f::test::TempDir tmp;
    generate_synthetic(8, 32, 123, tmp.path() / "a");
    DatasetManifest m = load_manifest(tmp.path() / "a");
    CHECK(m.split("train").class_counts == std::array<std::size_t, 2>{8, 8});
    CHECK(m.split("test").class_counts == std::array<std::size_t, 2>{4, 4});
    CHECK(m.split("valid").class_counts == std::array<std::size_t, 2>{4, 4});

    SUBCASE("class 0 is red-dominant") {
        double red[2] = {0, 0};
        std::size_t n[2] = {0, 0};
        for (const auto& b : batches(m, "train", 5, 0, 0, false, 32)) {
            for (std::size_t k = 0; k < b.labels.size(); ++k) {
                double sum = 0.0;
                for (std::size_t i = 0; i < 32 * 32; ++i) sum += b.images[k * 3 * 1024 + i];
                red[b.labels[k]] += sum / 1024.0;
                ++n[b.labels[k]];
            }
        }
        CHECK(red[0] / n[0] - red[1] / n[1] > 0.2);
    }
    SUBCASE("byte-identical for the same seed") {
        generate_synthetic(8, 32, 123, tmp.path() / "b");
        for (const auto& s : m.split("train").samples) {
            const fs::path rel = fs::relative(s.path, tmp.path() / "a");
            CHECK(read_file(s.path) == read_file(tmp.path() / "b" / rel));
        }
    }
    SUBCASE("unwritable destination") {
        write_file(tmp.path() / "blocker", std::vector<std::uint8_t>{1});
        CHECK_THROWS_AS(generate_synthetic(2, 8, 1, tmp.path() / "blocker" / "x"), DataError);
    }
    SUBCASE("batches carry folder labels and stay in [0,1]") {
        auto bs = batches(m, "train", 3, 42, 1, true, 32);
        CHECK(bs.size() == 6);
        std::set<std::size_t> seen;
        for (const auto& b : bs) {
            CHECK(b.images.all_finite());
            for (float v : b.images.data()) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
            for (std::size_t k = 0; k < b.labels.size(); ++k) {
                CHECK(b.labels[k] == m.split("train").samples[b.indices[k]].label);
                seen.insert(b.indices[k]);
            }
        }
        CHECK(seen.size() == 16);
    }
    SUBCASE("worker count does not change batches") {
        BatchLoader one(m.split("train"), 32, false, 1), four(m.split("train"), 32, true, 4);
        for (const auto& g : batch_plan(16, 5, 3, 0, true)) {
            Batch a = one.load(g), b = four.load(g);
            CHECK(a.images == b.images);
            CHECK(a.labels == b.labels);
        }
    }
}
