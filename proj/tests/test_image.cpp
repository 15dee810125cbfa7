#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "support.hpp"
#include "veil/diagnostics.hpp"
#include "veil/image.hpp"
#include "veil/image_io.hpp"
#include "veil/patch.hpp"

using namespace veil;
using namespace veil::test;

namespace {

// Binary PPM written by hand so the decoder is checked against known bytes.
void write_ppm8(const std::filesystem::path& path, int w, int h, const std::vector<std::uint8_t>& rgb) {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void write_ppm16(const std::filesystem::path& path, int w, int h, const std::vector<std::uint16_t>& rgb) {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n" << w << " " << h << "\n65535\n";
    for (std::uint16_t v : rgb) {
        const char be[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
        out.write(be, 2);
    }
}

// Raw 8-bit samples of a saved file, in RGB order.
std::vector<int> stored_samples(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    std::vector<int> out;
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            if (m.channels() == 1) {
                out.push_back(m.at<std::uint8_t>(y, x));
            } else {
                const auto& p = m.at<cv::Vec3b>(y, x);
                out.push_back(p[2]);
                out.push_back(p[1]);
                out.push_back(p[0]);
            }
        }
    }
    return out;
}

ScalarMap brute_reduce(const ScalarMap& m, int side, Reducer r) {
    const int rad = side / 2;
    ScalarMap out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            double v = m.clamped(x, y);
            for (int dy = -rad; dy <= rad; ++dy) {
                for (int dx = -rad; dx <= rad; ++dx) {
                    const double s = m.clamped(x + dx, y + dy);
                    v = r == Reducer::min ? std::min(v, s) : std::max(v, s);
                }
            }
            out.at(x, y) = v;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("rasters reject empty dimensions and mismatched data") {
    CHECK_THROWS_AS(Image(0, 3), InvalidArgument);
    CHECK_THROWS_AS(ScalarMap(3, -1), InvalidArgument);
    CHECK_THROWS_AS(ScalarMap(2, 2, std::vector<double>(3)), InvalidArgument);
    CHECK_NOTHROW(Image(1, 1));
}

TEST_CASE("patch size must be odd and positive") {
    CHECK_THROWS_AS(PatchSize(0), InvalidArgument);
    CHECK_THROWS_AS(PatchSize(4), InvalidArgument);
    CHECK_THROWS_AS(PatchSize(-3), InvalidArgument);
    CHECK(PatchSize().side() == 15);
    CHECK(PatchSize(7).radius() == 3);
}

TEST_CASE("8-bit samples map to [0,1] by division by 255") {
    TempDir dir("io8");
    write_ppm8(dir / "a.ppm", 3, 1, {255, 255, 255, 0, 0, 0, 51, 102, 204});
    const Image img = load_image(dir / "a.ppm");
    REQUIRE(img.width() == 3);
    REQUIRE(img.height() == 1);
    CHECK(pixel(img, 0, 0) == Rgb{1.0, 1.0, 1.0});
    CHECK(pixel(img, 1, 0) == Rgb{0.0, 0.0, 0.0});
    CHECK(img.at(2, 0, 0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(img.at(2, 0, 1) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(img.at(2, 0, 2) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("16-bit samples divide by 65535") {
    TempDir dir("io16");
    write_ppm16(dir / "a.ppm", 2, 1, {65535, 0, 32768, 1, 2, 3});
    const Image img = load_image(dir / "a.ppm");
    CHECK(img.at(0, 0, 0) == 1.0);
    CHECK(img.at(0, 0, 1) == 0.0);
    CHECK(img.at(0, 0, 2) == doctest::Approx(32768.0 / 65535.0));
    CHECK(img.at(1, 0, 2) == doctest::Approx(3.0 / 65535.0));
}

TEST_CASE("alpha is dropped with a warning") {
    TempDir dir("alpha");
    cv::Mat rgba(2, 2, CV_8UC4, cv::Scalar(10, 20, 30, 40));  // B, G, R, A
    REQUIRE(cv::imwrite((dir / "a.png").string(), rgba));
    std::vector<std::string> warnings;
    auto previous = set_warning_sink([&](const std::string& w) { warnings.push_back(w); });
    const Image img = load_image(dir / "a.png");
    set_warning_sink(previous);
    CHECK(warnings.size() == 1);
    CHECK(img.at(1, 1, 0) == doctest::Approx(30.0 / 255.0));
    CHECK(img.at(1, 1, 2) == doctest::Approx(10.0 / 255.0));
}

TEST_CASE("unreadable and unsupported inputs raise IoError") {
    TempDir dir("bad");
    CHECK_THROWS_AS(load_image(dir / "missing.png"), IoError);
    {
        std::ofstream(dir / "junk.png") << "not an image";
    }
    CHECK_THROWS_AS(load_image(dir / "junk.png"), IoError);
    cv::Mat gray(2, 2, CV_8UC1, cv::Scalar(7));
    REQUIRE(cv::imwrite((dir / "gray.png").string(), gray));
    CHECK_THROWS_AS(load_image(dir / "gray.png"), IoError);
    CHECK_THROWS_AS(save_image(Image(2, 2), dir / "out.jpg"), IoError);
    CHECK_THROWS_AS(save_image(Image(2, 2), dir / "no_such_dir" / "x.png"), IoError);
}

TEST_CASE("saving quantizes with round(v*255) after clamping") {
    TempDir dir("save");
    Image img(5, 1);
    set_pixel(img, 0, 0, {1.0, 0.5, 0.0});
    set_pixel(img, 1, 0, {1.7, -0.3, 0.2});
    set_pixel(img, 2, 0, {0.25, 0.75, 0.999});
    set_pixel(img, 3, 0, {0.001, 0.002, 0.498});
    set_pixel(img, 4, 0, {0.4, 0.4, 0.4});
    save_image(img, dir / "q.png");
    const std::vector<int> expect = {255, 128, 0, 255, 0, 51, 64, 191, 255, 0, 1, 127, 102, 102, 102};
    CHECK(stored_samples(dir / "q.png") == expect);
}

TEST_CASE("save then load stays within half a quantization step") {
    Rng rng(11);
    TempDir dir("roundtrip");
    for (const char* ext : {".png", ".ppm", ".bmp", ".tif"}) {
        const Image img = random_image(rng, 13, 7);
        const auto path = dir / (std::string("r") + ext);
        save_image(img, path);
        const Image back = load_image(path);
        REQUIRE(back.same_size(img));
        CHECK(max_abs_diff(img, back) <= 1.0 / 510.0 + 1e-12);
    }
}

TEST_CASE("scalar maps persist as gray rasters and exact CSV") {
    Rng rng(3);
    TempDir dir("scalar");
    ScalarMap m = random_map(rng, 6, 4);
    m.at(0, 0) = 0.5;
    m.at(1, 0) = 1.0 / 3.0;
    save_scalar_csv(m, dir / "m.csv");
    CHECK(load_scalar_csv(dir / "m.csv") == m);

    save_scalar_map(m, dir / "m.png");
    const auto raw = stored_samples(dir / "m.png");
    REQUIRE(raw.size() == 24);
    CHECK(raw[0] == 128);
    CHECK(raw[1] == 85);
    for (int i = 0; i < 24; ++i) CHECK(raw[i] == std::lround(m.data()[i] * 255.0));
}

TEST_CASE("resize_max_side") {
    SUBCASE("halves the long side") {
        const Image img(2048, 1024, 0.3);
        const Image out = resize_max_side(img, 1024);
        CHECK(out.width() == 1024);
        CHECK(out.height() == 512);
    }
    SUBCASE("leaves smaller images untouched") {
        Rng rng(5);
        const Image img = random_image(rng, 80, 60);
        CHECK(resize_max_side(img, 1024) == img);
        CHECK(resize_max_side(img, 80) == img);
    }
    SUBCASE("portrait orientation keeps the aspect ratio") {
        const Image out = resize_max_side(Image(300, 1200), 400);
        CHECK(out.width() == 100);
        CHECK(out.height() == 400);
    }
    SUBCASE("constant images stay constant") {
        for (auto [w, h, side] : {std::tuple{37, 91, 20}, std::tuple{500, 3, 64}, std::tuple{9, 9, 4}}) {
            const Image out = resize_max_side(Image(w, h, 0.625), side);
            CHECK(std::max(out.width(), out.height()) == side);
            for (double v : out.data()) CHECK(v == doctest::Approx(0.625).epsilon(1e-14));
        }
    }
    SUBCASE("rejects a non-positive side") { CHECK_THROWS_AS(resize_max_side(Image(4, 4), 0), InvalidArgument); }
}

TEST_CASE("bilinear resize keeps affine ramps affine in the interior") {
    ScalarMap ramp(64, 16);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 64; ++x) ramp.at(x, y) = x / 63.0;
    }
    const ScalarMap half = resize_bilinear(ramp, 32, 8);
    // Pixel centres: output x maps to input 2x + 0.5.
    for (int x = 0; x < 32; ++x) CHECK(half.at(x, 3) == doctest::Approx((2.0 * x + 0.5) / 63.0));
}

TEST_CASE("patch_reduce matches the nested-loop definition") {
    Rng rng(7);
    SUBCASE("7x7 map, patch 3") {
        const ScalarMap m = random_map(rng, 7, 7);
        CHECK(patch_reduce(m, PatchSize(3), Reducer::min) == brute_reduce(m, 3, Reducer::min));
        CHECK(patch_reduce(m, PatchSize(3), Reducer::max) == brute_reduce(m, 3, Reducer::max));
    }
    SUBCASE("random shapes and patch sizes") {
        for (int trial = 0; trial < 60; ++trial) {
            const int w = uniform_int(rng, 1, 19);
            const int h = uniform_int(rng, 1, 19);
            const int side = 2 * uniform_int(rng, 0, 6) + 1;
            const ScalarMap m = trial % 2 ? random_map(rng, w, h) : channel(quantized_image(rng, w, h), 0);
            for (Reducer r : {Reducer::min, Reducer::max}) {
                CHECK(patch_reduce(m, PatchSize(side), r) == brute_reduce(m, side, r));
            }
        }
    }
}

TEST_CASE("per-channel and joint reductions agree with their definitions") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const Image img = random_image(rng, uniform_int(rng, 1, 12), uniform_int(rng, 1, 12));
        const int side = 2 * uniform_int(rng, 0, 3) + 1;
        for (Reducer r : {Reducer::min, Reducer::max}) {
            const Image per = patch_reduce(img, PatchSize(side), r);
            const ScalarMap joint = patch_reduce_joint(img, PatchSize(side), r);
            for (int c = 0; c < 3; ++c) CHECK(channel(per, c) == brute_reduce(channel(img, c), side, r));
            for (int y = 0; y < img.height(); ++y) {
                for (int x = 0; x < img.width(); ++x) {
                    const double a = per.at(x, y, 0), b = per.at(x, y, 1), c = per.at(x, y, 2);
                    const double expect = r == Reducer::min ? std::min({a, b, c}) : std::max({a, b, c});
                    CHECK(joint.at(x, y) == expect);
                }
            }
        }
    }
}

TEST_CASE("patch_reduce basic properties") {
    Rng rng(13);
    SUBCASE("constant map is a fixed point") {
        const ScalarMap m(9, 5, 0.37);
        for (int side : {1, 3, 15}) {
            CHECK(patch_reduce(m, PatchSize(side), Reducer::min) == m);
            CHECK(patch_reduce(m, PatchSize(side), Reducer::max) == m);
        }
    }
    SUBCASE("side 1 is the identity") {
        const ScalarMap m = random_map(rng, 11, 6);
        CHECK(patch_reduce(m, PatchSize(1), Reducer::min) == m);
        CHECK(patch_reduce(patch_reduce(m, PatchSize(1), Reducer::max), PatchSize(1), Reducer::max) == m);
    }
    SUBCASE("min <= input <= max") {
        for (int trial = 0; trial < 40; ++trial) {
            const ScalarMap m = random_map(rng, uniform_int(rng, 1, 30), uniform_int(rng, 1, 30));
            const PatchSize p(2 * uniform_int(rng, 0, 8) + 1);
            const ScalarMap lo = patch_reduce(m, p, Reducer::min);
            const ScalarMap hi = patch_reduce(m, p, Reducer::max);
            for (std::size_t i = 0; i < m.data().size(); ++i) {
                CHECK(lo.data()[i] <= m.data()[i]);
                CHECK(m.data()[i] <= hi.data()[i]);
            }
        }
    }
    SUBCASE("windows larger than the raster reduce to the global extreme") {
        const ScalarMap m = random_map(rng, 4, 3);
        const auto [lo, hi] = std::minmax_element(m.data().begin(), m.data().end());
        for (double v : values(patch_reduce(m, PatchSize(31), Reducer::min))) CHECK(v == *lo);
        for (double v : values(patch_reduce(m, PatchSize(31), Reducer::max))) CHECK(v == *hi);
    }
}

TEST_CASE("clamp_unit and channel extraction") {
    Image img(2, 1);
    set_pixel(img, 0, 0, {-1.0, 0.5, 2.0});
    set_pixel(img, 1, 0, {0.25, 1.0, 0.0});
    const Image c = clamp_unit(img);
    CHECK(pixel(c, 0, 0) == Rgb{0.0, 0.5, 1.0});
    CHECK(pixel(c, 1, 0) == Rgb{0.25, 1.0, 0.0});
    const ScalarMap g = channel(img, 1);
    CHECK(g.at(0, 0) == 0.5);
    CHECK(g.at(1, 0) == 1.0);
}
