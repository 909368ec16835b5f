#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "drp/autodiff.hpp"
#include "drp/checkpoint.hpp"
#include "drp/io.hpp"
#include "support/oracles.hpp"

using namespace drp;

namespace {
std::filesystem::path scratch_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "drp_io_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

Image ramp_image(int n) {
    Image img(n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) img.at(r, c) = (r * n + c) / double(n * n - 1);
    return img;
}
}  // namespace

TEST_CASE("pgm round trip preserves values to quantization accuracy") {
    const auto path = (scratch_dir() / "roundtrip.pgm").string();
    const Image img = ramp_image(32);
    write_pgm(path, img);
    const GrayData back = read_pgm(path);
    REQUIRE(back.width == 32);
    REQUIRE(back.height == 32);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        REQUIRE(std::abs(back.pixels[i] - img.pixels[i]) <= 0.5 / 65535.0 + 1e-12);
}

TEST_CASE("ascii pgm with comments parses") {
    const auto path = (scratch_dir() / "ascii.pgm").string();
    std::ofstream out(path);
    out << "P2\n# comment line\n2 2\n255\n0 128\n255 64\n";
    out.close();
    const GrayData g = read_pgm(path);
    REQUIRE(g.width == 2);
    REQUIRE(g.pixels[0] == 0.0);
    REQUIRE(std::abs(g.pixels[1] - 128.0 / 255.0) < 1e-12);
    REQUIRE(g.pixels[2] == 1.0);
}

TEST_CASE("png round trip preserves values to quantization accuracy") {
    const auto path = (scratch_dir() / "roundtrip.png").string();
    const Image img = ramp_image(48);
    write_png(path, img);
    const GrayData back = read_png(path);
    REQUIRE(back.width == 48);
    REQUIRE(back.height == 48);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        REQUIRE(std::abs(back.pixels[i] - img.pixels[i]) <= 0.5 / 65535.0 + 1e-12);
}

TEST_CASE("png decoder handles sub, up, average and paeth filters") {
    // hand-build an 8-bit grayscale PNG whose rows use filters 1-4
    const int w = 5, h = 4;
    const unsigned char pix[h][w] = {
        {10, 20, 30, 40, 50},
        {15, 25, 35, 45, 55},
        {100, 90, 80, 70, 60},
        {5, 5, 200, 200, 5},
    };
    std::vector<unsigned char> raw;
    const int filters[h] = {1, 2, 3, 4};
    std::vector<unsigned char> prev(w, 0);
    for (int r = 0; r < h; ++r) {
        raw.push_back(static_cast<unsigned char>(filters[r]));
        for (int c = 0; c < w; ++c) {
            const int x = pix[r][c];
            const int a = c > 0 ? pix[r][c - 1] : 0;
            const int b = prev[c];
            const int cc = c > 0 ? prev[c - 1] : 0;
            int encoded = 0;
            switch (filters[r]) {
                case 1: encoded = x - a; break;
                case 2: encoded = x - b; break;
                case 3: encoded = x - (a + b) / 2; break;
                case 4: encoded = x - detail::png_paeth(a, b, cc); break;
            }
            raw.push_back(static_cast<unsigned char>(encoded & 0xff));
        }
        for (int c = 0; c < w; ++c) prev[c] = pix[r][c];
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    REQUIRE(compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) ==
            Z_OK);
    compressed.resize(bound);

    const auto path = (scratch_dir() / "filters.png").string();
    {
        std::ofstream out(path, std::ios::binary);
        static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
        out.write(reinterpret_cast<const char*>(sig), 8);
        std::vector<unsigned char> ihdr;
        detail::png_be32(ihdr, w);
        detail::png_be32(ihdr, h);
        ihdr.push_back(8);
        ihdr.push_back(0);
        ihdr.push_back(0);
        ihdr.push_back(0);
        ihdr.push_back(0);
        detail::png_chunk(out, "IHDR", ihdr);
        detail::png_chunk(out, "IDAT", compressed);
        detail::png_chunk(out, "IEND", {});
    }
    const GrayData g = read_png(path);
    REQUIRE(g.width == w);
    REQUIRE(g.height == h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            REQUIRE(std::abs(g.pixels[r * w + c] - pix[r][c] / 255.0) < 1e-12);
}

TEST_CASE("png reader rejects non-grayscale and non-png input") {
    const auto path = (scratch_dir() / "notpng.png").string();
    std::ofstream(path) << "definitely not a png";
    REQUIRE_THROWS_AS(read_png(path), std::runtime_error);
    REQUIRE_THROWS_AS(read_gray_image((scratch_dir() / "nope.tif").string()), std::runtime_error);
}

TEST_CASE("raw f64 files round trip bitwise") {
    const auto path = (scratch_dir() / "data.f64").string();
    const Image img = oracle::random_image(16, 3);
    write_raw_f64(path, img.pixels);
    const auto back = read_raw_f64(path, img.pixels.size());
    REQUIRE(std::memcmp(back.data(), img.pixels.data(), back.size() * sizeof(double)) == 0);
    REQUIRE_THROWS_AS(read_raw_f64(path, img.pixels.size() + 1), std::runtime_error);
}

TEST_CASE("geometry serializes to and from the key=value block") {
    Geometry g;
    g.image_size = 128;
    g.num_views = 45;
    g.num_detectors = 192;
    g.detector_spacing = 1.25;
    g.detector_offset = -0.5;
    const Geometry back = geometry_from_kv(geometry_to_kv(g));
    REQUIRE(back.image_size == g.image_size);
    REQUIRE(back.num_views == g.num_views);
    REQUIRE(back.num_detectors == g.num_detectors);
    REQUIRE(back.detector_spacing == g.detector_spacing);
    REQUIRE(back.detector_offset == g.detector_offset);

    REQUIRE_THROWS_WITH(geometry_from_kv("image_size=64\nbogus_key=1\n"),
                        Catch::Matchers::ContainsSubstring("line 2"));
    REQUIRE_THROWS_WITH(geometry_from_kv("image_size=abc\n"),
                        Catch::Matchers::ContainsSubstring("image_size"));
    // detector array must cover the diagonal
    REQUIRE_THROWS_AS(geometry_from_kv("image_size=64\nnum_detectors=64\n"),
                      std::invalid_argument);
}

TEST_CASE("checkpoints round trip names, shapes and values") {
    const auto path = (scratch_dir() / "net.ckpt").string();
    std::vector<Tensor> tensors;
    tensors.push_back(Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6}, false, "enc0.w"));
    tensors.push_back(Tensor::from_vector({4}, {0.5, -0.5, 1e-30, 7e12}, false, "enc0.b"));
    save_checkpoint(path, tensors);
    const auto back = load_checkpoint(path);
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].name() == tensors[i].name());
        REQUIRE(back[i].shape() == tensors[i].shape());
        REQUIRE(std::memcmp(back[i].data(), tensors[i].data(),
                            back[i].numel() * sizeof(double)) == 0);
    }

    const auto bad = (scratch_dir() / "bad.ckpt").string();
    std::ofstream(bad) << "XXXXXXXXXXXXXXXX";
    REQUIRE_THROWS_WITH(load_checkpoint(bad), Catch::Matchers::ContainsSubstring("magic"));
}

TEST_CASE("format_double handles the sentinels") {
    REQUIRE(format_double(std::numeric_limits<double>::infinity()) == "inf");
    REQUIRE(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    REQUIRE(format_double(std::numeric_limits<double>::quiet_NaN()).empty());
    REQUIRE(format_double(0.25) == "0.25");
}
