#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "drp/io.hpp"
#include "drp/metrics.hpp"
#include "drp/phantom.hpp"
#include "support/oracles.hpp"

using namespace drp;

namespace {

// independent point-in-ellipse evaluation with the standard (Toft) table
double shepp_logan_point(double x, double y) {
    struct E {
        double v, a, b, x0, y0, phi;
    };
    static const E table[10] = {
        {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
        {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
        {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
        {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
        {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
        {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
        {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
        {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
    };
    double v = 0.0;
    for (const auto& e : table) {
        const double phi = e.phi * M_PI / 180.0;
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double w = -dx * std::sin(phi) + dy * std::cos(phi);
        if (u * u / (e.a * e.a) + w * w / (e.b * e.b) <= 1.0) v += e.v;
    }
    return v;
}

}  // namespace

TEST_CASE("disks phantom puts a unit disk at the center") {
    Phantom ph;
    ph.kind = PhantomKind::Disks;
    ph.size = 64;
    const Image img = render_phantom(ph);
    REQUIRE(img.at(32, 32) == 1.0);
    REQUIRE(img.at(0, 0) == 0.0);
    REQUIRE(img.at(63, 63) == 0.0);
}

TEST_CASE("shepp-logan center value equals the signed ellipse sum") {
    Phantom ph;
    ph.size = 64;
    const Image img = render_phantom(ph);
    // pixel (32, 32) center in normalized coordinates
    const double x = (32 + 0.5 - 32.0) / 32.0;
    const double y = (32.0 - 32 - 0.5) / 32.0;
    REQUIRE(std::abs(img.at(32, 32) - shepp_logan_point(x, y)) < 1e-12);
    // all values normalized
    for (double v : img.pixels) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("rendering is deterministic") {
    Phantom ph;
    ph.kind = PhantomKind::Squares;
    ph.size = 64;
    const Image a = render_phantom(ph);
    const Image b = render_phantom(ph);
    REQUIRE(std::memcmp(a.pixels.data(), b.pixels.data(), a.pixels.size() * sizeof(double)) == 0);
}

TEST_CASE("phantom sizes must be positive multiples of 16") {
    Phantom ph;
    ph.size = 60;
    REQUIRE_THROWS_AS(render_phantom(ph), std::invalid_argument);
    ph.size = -16;
    REQUIRE_THROWS_AS(render_phantom(ph), std::invalid_argument);
}

TEST_CASE("file-backed phantoms load, resample and normalize") {
    const auto dir = std::filesystem::temp_directory_path() / "drp_phantom_io";
    std::filesystem::create_directories(dir);

    Image src(32);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) src.at(r, c) = (r + c) / 62.0;
    const std::string pgm = (dir / "src.pgm").string();
    const std::string png = (dir / "src.png").string();
    write_pgm(pgm, src);
    write_png(png, src);

    for (const std::string& path : {pgm, png}) {
        Phantom ph;
        ph.kind = PhantomKind::FromFile;
        ph.path = path;
        ph.size = 64;
        const Image up = render_phantom(ph);
        REQUIRE(up.size == 64);
        for (double v : up.pixels) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
        // smooth ramp survives resampling
        REQUIRE(std::abs(up.at(32, 32) - src.at(16, 16)) < 0.05);
        REQUIRE(up.at(0, 0) < 0.1);
        REQUIRE(up.at(63, 63) > 0.9);
    }

    Phantom missing;
    missing.kind = PhantomKind::FromFile;
    missing.path = (dir / "nope.png").string();
    missing.size = 64;
    REQUIRE_THROWS(render_phantom(missing));
}

TEST_CASE("psnr follows its closed form") {
    Image a(32), b(32);
    REQUIRE(std::isinf(psnr(a, b, 1.0)));

    for (double& v : a.pixels) v = 0.1;  // uniform difference against zero
    REQUIRE(std::abs(psnr(a, b, 1.0) - 20.0) < 1e-12);

    // more noise, lower psnr
    Image ref = oracle::gaussian_blob(32, 6.0);
    Image n1 = ref, n2 = ref;
    Rng rng(9);
    for (size_t i = 0; i < n1.pixels.size(); ++i) {
        const double g = rng.gaussian();
        n1.pixels[i] += 0.01 * g;
        n2.pixels[i] += 0.05 * g;
    }
    REQUIRE(psnr(n2, ref, 1.0) < psnr(n1, ref, 1.0));

    // symmetric in its image arguments
    REQUIRE(psnr(n1, ref, 1.0) == psnr(ref, n1, 1.0));

    REQUIRE_THROWS_AS(psnr(Image(16), Image(32), 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(psnr(a, b, 0.0), std::invalid_argument);
}

TEST_CASE("ssim is 1 for identical images and low for negated ones") {
    Phantom ph;
    ph.size = 64;
    const Image img = render_phantom(ph);
    REQUIRE(ssim(img, img) == 1.0);

    Image neg = img;
    for (double& v : neg.pixels) v = 1.0 - v;
    REQUIRE(ssim(neg, img) < 0.5);

    Image c1(32), c2(32);
    for (double& v : c1.pixels) v = 0.3;
    for (double& v : c2.pixels) v = 0.3;
    REQUIRE(ssim(c1, c2) == 1.0);

    REQUIRE_THROWS_AS(ssim(Image(16), Image(32)), std::invalid_argument);
}

TEST_CASE("ssim is symmetric for images sharing a dynamic range") {
    Image a = oracle::gaussian_blob(48, 8.0);
    Image b = oracle::gaussian_blob(48, 12.0);
    // both span [min, max] anchors so the stabilizers agree
    a.pixels[0] = 0.0;
    a.pixels[1] = 1.0;
    b.pixels[0] = 0.0;
    b.pixels[1] = 1.0;
    REQUIRE(std::abs(ssim(a, b) - ssim(b, a)) < 1e-9);
}

TEST_CASE("entropy of a constant image is zero") {
    Image c(32);
    for (double& v : c.pixels) v = 0.7;
    REQUIRE(entropy(c) == 0.0);
}

TEST_CASE("uniform bin occupancy gives exactly 8 bits") {
    // 64x64 = 4096 px = 16 per bin over 256 bins; values packed strictly
    // inside each bin so the edge mapping cannot move them
    Image img(64);
    size_t k = 0;
    for (int bin = 0; bin < 256; ++bin)
        for (int rep = 0; rep < 16; ++rep) img.pixels[k++] = bin / 256.0 + rep / 8192.0;
    REQUIRE(std::abs(entropy(img, 256) - 8.0) < 1e-12);
}

TEST_CASE("entropy is invariant under affine rescaling") {
    const Image img = oracle::gaussian_blob(32, 5.0);
    const double h = entropy(img);
    Image scaled = img;
    for (double& v : scaled.pixels) v = 3.5 * v - 1.25;
    REQUIRE(std::abs(entropy(scaled) - h) < 1e-12);
    Image flipped = img;
    for (double& v : flipped.pixels) v = -2.0 * v + 0.5;
    REQUIRE(std::abs(entropy(flipped) - h) < 1e-12);
    REQUIRE_THROWS_AS(entropy(img, 1), std::invalid_argument);
}
