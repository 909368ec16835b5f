#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "drp/phantom.hpp"
#include "drp/projector.hpp"
#include "support/oracles.hpp"

using namespace drp;

namespace {
Geometry desk_geometry(int size, int views) {
    Geometry g;
    g.image_size = size;
    g.num_views = views;
    g.num_detectors = 3 * size / 2;
    return g;
}
}  // namespace

TEST_CASE("zero image projects to zero sinogram") {
    const Geometry geom = desk_geometry(64, 45);
    const Sinogram sino = forward_project(Image(64), geom);
    for (double v : sino.values) REQUIRE(v == 0.0);
}

TEST_CASE("disk projections match analytic chords and the Riemann oracle") {
    const int n = 64;
    const double radius = 16.0;
    const Image disk = oracle::raster_disk(n, radius, 1.0);
    const Geometry geom = desk_geometry(n, 90);
    const Sinogram sino = forward_project(disk, geom);

    for (int m = 0; m < geom.num_views; m += 9) {
        for (int j = 0; j < geom.num_detectors; ++j) {
            const double s = geom.detector_pos(j);
            if (std::abs(s) > 0.8 * radius) continue;
            const double chord = 2.0 * std::sqrt(radius * radius - s * s);
            REQUIRE(std::abs(sino.at(m, j) - chord) <= 0.02 * chord);
            const double fine = oracle::riemann_ray_integral(disk, geom.angle(m), s, 16);
            REQUIRE(std::abs(sino.at(m, j) - fine) <= 0.02 * chord);
        }
    }
}

TEST_CASE("every view conserves image mass") {
    const int n = 64;
    const Geometry geom = desk_geometry(n, 40);

    Phantom ph;
    ph.size = n;
    for (PhantomKind kind : {PhantomKind::SheppLogan, PhantomKind::Disks}) {
        ph.kind = kind;
        const Image img = render_phantom(ph);
        double pixel_sum = 0.0;
        for (double v : img.pixels) pixel_sum += v;
        const Sinogram sino = forward_project(img, geom);
        for (int m = 0; m < geom.num_views; ++m) {
            double view_sum = 0.0;
            for (int j = 0; j < geom.num_detectors; ++j) view_sum += sino.at(m, j);
            view_sum *= geom.detector_spacing;
            REQUIRE(std::abs(view_sum - pixel_sum) <= 1e-3 * pixel_sum);
        }
    }
}

TEST_CASE("back projection is the exact adjoint") {
    Geometry geom = desk_geometry(32, 48);
    for (int trial = 0; trial < 20; ++trial) {
        const Image x = oracle::random_image(32, 100 + trial);
        Sinogram y(geom.num_views, geom.num_detectors);
        Rng rng(200 + trial);
        for (double& v : y.values) v = rng.gaussian();

        const double lhs = dot(forward_project(x, geom).values, y.values);
        const double rhs = dot(x.pixels, back_project(y, geom).pixels);
        REQUIRE(std::abs(lhs - rhs) <= 1e-6 * std::max(std::abs(lhs), std::abs(rhs)));
    }
}

TEST_CASE("zero sinogram backprojects to zero image") {
    const Geometry geom = desk_geometry(32, 48);
    const Image img = back_project(Sinogram(geom.num_views, geom.num_detectors), geom);
    for (double v : img.pixels) REQUIRE(v == 0.0);
}

TEST_CASE("an impulse backprojects onto a single ray strip") {
    const Geometry geom = desk_geometry(32, 48);
    const int view = 13, det = 30;
    Sinogram impulse(geom.num_views, geom.num_detectors);
    impulse.at(view, det) = 1.0;
    const Image img = back_project(impulse, geom);

    const double theta = geom.angle(view);
    const double s = geom.detector_pos(det);
    const double half = 0.5 * (geom.image_size - 1);
    int nonzero = 0;
    // bilinear footprint (reach 1) plus the detector bin's half width
    const double reach = 1.0 + 0.5 * geom.detector_spacing;
    for (int r = 0; r < geom.image_size; ++r) {
        for (int c = 0; c < geom.image_size; ++c) {
            const double x = c - half, y = half - r;
            const double dist = std::abs(x * std::cos(theta) + y * std::sin(theta) - s);
            if (img.at(r, c) != 0.0) {
                ++nonzero;
                REQUIRE(dist < reach + 1e-12);
            }
        }
    }
    REQUIRE(nonzero > 0);
    // pixels clearly away from the ray stay exactly zero
    for (int r = 0; r < geom.image_size; ++r)
        for (int c = 0; c < geom.image_size; ++c) {
            const double x = c - half, y = half - r;
            const double dist = std::abs(x * std::cos(theta) + y * std::sin(theta) - s);
            if (dist >= 1.5) REQUIRE(img.at(r, c) == 0.0);
        }
}

TEST_CASE("forward projection is linear") {
    const Geometry geom = desk_geometry(32, 24);
    const Image x = oracle::random_image(32, 7);
    const Image y = oracle::random_image(32, 8);
    const double a = 1.7, b = -0.4;

    Image combo(32);
    for (size_t i = 0; i < combo.pixels.size(); ++i)
        combo.pixels[i] = a * x.pixels[i] + b * y.pixels[i];

    const Sinogram lhs = forward_project(combo, geom);
    const Sinogram sx = forward_project(x, geom);
    const Sinogram sy = forward_project(y, geom);
    double max_abs = 0.0;
    for (double v : lhs.values) max_abs = std::max(max_abs, std::abs(v));
    for (size_t i = 0; i < lhs.values.size(); ++i) {
        const double want = a * sx.values[i] + b * sy.values[i];
        REQUIRE(std::abs(lhs.values[i] - want) <= 1e-9 * std::max(max_abs, 1.0));
    }
}

TEST_CASE("centrally symmetric images give the same profile at every angle") {
    const int n = 64;
    const Image blob = oracle::gaussian_blob(n, 8.0);
    const Geometry geom = desk_geometry(n, 36);
    const Sinogram sino = forward_project(blob, geom);

    std::vector<double> ref(sino.values.begin(), sino.values.begin() + geom.num_detectors);
    const double ref_norm = std::sqrt(l2_norm_sq(ref));
    for (int m = 1; m < geom.num_views; ++m) {
        double diff = 0.0;
        for (int j = 0; j < geom.num_detectors; ++j) {
            const double d = sino.at(m, j) - ref[static_cast<size_t>(j)];
            diff += d * d;
        }
        REQUIRE(std::sqrt(diff) <= 1e-3 * ref_norm);
    }
}

TEST_CASE("projection is deterministic") {
    const Geometry geom = desk_geometry(64, 30);
    const Image img = oracle::random_image(64, 42);
    const Sinogram a = forward_project(img, geom);
    const Sinogram b = forward_project(img, geom);
    REQUIRE(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0);

    const Image ba = back_project(a, geom);
    const Image bb = back_project(a, geom);
    REQUIRE(std::memcmp(ba.pixels.data(), bb.pixels.data(), ba.pixels.size() * sizeof(double)) == 0);
}

TEST_CASE("dimension mismatches are rejected") {
    const Geometry geom = desk_geometry(64, 30);
    REQUIRE_THROWS_AS(forward_project(Image(32), geom), std::invalid_argument);
    REQUIRE_THROWS_AS(back_project(Sinogram(30, 64), geom), std::invalid_argument);

    Geometry bad = geom;
    bad.num_detectors = 64;  // does not cover the diagonal
    REQUIRE_THROWS_AS(forward_project(Image(64), bad), std::invalid_argument);
}
