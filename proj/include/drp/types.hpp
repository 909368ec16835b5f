#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace drp {

/** Parallel-beam acquisition: view angles uniform over [0, pi), unit pixels. */
struct Geometry {
    int image_size = 64;
    int num_views = 60;
    int num_detectors = 96;
    double detector_spacing = 1.0;
    // Offset of the detector array center from the rotation axis, in bins.
    double detector_offset = 0.0;

    double angle(int view) const { return view * M_PI / num_views; }

    std::vector<double> angles() const {
        std::vector<double> a(static_cast<size_t>(num_views));
        for (int m = 0; m < num_views; ++m) a[static_cast<size_t>(m)] = angle(m);
        return a;
    }

    // Signed distance of detector bin j from the rotation axis.
    double detector_pos(int j) const {
        return (j - 0.5 * (num_detectors - 1) - detector_offset) * detector_spacing;
    }

    void validate() const {
        if (image_size <= 0) throw std::invalid_argument("Geometry: image_size must be positive");
        if (num_views <= 0) throw std::invalid_argument("Geometry: num_views must be positive");
        if (num_detectors <= 0) throw std::invalid_argument("Geometry: num_detectors must be positive");
        if (detector_spacing <= 0.0)
            throw std::invalid_argument("Geometry: detector_spacing must be positive");
        if (num_detectors * detector_spacing < std::sqrt(2.0) * image_size)
            throw std::invalid_argument(
                "Geometry: detector array (num_detectors * detector_spacing) must cover the "
                "image diagonal (sqrt(2) * image_size)");
    }
};

/** Square grayscale image, row-major, attenuation per unit length. */
struct Image {
    int size = 0;
    std::vector<double> pixels;

    Image() = default;
    explicit Image(int n) : size(n), pixels(static_cast<size_t>(n) * n, 0.0) {}

    double& at(int r, int c) { return pixels[static_cast<size_t>(r) * size + c]; }
    double at(int r, int c) const { return pixels[static_cast<size_t>(r) * size + c]; }
    size_t numel() const { return pixels.size(); }
};

/** views x detectors grid of line integrals. */
struct Sinogram {
    int num_views = 0;
    int num_detectors = 0;
    std::vector<double> values;

    Sinogram() = default;
    Sinogram(int views, int detectors)
        : num_views(views),
          num_detectors(detectors),
          values(static_cast<size_t>(views) * detectors, 0.0) {}

    double& at(int v, int d) { return values[static_cast<size_t>(v) * num_detectors + d]; }
    double at(int v, int d) const { return values[static_cast<size_t>(v) * num_detectors + d]; }
    size_t numel() const { return values.size(); }
};

inline void ensure_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::runtime_error(std::string(what) + ": non-finite value");
}

/** Seeded RNG with a pinned gaussian sampler (Box-Muller), independent of
 *  the standard library's unspecified distribution algorithms. */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {  // [0, 1)
        return (engine_() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline double l2_norm_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace drp
