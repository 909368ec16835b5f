#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "drp/types.hpp"

namespace drp {

enum class FilterKind { RamLak, SheppLogan };

namespace detail {

inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2 * M_PI / double(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= double(n);
}

inline size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Filtered projections are sinc-upsampled by this factor before the linear
// interpolation in the backprojector; they are band-limited, so this is the
// matching interpolator and it is worth ~2 dB at desk scale.
constexpr int kFilterUpsample = 4;

// Frequency response of the band-limited ramp, built from its spatial-domain
// taps (h[0] = 1/(4 tau^2), odd taps -1/(pi n tau)^2) to avoid the DC bias of
// sampling |omega| directly.
inline std::vector<double> ramp_response(size_t p, double tau, FilterKind kind) {
    std::vector<std::complex<double>> h(p, 0.0);
    h[0] = 1.0 / (4.0 * tau * tau);
    for (size_t i = 1; i <= p / 2; ++i) {
        double v = 0.0;
        if (i % 2 == 1) {
            const double d = M_PI * double(i) * tau;
            v = -1.0 / (d * d);
        }
        h[i] = v;
        h[p - i] = v;
    }
    fft_radix2(h, false);
    std::vector<double> response(p);
    for (size_t k = 0; k < p; ++k) {
        double r = h[k].real();
        if (kind == FilterKind::SheppLogan && k != 0) {
            const double f = double(std::min(k, p - k)) / double(p);  // cycles/sample, <= 1/2
            r *= std::sin(M_PI * f) / (M_PI * f);
        }
        response[k] = r;
    }
    return response;
}

}  // namespace detail

/**
 * Filtered back-projection: per-view ramp filtering in the frequency domain
 * (zero-padded to the next power of two >= 2W) followed by pixel-driven
 * backprojection scaled by pi / num_views.
 */
inline Image fbp(const Sinogram& sino, const Geometry& geom, FilterKind filter = FilterKind::RamLak) {
    geom.validate();
    if (sino.num_views != geom.num_views || sino.num_detectors != geom.num_detectors)
        throw std::invalid_argument("fbp: sinogram dims do not match geometry");

    const int n = geom.image_size;
    const int views = geom.num_views;
    const int dets = geom.num_detectors;
    const double tau = geom.detector_spacing;
    const size_t p = detail::next_pow2(2 * static_cast<size_t>(dets));
    const std::vector<double> response = detail::ramp_response(p, tau, filter);
    const int up = detail::kFilterUpsample;
    const size_t pu = p * static_cast<size_t>(up);
    const int fine = dets * up;

    // filter every view, then sinc-upsample via spectrum zero-insertion
    std::vector<double> filtered(static_cast<size_t>(views) * fine);
    std::vector<std::complex<double>> row(p), row_up(pu);
    for (int m = 0; m < views; ++m) {
        std::fill(row.begin(), row.end(), std::complex<double>(0.0, 0.0));
        for (int j = 0; j < dets; ++j) row[static_cast<size_t>(j)] = sino.at(m, j);
        detail::fft_radix2(row, false);
        for (size_t k = 0; k < p; ++k) row[k] *= response[k];
        std::fill(row_up.begin(), row_up.end(), std::complex<double>(0.0, 0.0));
        for (size_t k = 0; k < p / 2; ++k) row_up[k] = row[k];
        row_up[p / 2] = row[p / 2] * 0.5;  // split the Nyquist bin, keeps the signal real
        row_up[pu - p / 2] = row[p / 2] * 0.5;
        for (size_t k = p / 2 + 1; k < p; ++k) row_up[pu - (p - k)] = row[k];
        detail::fft_radix2(row_up, true);
        for (int j = 0; j < fine; ++j)
            filtered[static_cast<size_t>(m) * fine + j] =
                row_up[static_cast<size_t>(j)].real() * tau * up;
    }

    // pixel-driven backprojection with linear interpolation on the fine grid
    Image img(n);
    const double half = 0.5 * (n - 1);
    const double center = 0.5 * (dets - 1) + geom.detector_offset;
    const double scale = M_PI / views;
    for (int m = 0; m < views; ++m) {
        const double theta = geom.angle(m);
        const double ct = std::cos(theta), st = std::sin(theta);
        const double* q = filtered.data() + static_cast<size_t>(m) * fine;
        for (int r = 0; r < n; ++r) {
            const double y = half - r;
            for (int c = 0; c < n; ++c) {
                const double x = c - half;
                const double bin = ((x * ct + y * st) / tau + center) * up;
                const int j0 = static_cast<int>(std::floor(bin));
                const double f = bin - j0;
                double v = 0.0;
                if (j0 >= 0 && j0 < fine) v += (1.0 - f) * q[j0];
                if (j0 + 1 >= 0 && j0 + 1 < fine) v += f * q[j0 + 1];
                img.at(r, c) += v;
            }
        }
    }
    for (double& v : img.pixels) v *= scale;
    ensure_finite(img.pixels, "fbp");
    return img;
}

inline FilterKind filter_kind_from_string(const std::string& s) {
    if (s == "ram-lak") return FilterKind::RamLak;
    if (s == "shepp-logan") return FilterKind::SheppLogan;
    throw std::invalid_argument("unknown filter '" + s + "' (want ram-lak or shepp-logan)");
}

inline std::string filter_kind_to_string(FilterKind k) {
    return k == FilterKind::RamLak ? "ram-lak" : "shepp-logan";
}

}  // namespace drp
