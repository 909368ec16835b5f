#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "drp/types.hpp"

namespace drp {

/** Peak signal-to-noise ratio in dB; +inf for identical images. */
inline double psnr(const Image& x, const Image& ref, double peak = 1.0) {
    if (x.size != ref.size) throw std::invalid_argument("psnr: image sizes differ");
    if (peak <= 0.0) throw std::invalid_argument("psnr: peak must be positive");
    double mse = 0.0;
    for (size_t i = 0; i < x.pixels.size(); ++i) {
        const double d = x.pixels[i] - ref.pixels[i];
        mse += d * d;
    }
    mse /= double(x.pixels.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

/** Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
 *  dynamic range taken from ref, mean over valid window positions. */
inline double ssim(const Image& x, const Image& ref) {
    if (x.size != ref.size) throw std::invalid_argument("ssim: image sizes differ");
    const int win = 11, halfw = 5;
    const int n = x.size;
    if (n < win) throw std::invalid_argument("ssim: image smaller than 11x11 window");

    static const std::vector<double> weights = [] {
        std::vector<double> w(win * win);
        const double sigma = 1.5;
        double sum = 0.0;
        for (int i = 0; i < win; ++i)
            for (int j = 0; j < win; ++j) {
                const double dy = i - halfw, dx = j - halfw;
                w[i * win + j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
                sum += w[i * win + j];
            }
        for (double& v : w) v /= sum;
        return w;
    }();

    const auto [mn, mx] = std::minmax_element(ref.pixels.begin(), ref.pixels.end());
    const double range = *mx - *mn;
    const double c1 = 0.01 * 0.01 * range * range;
    const double c2 = 0.03 * 0.03 * range * range;

    double total = 0.0;
    int count = 0;
    for (int r = halfw; r < n - halfw; ++r) {
        for (int c = halfw; c < n - halfw; ++c) {
            double mx_ = 0, my_ = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double w = weights[i * win + j];
                    mx_ += w * x.at(r + i - halfw, c + j - halfw);
                    my_ += w * ref.at(r + i - halfw, c + j - halfw);
                }
            double vx = 0, vy = 0, cov = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double w = weights[i * win + j];
                    const double dx = x.at(r + i - halfw, c + j - halfw) - mx_;
                    const double dy = ref.at(r + i - halfw, c + j - halfw) - my_;
                    vx += w * dx * dx;
                    vy += w * dy * dy;
                    cov += w * dx * dy;
                }
            const double s = ((2 * mx_ * my_ + c1) * (2 * cov + c2)) /
                             ((mx_ * mx_ + my_ * my_ + c1) * (vx + vy + c2));
            total += s;
            ++count;
        }
    }
    return total / count;
}

/** Shannon entropy (bits) of the pixel histogram over [min, max]. */
inline double entropy(const Image& x, int bins = 256) {
    if (bins < 2) throw std::invalid_argument("entropy: bins must be >= 2");
    const auto [mn_it, mx_it] = std::minmax_element(x.pixels.begin(), x.pixels.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx == mn) return 0.0;
    std::vector<long> hist(static_cast<size_t>(bins), 0);
    const double scale = bins / (mx - mn);
    for (double v : x.pixels) {
        int b = static_cast<int>((v - mn) * scale);
        b = std::clamp(b, 0, bins - 1);
        ++hist[static_cast<size_t>(b)];
    }
    const double total = double(x.pixels.size());
    double h = 0.0;
    for (long cnt : hist) {
        if (cnt == 0) continue;
        const double q = cnt / total;
        h -= q * std::log2(q);
    }
    return h;
}

}  // namespace drp
