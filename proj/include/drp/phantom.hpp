#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "drp/io.hpp"
#include "drp/types.hpp"

namespace drp {

enum class PhantomKind { SheppLogan, Disks, Squares, FromFile };

struct Phantom {
    PhantomKind kind = PhantomKind::SheppLogan;
    int size = 64;
    double lo = 0.0, hi = 1.0;  // output value range, within [0, 1]
    std::string path;           // FromFile only
};

namespace detail {

struct Ellipse {
    double value, a, b, x0, y0, phi_deg;
};

// Modified (Toft) Shepp-Logan table; values sum to [0, 1] directly.
inline const std::array<Ellipse, 10>& shepp_logan_ellipses() {
    static const std::array<Ellipse, 10> e = {{
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
    }};
    return e;
}

inline double ellipse_sum(const std::array<Ellipse, 10>& table, double x, double y) {
    double v = 0.0;
    for (const auto& e : table) {
        const double phi = e.phi_deg * M_PI / 180.0;
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double w = -dx * std::sin(phi) + dy * std::cos(phi);
        if (u * u / (e.a * e.a) + w * w / (e.b * e.b) <= 1.0) v += e.value;
    }
    return v;
}

struct Disk {
    double value, r, x0, y0;
};
struct Box {
    double value, half, x0, y0;
};

inline double disks_value(double x, double y) {
    static const std::array<Disk, 3> disks = {{
        {1.0, 0.5, 0.0, 0.0},
        {0.6, 0.15, -0.55, 0.55},
        {0.3, 0.15, 0.55, -0.55},
    }};
    double v = 0.0;
    for (const auto& d : disks) {
        const double dx = x - d.x0, dy = y - d.y0;
        if (dx * dx + dy * dy <= d.r * d.r) v += d.value;
    }
    return v;
}

inline double squares_value(double x, double y) {
    static const std::array<Box, 3> boxes = {{
        {0.8, 0.5, 0.0, 0.0},
        {0.2, 0.2, 0.0, 0.0},
        {0.5, 0.12, 0.62, -0.62},
    }};
    double v = 0.0;
    for (const auto& b : boxes)
        if (std::abs(x - b.x0) <= b.half && std::abs(y - b.y0) <= b.half) v += b.value;
    return v;
}

inline Image resample_bilinear(const GrayData& src, int n) {
    Image out(n);
    const double sx = double(src.width) / n;
    const double sy = double(src.height) / n;
    for (int r = 0; r < n; ++r) {
        const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, double(src.height - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int c = 0; c < n; ++c) {
            const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, double(src.width - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            const auto px = [&](int yy, int xx) {
                return src.pixels[static_cast<size_t>(yy) * src.width + xx];
            };
            out.at(r, c) = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) +
                           wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
        }
    }
    return out;
}

}  // namespace detail

/** Rasterize a phantom at ph.size with 4x4 supersampled edges; FromFile
 *  loads a PGM/PNG grayscale image and resamples. Output values lie in
 *  [ph.lo, ph.hi]. */
inline Image render_phantom(const Phantom& ph) {
    if (ph.size <= 0 || ph.size % 16 != 0)
        throw std::invalid_argument("render_phantom: size must be a positive multiple of 16");
    if (ph.lo < 0.0 || ph.hi > 1.0 || ph.lo > ph.hi)
        throw std::invalid_argument("render_phantom: value range must satisfy 0 <= lo <= hi <= 1");

    const int n = ph.size;
    Image img(n);

    if (ph.kind == PhantomKind::FromFile) {
        const GrayData g = read_gray_image(ph.path);
        img = detail::resample_bilinear(g, n);
    } else {
        const int ss = 4;
        const double half = n / 2.0;
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                double acc = 0.0;
                for (int i = 0; i < ss; ++i) {
                    for (int j = 0; j < ss; ++j) {
                        const double x = (c + (j + 0.5) / ss - half) / half;
                        const double y = (half - r - (i + 0.5) / ss) / half;
                        switch (ph.kind) {
                            case PhantomKind::SheppLogan:
                                acc += detail::ellipse_sum(detail::shepp_logan_ellipses(), x, y);
                                break;
                            case PhantomKind::Disks: acc += detail::disks_value(x, y); break;
                            case PhantomKind::Squares: acc += detail::squares_value(x, y); break;
                            default: break;
                        }
                    }
                }
                img.at(r, c) = acc / (ss * ss);
            }
        }
    }

    for (double& v : img.pixels) v = ph.lo + std::clamp(v, 0.0, 1.0) * (ph.hi - ph.lo);
    ensure_finite(img.pixels, "render_phantom");
    return img;
}

inline PhantomKind phantom_kind_from_string(const std::string& s) {
    if (s == "shepp-logan") return PhantomKind::SheppLogan;
    if (s == "disks") return PhantomKind::Disks;
    if (s == "squares") return PhantomKind::Squares;
    if (s.rfind("file:", 0) == 0) return PhantomKind::FromFile;
    throw std::invalid_argument("unknown phantom kind '" + s +
                                "' (want shepp-logan, disks, squares, or file:<path>)");
}

inline std::string phantom_kind_to_string(const Phantom& ph) {
    switch (ph.kind) {
        case PhantomKind::SheppLogan: return "shepp-logan";
        case PhantomKind::Disks: return "disks";
        case PhantomKind::Squares: return "squares";
        case PhantomKind::FromFile: return "file:" + ph.path;
    }
    return "";
}

}  // namespace drp
