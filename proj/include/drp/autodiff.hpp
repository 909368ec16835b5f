#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "drp/types.hpp"

namespace drp {

/**
 * N-dimensional real array (up to 4 axes, row-major) participating in
 * reverse-mode autodiff. Handle semantics: copies share storage. A gradient
 * buffer of the same shape exists iff requires_grad is set.
 */
class Tensor {
public:
    struct Impl {
        std::vector<int> shape;
        std::vector<double> data;
        std::vector<double> grad;
        bool requires_grad = false;
        bool leaf = true;
        std::string name;
    };

    Tensor() = default;

    Tensor(std::vector<int> shape, bool requires_grad = false, std::string name = {}) {
        if (shape.empty() || shape.size() > 4)
            throw std::invalid_argument("Tensor: rank must be 1..4");
        for (int e : shape)
            if (e <= 0) throw std::invalid_argument("Tensor: extents must be positive");
        impl_ = std::make_shared<Impl>();
        impl_->shape = std::move(shape);
        const size_t n = static_cast<size_t>(
            std::accumulate(impl_->shape.begin(), impl_->shape.end(), int64_t{1},
                            [](int64_t a, int b) { return a * b; }));
        impl_->data.assign(n, 0.0);
        impl_->requires_grad = requires_grad;
        if (requires_grad) impl_->grad.assign(n, 0.0);
        impl_->name = std::move(name);
    }

    static Tensor from_vector(std::vector<int> shape, std::vector<double> values,
                              bool requires_grad = false, std::string name = {}) {
        Tensor t(std::move(shape), requires_grad, std::move(name));
        if (values.size() != t.numel())
            throw std::invalid_argument("Tensor::from_vector: value count does not match shape");
        t.impl_->data = std::move(values);
        return t;
    }

    static Tensor from_image(const Image& img, bool requires_grad = false, std::string name = {}) {
        Tensor t({1, 1, img.size, img.size}, requires_grad, std::move(name));
        t.impl_->data = img.pixels;
        return t;
    }

    static Tensor from_sinogram(const Sinogram& s, bool requires_grad = false,
                                std::string name = {}) {
        Tensor t({1, 1, s.num_views, s.num_detectors}, requires_grad, std::move(name));
        t.impl_->data = s.values;
        return t;
    }

    Image to_image() const {
        const auto& sh = shape();
        if (!((sh.size() == 4 && sh[0] == 1 && sh[1] == 1 && sh[2] == sh[3]) ||
              (sh.size() == 2 && sh[0] == sh[1])))
            throw std::invalid_argument("Tensor::to_image: not a square single-channel tensor");
        Image img(sh[sh.size() - 1]);
        img.pixels = impl_->data;
        return img;
    }

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    size_t numel() const { return impl_->data.size(); }
    int extent(int axis) const { return impl_->shape[static_cast<size_t>(axis)]; }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& values() { return impl_->data; }
    const std::vector<double>& values() const { return impl_->data; }

    bool requires_grad() const { return impl_->requires_grad; }
    bool is_leaf() const { return impl_->leaf; }
    const std::string& name() const { return impl_->name; }

    double* grad() { return impl_->grad.data(); }
    const double* grad() const { return impl_->grad.data(); }
    std::vector<double>& grad_values() { return impl_->grad; }
    const std::vector<double>& grad_values() const { return impl_->grad; }

    void zero_grad() {
        if (impl_->requires_grad) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }

    double item() const {
        if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor is not scalar");
        return impl_->data[0];
    }

    Impl& impl() { return *impl_; }
    const Impl& impl() const { return *impl_; }
    const std::shared_ptr<Impl>& handle() const { return impl_; }

private:
    std::shared_ptr<Impl> impl_;
};

/**
 * Tape of executed operations. backward() replays it in exact reverse
 * execution order, accumulating gradients additively into every
 * requires_grad tensor. Leaf gradients accumulate across repeated backward
 * calls; intermediate gradients are refreshed per call.
 */
class Graph {
public:
    void record(std::shared_ptr<Tensor::Impl> out, std::function<void()> fn) {
        nodes_.push_back({std::move(out), std::move(fn)});
    }

    void backward(const Tensor& loss) {
        if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
        if (!loss.requires_grad())
            throw std::invalid_argument("backward: loss does not require gradients");
        for (auto& node : nodes_)
            if (!node.out->leaf) std::fill(node.out->grad.begin(), node.out->grad.end(), 0.0);
        loss.handle()->grad[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->fn();
    }

    size_t num_nodes() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        std::shared_ptr<Tensor::Impl> out;
        std::function<void()> fn;
    };
    std::vector<Node> nodes_;
};

namespace detail {

inline Tensor make_output(std::vector<int> shape, bool requires_grad, std::string name) {
    Tensor t(std::move(shape), requires_grad, std::move(name));
    t.impl().leaf = false;
    return t;
}

inline void check_finite(const Tensor& t, const std::string& op) {
    for (double v : t.values())
        if (!std::isfinite(v))
            throw std::runtime_error("autodiff: op '" + op + "' produced a non-finite value");
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": operand shapes differ");
}

// index/weight pairs for 2x bilinear upsampling of one axis
struct LerpTap {
    int i0, i1;
    double w0, w1;
};

inline std::vector<LerpTap> upsample_taps(int out_n) {
    const int in_n = out_n / 2;
    std::vector<LerpTap> taps(static_cast<size_t>(out_n));
    for (int o = 0; o < out_n; ++o) {
        const double src = (o + 0.5) / 2.0 - 0.5;
        double fl = std::floor(src);
        int i0 = static_cast<int>(fl);
        double f = src - fl;
        if (i0 < 0) {
            i0 = 0;
            f = 0.0;
        }
        int i1 = i0 + 1;
        if (i1 > in_n - 1) {
            i1 = in_n - 1;
            f = 0.0;
        }
        taps[static_cast<size_t>(o)] = {i0, i1, 1.0 - f, f};
    }
    return taps;
}

}  // namespace detail

// ------------------------------------------------------------ elementwise

inline Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out = detail::make_output(a.shape(), rg, "add");
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    detail::check_finite(out, "add");
    if (rg) {
        auto ai = a.handle(), bi = b.handle(), oi = out.handle();
        g.record(oi, [ai, bi, oi] {
            for (size_t i = 0; i < oi->grad.size(); ++i) {
                if (ai->requires_grad) ai->grad[i] += oi->grad[i];
                if (bi->requires_grad) bi->grad[i] += oi->grad[i];
            }
        });
    }
    return out;
}

inline Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out = detail::make_output(a.shape(), rg, "sub");
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    detail::check_finite(out, "sub");
    if (rg) {
        auto ai = a.handle(), bi = b.handle(), oi = out.handle();
        g.record(oi, [ai, bi, oi] {
            for (size_t i = 0; i < oi->grad.size(); ++i) {
                if (ai->requires_grad) ai->grad[i] += oi->grad[i];
                if (bi->requires_grad) bi->grad[i] -= oi->grad[i];
            }
        });
    }
    return out;
}

inline Tensor scale(Graph& g, const Tensor& a, double c) {
    const bool rg = a.requires_grad();
    Tensor out = detail::make_output(a.shape(), rg, "scale");
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = c * a.data()[i];
    detail::check_finite(out, "scale");
    if (rg) {
        auto ai = a.handle();
        auto oi = out.handle();
        g.record(oi, [ai, oi, c] {
            for (size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += c * oi->grad[i];
        });
    }
    return out;
}

/** Elementwise max(0, x); sub-gradient at 0 is 0. */
inline Tensor relu(Graph& g, const Tensor& a) {
    const bool rg = a.requires_grad();
    Tensor out = detail::make_output(a.shape(), rg, "relu");
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    if (rg) {
        auto ai = a.handle();
        auto oi = out.handle();
        g.record(oi, [ai, oi] {
            for (size_t i = 0; i < oi->grad.size(); ++i)
                if (ai->data[i] > 0.0) ai->grad[i] += oi->grad[i];
        });
    }
    return out;
}

// -------------------------------------------------------------- reductions

inline Tensor sum(Graph& g, const Tensor& a) {
    const bool rg = a.requires_grad();
    Tensor out = detail::make_output({1}, rg, "sum");
    double s = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) s += a.data()[i];
    out.data()[0] = s;
    detail::check_finite(out, "sum");
    if (rg) {
        auto ai = a.handle();
        auto oi = out.handle();
        g.record(oi, [ai, oi] {
            const double go = oi->grad[0];
            for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += go;
        });
    }
    return out;
}

inline Tensor sum_squares(Graph& g, const Tensor& a) {
    const bool rg = a.requires_grad();
    Tensor out = detail::make_output({1}, rg, "sum_squares");
    double s = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) s += a.data()[i] * a.data()[i];
    out.data()[0] = s;
    detail::check_finite(out, "sum_squares");
    if (rg) {
        auto ai = a.handle();
        auto oi = out.handle();
        g.record(oi, [ai, oi] {
            const double go = oi->grad[0];
            for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += 2.0 * ai->data[i] * go;
        });
    }
    return out;
}

// ------------------------------------------------------------- convolution

/**
 * 2-D cross-correlation with zero padding.
 * input [n, ci, h, w], weight [co, ci, kh, kw], bias [co];
 * output [n, co, (h+2p-kh)/s+1, (w+2p-kw)/s+1].
 */
inline Tensor conv2d(Graph& g, const Tensor& input, const Tensor& weight, const Tensor& bias,
                     int stride = 1, int padding = 0, const std::string& label = "conv2d") {
    const auto& is = input.shape();
    const auto& ws = weight.shape();
    if (is.size() != 4 || ws.size() != 4)
        throw std::invalid_argument(label + ": input and weight must be rank 4");
    if (bias.shape().size() != 1 || bias.extent(0) != ws[0])
        throw std::invalid_argument(label + ": bias length must equal output channels");
    if (is[1] != ws[1])
        throw std::invalid_argument(label + ": input channels " + std::to_string(is[1]) +
                                    " != weight channels " + std::to_string(ws[1]));
    if (stride < 1 || padding < 0) throw std::invalid_argument(label + ": bad stride/padding");

    const int n = is[0], ci = is[1], h = is[2], w = is[3];
    const int co = ws[0], kh = ws[2], kw = ws[3];
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;
    if (oh < 1 || ow < 1) throw std::invalid_argument(label + ": kernel larger than padded input");

    const bool rg = input.requires_grad() || weight.requires_grad() || bias.requires_grad();
    Tensor out = detail::make_output({n, co, oh, ow}, rg, label);

    const double* in = input.data();
    const double* wt = weight.data();
    const double* bs = bias.data();
    double* ot = out.data();

    const auto in_plane = static_cast<size_t>(h) * w;
    const auto out_plane = static_cast<size_t>(oh) * ow;

    for (int b = 0; b < n; ++b) {
        for (int oc = 0; oc < co; ++oc) {
            double* oplane = ot + (static_cast<size_t>(b) * co + oc) * out_plane;
            std::fill(oplane, oplane + out_plane, bs[oc]);
            for (int ic = 0; ic < ci; ++ic) {
                const double* iplane = in + (static_cast<size_t>(b) * ci + ic) * in_plane;
                const double* wbase =
                    wt + (static_cast<size_t>(oc) * ci + ic) * static_cast<size_t>(kh) * kw;
                for (int ki = 0; ki < kh; ++ki) {
                    for (int kj = 0; kj < kw; ++kj) {
                        const double wv = wbase[ki * kw + kj];
                        if (wv == 0.0) continue;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride + ki - padding;
                            if (iy < 0 || iy >= h) continue;
                            const double* irow = iplane + static_cast<size_t>(iy) * w;
                            double* orow = oplane + static_cast<size_t>(oy) * ow;
                            if (stride == 1) {
                                const int off = kj - padding;
                                const int lo = std::max(0, -off);
                                const int hi = std::min(ow, w - off);
                                for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * irow[ox + off];
                            } else {
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int ix = ox * stride + kj - padding;
                                    if (ix >= 0 && ix < w) orow[ox] += wv * irow[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    detail::check_finite(out, label);

    if (rg) {
        auto ii = input.handle();
        auto wi = weight.handle();
        auto bi = bias.handle();
        auto oi = out.handle();
        g.record(oi, [ii, wi, bi, oi, n, ci, h, w, co, kh, kw, oh, ow, stride, padding] {
            const auto in_plane2 = static_cast<size_t>(h) * w;
            const auto out_plane2 = static_cast<size_t>(oh) * ow;
            const double* go = oi->grad.data();
            for (int b = 0; b < n; ++b) {
                for (int oc = 0; oc < co; ++oc) {
                    const double* gplane = go + (static_cast<size_t>(b) * co + oc) * out_plane2;
                    if (bi->requires_grad) {
                        double s = 0.0;
                        for (size_t i = 0; i < out_plane2; ++i) s += gplane[i];
                        bi->grad[static_cast<size_t>(oc)] += s;
                    }
                    for (int ic = 0; ic < ci; ++ic) {
                        const size_t woff =
                            (static_cast<size_t>(oc) * ci + ic) * static_cast<size_t>(kh) * kw;
                        const double* iplane =
                            ii->data.data() + (static_cast<size_t>(b) * ci + ic) * in_plane2;
                        double* giplane = ii->requires_grad
                                              ? ii->grad.data() +
                                                    (static_cast<size_t>(b) * ci + ic) * in_plane2
                                              : nullptr;
                        for (int ki = 0; ki < kh; ++ki) {
                            for (int kj = 0; kj < kw; ++kj) {
                                const double wv = wi->data[woff + static_cast<size_t>(ki) * kw + kj];
                                double gw = 0.0;
                                for (int oy = 0; oy < oh; ++oy) {
                                    const int iy = oy * stride + ki - padding;
                                    if (iy < 0 || iy >= h) continue;
                                    const double* grow = gplane + static_cast<size_t>(oy) * ow;
                                    const double* irow = iplane + static_cast<size_t>(iy) * w;
                                    double* girow =
                                        giplane ? giplane + static_cast<size_t>(iy) * w : nullptr;
                                    if (stride == 1) {
                                        const int off = kj - padding;
                                        const int lo = std::max(0, -off);
                                        const int hi = std::min(ow, w - off);
                                        if (wi->requires_grad)
                                            for (int ox = lo; ox < hi; ++ox)
                                                gw += grow[ox] * irow[ox + off];
                                        if (girow)
                                            for (int ox = lo; ox < hi; ++ox)
                                                girow[ox + off] += wv * grow[ox];
                                    } else {
                                        for (int ox = 0; ox < ow; ++ox) {
                                            const int ix = ox * stride + kj - padding;
                                            if (ix < 0 || ix >= w) continue;
                                            if (wi->requires_grad) gw += grow[ox] * irow[ix];
                                            if (girow) girow[ix] += wv * grow[ox];
                                        }
                                    }
                                }
                                if (wi->requires_grad)
                                    wi->grad[woff + static_cast<size_t>(ki) * kw + kj] += gw;
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ----------------------------------------------------------- normalization

/**
 * Batch normalization over (batch, height, width) per channel, always using
 * batch statistics, followed by the gamma/beta affine map. Differentiable
 * through the statistics.
 */
inline Tensor batch_norm(Graph& g, const Tensor& input, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5, const std::string& label = "batch_norm") {
    const auto& is = input.shape();
    if (is.size() != 4) throw std::invalid_argument(label + ": input must be rank 4");
    const int n = is[0], c = is[1], h = is[2], w = is[3];
    if (gamma.shape().size() != 1 || gamma.extent(0) != c || beta.shape().size() != 1 ||
        beta.extent(0) != c)
        throw std::invalid_argument(label + ": gamma/beta length must equal channel count");

    const bool rg = input.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    Tensor out = detail::make_output(is, rg, label);

    const size_t plane = static_cast<size_t>(h) * w;
    const size_t m = static_cast<size_t>(n) * plane;  // elements per channel

    auto xhat = std::make_shared<std::vector<double>>(input.numel());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(c));

    for (int ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        for (int b = 0; b < n; ++b) {
            const double* p = input.data() + (static_cast<size_t>(b) * c + ch) * plane;
            for (size_t i = 0; i < plane; ++i) mean += p[i];
        }
        mean /= double(m);
        double var = 0.0;
        for (int b = 0; b < n; ++b) {
            const double* p = input.data() + (static_cast<size_t>(b) * c + ch) * plane;
            for (size_t i = 0; i < plane; ++i) {
                const double d = p[i] - mean;
                var += d * d;
            }
        }
        var /= double(m);
        const double is_ = 1.0 / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(ch)] = is_;
        const double gm = gamma.data()[ch], bt = beta.data()[ch];
        for (int b = 0; b < n; ++b) {
            const size_t off = (static_cast<size_t>(b) * c + ch) * plane;
            const double* p = input.data() + off;
            double* xh = xhat->data() + off;
            double* o = out.data() + off;
            for (size_t i = 0; i < plane; ++i) {
                xh[i] = (p[i] - mean) * is_;
                o[i] = gm * xh[i] + bt;
            }
        }
    }
    detail::check_finite(out, label);

    if (rg) {
        auto ii = input.handle();
        auto gi = gamma.handle();
        auto bi = beta.handle();
        auto oi = out.handle();
        g.record(oi, [ii, gi, bi, oi, xhat, inv_std, n, c, plane, m] {
            const double* go = oi->grad.data();
            for (int ch = 0; ch < c; ++ch) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int b = 0; b < n; ++b) {
                    const size_t off = (static_cast<size_t>(b) * c + ch) * plane;
                    for (size_t i = 0; i < plane; ++i) {
                        sum_dy += go[off + i];
                        sum_dy_xhat += go[off + i] * (*xhat)[off + i];
                    }
                }
                if (gi->requires_grad) gi->grad[static_cast<size_t>(ch)] += sum_dy_xhat;
                if (bi->requires_grad) bi->grad[static_cast<size_t>(ch)] += sum_dy;
                if (ii->requires_grad) {
                    const double gm = gi->data[static_cast<size_t>(ch)];
                    const double is_ = (*inv_std)[static_cast<size_t>(ch)];
                    const double mean_dy = sum_dy / double(m);
                    const double mean_dy_xhat = sum_dy_xhat / double(m);
                    for (int b = 0; b < n; ++b) {
                        const size_t off = (static_cast<size_t>(b) * c + ch) * plane;
                        for (size_t i = 0; i < plane; ++i)
                            ii->grad[off + i] += gm * is_ *
                                                 (go[off + i] - mean_dy -
                                                  (*xhat)[off + i] * mean_dy_xhat);
                    }
                }
            }
        });
    }
    return out;
}

// -------------------------------------------------------------- resampling

/** Stride-2 average pooling; spatial extents must be even. */
inline Tensor downsample2(Graph& g, const Tensor& input) {
    const auto& is = input.shape();
    if (is.size() != 4) throw std::invalid_argument("downsample2: input must be rank 4");
    const int n = is[0], c = is[1], h = is[2], w = is[3];
    if (h % 2 != 0 || w % 2 != 0)
        throw std::invalid_argument("downsample2: spatial extents must be even");
    const int oh = h / 2, ow = w / 2;
    const bool rg = input.requires_grad();
    Tensor out = detail::make_output({n, c, oh, ow}, rg, "downsample2");

    const size_t planes = static_cast<size_t>(n) * c;
    for (size_t p = 0; p < planes; ++p) {
        const double* ip = input.data() + p * static_cast<size_t>(h) * w;
        double* op = out.data() + p * static_cast<size_t>(oh) * ow;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                op[static_cast<size_t>(y) * ow + x] =
                    0.25 * (ip[static_cast<size_t>(2 * y) * w + 2 * x] +
                            ip[static_cast<size_t>(2 * y) * w + 2 * x + 1] +
                            ip[static_cast<size_t>(2 * y + 1) * w + 2 * x] +
                            ip[static_cast<size_t>(2 * y + 1) * w + 2 * x + 1]);
    }
    if (rg) {
        auto ii = input.handle();
        auto oi = out.handle();
        g.record(oi, [ii, oi, planes, h, w, oh, ow] {
            for (size_t p = 0; p < planes; ++p) {
                double* gip = ii->grad.data() + p * static_cast<size_t>(h) * w;
                const double* gop = oi->grad.data() + p * static_cast<size_t>(oh) * ow;
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x) {
                        const double gv = 0.25 * gop[static_cast<size_t>(y) * ow + x];
                        gip[static_cast<size_t>(2 * y) * w + 2 * x] += gv;
                        gip[static_cast<size_t>(2 * y) * w + 2 * x + 1] += gv;
                        gip[static_cast<size_t>(2 * y + 1) * w + 2 * x] += gv;
                        gip[static_cast<size_t>(2 * y + 1) * w + 2 * x + 1] += gv;
                    }
            }
        });
    }
    return out;
}

/** 2x bilinear upsampling (edge-clamped). */
inline Tensor upsample2(Graph& g, const Tensor& input) {
    const auto& is = input.shape();
    if (is.size() != 4) throw std::invalid_argument("upsample2: input must be rank 4");
    const int n = is[0], c = is[1], h = is[2], w = is[3];
    const int oh = 2 * h, ow = 2 * w;
    const bool rg = input.requires_grad();
    Tensor out = detail::make_output({n, c, oh, ow}, rg, "upsample2");

    const auto ytaps = detail::upsample_taps(oh);
    const auto xtaps = detail::upsample_taps(ow);
    const size_t planes = static_cast<size_t>(n) * c;
    for (size_t p = 0; p < planes; ++p) {
        const double* ip = input.data() + p * static_cast<size_t>(h) * w;
        double* op = out.data() + p * static_cast<size_t>(oh) * ow;
        for (int y = 0; y < oh; ++y) {
            const auto& ty = ytaps[static_cast<size_t>(y)];
            const double* r0 = ip + static_cast<size_t>(ty.i0) * w;
            const double* r1 = ip + static_cast<size_t>(ty.i1) * w;
            double* orow = op + static_cast<size_t>(y) * ow;
            for (int x = 0; x < ow; ++x) {
                const auto& tx = xtaps[static_cast<size_t>(x)];
                orow[x] = ty.w0 * (tx.w0 * r0[tx.i0] + tx.w1 * r0[tx.i1]) +
                          ty.w1 * (tx.w0 * r1[tx.i0] + tx.w1 * r1[tx.i1]);
            }
        }
    }
    if (rg) {
        auto ii = input.handle();
        auto oi = out.handle();
        g.record(oi, [ii, oi, planes, h, w, oh, ow, ytaps, xtaps] {
            for (size_t p = 0; p < planes; ++p) {
                double* gip = ii->grad.data() + p * static_cast<size_t>(h) * w;
                const double* gop = oi->grad.data() + p * static_cast<size_t>(oh) * ow;
                for (int y = 0; y < oh; ++y) {
                    const auto& ty = ytaps[static_cast<size_t>(y)];
                    const double* grow = gop + static_cast<size_t>(y) * ow;
                    for (int x = 0; x < ow; ++x) {
                        const auto& tx = xtaps[static_cast<size_t>(x)];
                        const double gv = grow[x];
                        gip[static_cast<size_t>(ty.i0) * w + tx.i0] += ty.w0 * tx.w0 * gv;
                        gip[static_cast<size_t>(ty.i0) * w + tx.i1] += ty.w0 * tx.w1 * gv;
                        gip[static_cast<size_t>(ty.i1) * w + tx.i0] += ty.w1 * tx.w0 * gv;
                        gip[static_cast<size_t>(ty.i1) * w + tx.i1] += ty.w1 * tx.w1 * gv;
                    }
                }
            }
        });
    }
    return out;
}

/** Concatenate along the channel axis. */
inline Tensor concat_channels(Graph& g, const Tensor& a, const Tensor& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 4 || bs.size() != 4 || as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3])
        throw std::invalid_argument("concat_channels: shapes must match outside the channel axis");
    const int n = as[0], ca = as[1], cb = bs[1], h = as[2], w = as[3];
    const bool rg = a.requires_grad() || b.requires_grad();
    Tensor out = detail::make_output({n, ca + cb, h, w}, rg, "concat");

    const size_t plane = static_cast<size_t>(h) * w;
    for (int bn = 0; bn < n; ++bn) {
        std::copy(a.data() + static_cast<size_t>(bn) * ca * plane,
                  a.data() + static_cast<size_t>(bn + 1) * ca * plane,
                  out.data() + static_cast<size_t>(bn) * (ca + cb) * plane);
        std::copy(b.data() + static_cast<size_t>(bn) * cb * plane,
                  b.data() + static_cast<size_t>(bn + 1) * cb * plane,
                  out.data() + (static_cast<size_t>(bn) * (ca + cb) + ca) * plane);
    }
    if (rg) {
        auto ai = a.handle(), bi = b.handle(), oi = out.handle();
        g.record(oi, [ai, bi, oi, n, ca, cb, plane] {
            for (int bn = 0; bn < n; ++bn) {
                const double* g0 = oi->grad.data() + static_cast<size_t>(bn) * (ca + cb) * plane;
                if (ai->requires_grad) {
                    double* ga = ai->grad.data() + static_cast<size_t>(bn) * ca * plane;
                    for (size_t i = 0; i < static_cast<size_t>(ca) * plane; ++i) ga[i] += g0[i];
                }
                if (bi->requires_grad) {
                    double* gb = bi->grad.data() + static_cast<size_t>(bn) * cb * plane;
                    const double* g1 = g0 + static_cast<size_t>(ca) * plane;
                    for (size_t i = 0; i < static_cast<size_t>(cb) * plane; ++i) gb[i] += g1[i];
                }
            }
        });
    }
    return out;
}

// -------------------------------------------------------------------- Adam

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/** Per-parameter Adam moments plus the step counter. */
class AdamState {
public:
    AdamState() = default;

    explicit AdamState(std::vector<Tensor> params, AdamConfig cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        for (const auto& p : params_) {
            if (!p.requires_grad())
                throw std::invalid_argument("AdamState: parameter '" + p.name() +
                                            "' does not require gradients");
            m_.emplace_back(p.numel(), 0.0);
            v_.emplace_back(p.numel(), 0.0);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    std::vector<Tensor>& params() { return params_; }
    const std::vector<Tensor>& params() const { return params_; }
    long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

    friend void adam_step(AdamState& st);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
    AdamConfig cfg_;
};

/** One Adam update over all tracked parameters, using their grad buffers. */
inline void adam_step(AdamState& st) {
    st.t_ += 1;
    const auto& c = st.cfg_;
    const double bc1 = 1.0 - std::pow(c.beta1, double(st.t_));
    const double bc2 = 1.0 - std::pow(c.beta2, double(st.t_));
    for (size_t pi = 0; pi < st.params_.size(); ++pi) {
        Tensor& p = st.params_[pi];
        const double* grd = p.grad();
        double* dat = p.data();
        auto& m = st.m_[pi];
        auto& v = st.v_[pi];
        for (size_t i = 0; i < p.numel(); ++i) {
            const double gv = grd[i];
            if (!std::isfinite(gv))
                throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                         (p.name().empty() ? std::to_string(pi) : p.name()) + "'");
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gv;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gv * gv;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            dat[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

}  // namespace drp
