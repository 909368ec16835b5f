#pragma once

#include <stdexcept>

#include "drp/autodiff.hpp"
#include "drp/projector.hpp"
#include "drp/types.hpp"

namespace drp {

/**
 * Forward projection as a graph op: forward pass applies the projector,
 * backward pass applies its exact adjoint to the upstream gradient.
 * [1, 1, N, N] -> [1, 1, views, detectors].
 */
inline Tensor radon_layer(Graph& g, const Tensor& img, const Geometry& geom) {
    const auto& is = img.shape();
    if (is.size() != 4 || is[0] != 1 || is[1] != 1 || is[2] != geom.image_size ||
        is[3] != geom.image_size)
        throw std::invalid_argument("radon_layer: input must be [1,1,N,N] with N = image_size");
    const bool rg = img.requires_grad();
    Tensor out = detail::make_output({1, 1, geom.num_views, geom.num_detectors}, rg, "radon");
    detail::joseph_pass<false>(geom, img.data(), out.data());
    detail::check_finite(out, "radon");
    if (rg) {
        auto ii = img.handle();
        auto oi = out.handle();
        g.record(oi, [ii, oi, geom] {
            detail::joseph_pass<true>(geom, oi->grad.data(), ii->grad.data());
        });
    }
    return out;
}

/**
 * Adjoint projection as a graph op: forward pass backprojects, backward pass
 * forward-projects the upstream gradient.
 * [1, 1, views, detectors] -> [1, 1, N, N].
 */
inline Tensor backproject_layer(Graph& g, const Tensor& sino, const Geometry& geom) {
    const auto& ss = sino.shape();
    if (ss.size() != 4 || ss[0] != 1 || ss[1] != 1 || ss[2] != geom.num_views ||
        ss[3] != geom.num_detectors)
        throw std::invalid_argument("backproject_layer: input must be [1,1,views,detectors]");
    const bool rg = sino.requires_grad();
    Tensor out = detail::make_output({1, 1, geom.image_size, geom.image_size}, rg, "backproject");
    detail::joseph_pass<true>(geom, sino.data(), out.data());
    detail::check_finite(out, "backproject");
    if (rg) {
        auto si = sino.handle();
        auto oi = out.handle();
        g.record(oi, [si, oi, geom] {
            // joseph_pass<false> assigns ray sums; accumulate via a scratch buffer
            std::vector<double> tmp(si->grad.size(), 0.0);
            detail::joseph_pass<false>(geom, oi->grad.data(), tmp.data());
            for (size_t i = 0; i < tmp.size(); ++i) si->grad[i] += tmp[i];
        });
    }
    return out;
}

}  // namespace drp
