#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "drp/fbp.hpp"
#include "drp/metrics.hpp"
#include "drp/projector.hpp"
#include "drp/types.hpp"

namespace drp {

struct IterConfig {
    int max_iters = 200;
    double step_beta = 0.25;
    bool nonneg = true;
    double tv_weight = 0.1;  // ADMM only
    double admm_rho = 1.0;   // ADMM only
    double tol = 1e-6;       // relative loss-change stopping threshold

    void validate() const {
        if (max_iters < 1) throw std::invalid_argument("IterConfig: max_iters must be >= 1");
        if (step_beta <= 0.0) throw std::invalid_argument("IterConfig: step_beta must be positive");
        if (tv_weight < 0.0) throw std::invalid_argument("IterConfig: tv_weight must be >= 0");
        if (admm_rho <= 0.0) throw std::invalid_argument("IterConfig: admm_rho must be positive");
        if (tol < 0.0) throw std::invalid_argument("IterConfig: tol must be >= 0");
    }
};

struct IterResult {
    Image image;
    std::vector<double> loss;             // ||Ax - p||^2 per recorded iterate
    std::vector<double> psnr;             // vs reference, when one was given
    std::vector<double> aug_lagrangian;   // ADMM only
    std::vector<double> primal_residual;  // ADMM only, ||Dx - v||_2
};

/** Anisotropic total variation: sum of |forward differences|, borders omitted. */
inline double tv(const Image& img) {
    const int n = img.size;
    double s = 0.0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            if (c + 1 < n) s += std::abs(img.at(r, c + 1) - img.at(r, c));
            if (r + 1 < n) s += std::abs(img.at(r + 1, c) - img.at(r, c));
        }
    return s;
}

/** Power-iteration estimate of the largest eigenvalue of At A (= ||A||^2). */
inline double operator_norm_sq_estimate(const Geometry& geom, int iters = 30,
                                        std::uint64_t seed = 0) {
    geom.validate();
    Rng rng(seed);
    Image b(geom.image_size);
    for (double& v : b.pixels) v = rng.gaussian();
    double nb = std::sqrt(l2_norm_sq(b.pixels));
    for (double& v : b.pixels) v /= nb;
    double lambda = 0.0;
    for (int i = 0; i < iters; ++i) {
        Image next = back_project(forward_project(b, geom), geom);
        lambda = dot(b.pixels, next.pixels);  // Rayleigh quotient, ||b|| = 1
        nb = std::sqrt(l2_norm_sq(next.pixels));
        if (nb == 0.0) return 0.0;
        for (size_t k = 0; k < b.pixels.size(); ++k) b.pixels[k] = next.pixels[k] / nb;
    }
    return lambda;
}

/**
 * Projection-domain gradient descent z <- z + (beta/||A||^2) At (p - A z)
 * from z = 0, optionally projected to >= 0 each step. The recorded trace
 * starts at the initial loss and ends at the final iterate's loss.
 */
inline IterResult gd_reconstruct(const Sinogram& p, const Geometry& geom, const IterConfig& cfg,
                                 const Image* reference = nullptr) {
    cfg.validate();
    geom.validate();
    if (p.num_views != geom.num_views || p.num_detectors != geom.num_detectors)
        throw std::invalid_argument("gd_reconstruct: sinogram dims do not match geometry");

    const double opnorm = operator_norm_sq_estimate(geom);
    const double step = cfg.step_beta / std::max(opnorm, 1e-30);

    IterResult res;
    res.image = Image(geom.image_size);
    Image& z = res.image;

    auto residual = [&](Sinogram& out) {
        const Sinogram az = forward_project(z, geom);
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] = p.values[i] - az.values[i];
    };
    auto record_psnr = [&] {
        if (reference) res.psnr.push_back(psnr(z, *reference, 1.0));
    };

    Sinogram resid(geom.num_views, geom.num_detectors);
    residual(resid);
    double loss = l2_norm_sq(resid.values);
    res.loss.push_back(loss);
    record_psnr();
    const double initial_loss = loss;

    for (int it = 0; it < cfg.max_iters; ++it) {
        const Image grad = back_project(resid, geom);
        for (size_t i = 0; i < z.pixels.size(); ++i) {
            z.pixels[i] += step * grad.pixels[i];
            if (cfg.nonneg && z.pixels[i] < 0.0) z.pixels[i] = 0.0;
        }
        residual(resid);
        const double prev = loss;
        loss = l2_norm_sq(resid.values);
        res.loss.push_back(loss);
        record_psnr();
        if (loss > 10.0 * initial_loss + 1e-30)
            throw std::runtime_error(
                "gd_reconstruct: loss diverged (grew past 10x the initial value); try a smaller "
                "step_beta");
        if (std::abs(prev - loss) < cfg.tol * std::max(prev, 1e-30)) break;
    }
    return res;
}

namespace detail {

// forward differences; the last column/row of each plane stays zero
inline void grad_op(const Image& x, std::vector<double>& dh, std::vector<double>& dv) {
    const int n = x.size;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const size_t i = static_cast<size_t>(r) * n + c;
            dh[i] = c + 1 < n ? x.at(r, c + 1) - x.at(r, c) : 0.0;
            dv[i] = r + 1 < n ? x.at(r + 1, c) - x.at(r, c) : 0.0;
        }
}

// transpose of grad_op, accumulated into out
inline void grad_op_adjoint(const std::vector<double>& dh, const std::vector<double>& dv, int n,
                            std::vector<double>& out) {
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const size_t i = static_cast<size_t>(r) * n + c;
            if (c + 1 < n) {
                out[i] -= dh[i];
                out[i + 1] += dh[i];
            }
            if (r + 1 < n) {
                out[i] -= dv[i];
                out[i + static_cast<size_t>(n)] += dv[i];
            }
        }
}

inline double soft(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

}  // namespace detail

/**
 * ADMM with the split v = Dx: the data-fidelity subproblem is solved by a
 * few inner gradient-descent steps, the TV subproblem by soft-thresholding
 * of the finite differences. Initialized from the FBP image.
 */
inline IterResult admm_tv_reconstruct(const Sinogram& p, const Geometry& geom,
                                      const IterConfig& cfg, const Image* reference = nullptr) {
    cfg.validate();
    geom.validate();
    if (p.num_views != geom.num_views || p.num_detectors != geom.num_detectors)
        throw std::invalid_argument("admm_tv_reconstruct: sinogram dims do not match geometry");

    const int n = geom.image_size;
    const size_t npix = static_cast<size_t>(n) * n;
    const double rho = cfg.admm_rho;
    const double lam = cfg.tv_weight;
    const int x_inner_steps = 10;

    const double opnorm = operator_norm_sq_estimate(geom);
    const double x_step = 1.0 / (opnorm + 8.0 * rho);  // ||Dt D|| <= 8

    IterResult res;
    res.image = fbp(p, geom, FilterKind::RamLak);
    Image& x = res.image;

    std::vector<double> vh(npix, 0.0), vv(npix, 0.0);
    std::vector<double> uh(npix, 0.0), uv(npix, 0.0);
    std::vector<double> dh(npix, 0.0), dv(npix, 0.0);
    detail::grad_op(x, vh, vv);

    double data_loss = 0.0, auglag = 0.0, prev_auglag = 0.0;
    // divergence baseline set after the first iteration; the cold start
    // (nonneg clamp of the FBP point, zero duals) spikes the objective once
    double diverge_baseline = -1.0;

    for (int it = 0; it < cfg.max_iters; ++it) {
        // x-step: 1/2 ||Ax-p||^2 + rho/2 ||Dx - v + u||^2 by gradient descent
        for (int s = 0; s < x_inner_steps; ++s) {
            const Sinogram az = forward_project(x, geom);
            Sinogram resid(geom.num_views, geom.num_detectors);
            for (size_t i = 0; i < resid.values.size(); ++i)
                resid.values[i] = az.values[i] - p.values[i];
            Image grad = back_project(resid, geom);
            detail::grad_op(x, dh, dv);
            std::vector<double> gh(npix), gv(npix);
            for (size_t i = 0; i < npix; ++i) {
                gh[i] = rho * (dh[i] - vh[i] + uh[i]);
                gv[i] = rho * (dv[i] - vv[i] + uv[i]);
            }
            detail::grad_op_adjoint(gh, gv, n, grad.pixels);
            for (size_t i = 0; i < npix; ++i) x.pixels[i] -= x_step * grad.pixels[i];
        }
        if (cfg.nonneg)
            for (double& v : x.pixels) v = std::max(v, 0.0);

        // v-step and dual update
        detail::grad_op(x, dh, dv);
        for (size_t i = 0; i < npix; ++i) {
            vh[i] = detail::soft(dh[i] + uh[i], lam / rho);
            vv[i] = detail::soft(dv[i] + uv[i], lam / rho);
            uh[i] += dh[i] - vh[i];
            uv[i] += dv[i] - vv[i];
        }

        // traces
        const Sinogram az = forward_project(x, geom);
        double dl = 0.0;
        for (size_t i = 0; i < az.values.size(); ++i) {
            const double d = az.values[i] - p.values[i];
            dl += d * d;
        }
        data_loss = dl;
        double l1v = 0.0, quad = 0.0, unorm = 0.0, prim = 0.0;
        for (size_t i = 0; i < npix; ++i) {
            l1v += std::abs(vh[i]) + std::abs(vv[i]);
            const double rh = dh[i] - vh[i], rv = dv[i] - vv[i];
            prim += rh * rh + rv * rv;
            const double qh = rh + uh[i], qv = rv + uv[i];
            quad += qh * qh + qv * qv;
            unorm += uh[i] * uh[i] + uv[i] * uv[i];
        }
        prev_auglag = auglag;
        auglag = 0.5 * data_loss + lam * l1v + 0.5 * rho * quad - 0.5 * rho * unorm;
        res.loss.push_back(data_loss);
        if (reference) res.psnr.push_back(psnr(x, *reference, 1.0));
        res.aug_lagrangian.push_back(auglag);
        res.primal_residual.push_back(std::sqrt(prim));

        if (diverge_baseline < 0.0) diverge_baseline = std::abs(auglag);
        if (!std::isfinite(auglag) || auglag > 10.0 * diverge_baseline + 1e-30)
            throw std::runtime_error(
                "admm_tv_reconstruct: objective diverged; try a smaller step or larger rho");
        if (it > 0 && std::abs(prev_auglag - auglag) < cfg.tol * std::max(std::abs(prev_auglag), 1e-30))
            break;
    }
    return res;
}

}  // namespace drp
