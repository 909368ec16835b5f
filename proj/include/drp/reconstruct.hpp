#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "drp/autodiff.hpp"
#include "drp/checkpoint.hpp"
#include "drp/fbp.hpp"
#include "drp/io.hpp"
#include "drp/iterative.hpp"
#include "drp/metrics.hpp"
#include "drp/network.hpp"
#include "drp/projector.hpp"
#include "drp/radon_ops.hpp"
#include "drp/types.hpp"

namespace drp {

enum class DrpMode { Drp, SingleStage, UnDipFixedInput, UnDipNormalOp };

struct DrpConfig {
    int epochs = 60;
    int inner_iters = 100;
    double step_beta = 0.25;
    double lr = 5e-4;
    NetConfig net;
    DrpMode mode = DrpMode::Drp;
    std::uint64_t seed = 0;
    int log_every = 1;      // progress printing cadence (0 = silent)
    bool freeze_input = false;  // diagnostic: never update the network input
    std::string checkpoint_path;  // save final parameters here when non-empty

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("DrpConfig: epochs must be >= 1");
        if (inner_iters < 1) throw std::invalid_argument("DrpConfig: inner_iters must be >= 1");
        if (step_beta <= 0.0) throw std::invalid_argument("DrpConfig: step_beta must be positive");
        if (lr <= 0.0) throw std::invalid_argument("DrpConfig: lr must be positive");
        net.validate();
    }
};

struct EpochRow {
    int epoch = 0;
    double loss = 0.0;
    double psnr = std::numeric_limits<double>::quiet_NaN();
    double ssim = std::numeric_limits<double>::quiet_NaN();
    double entropy = 0.0;
    double seconds = 0.0;
};

/** Per-epoch log of one reconstruction run plus its final image. */
struct RunRecord {
    double initial_loss = 0.0;
    std::vector<EpochRow> rows;
    Image final_image;
    std::string checkpoint_path;

    const std::vector<EpochRow>& epochs() const { return rows; }

    std::vector<double> loss_trace() const {
        std::vector<double> t;
        t.reserve(rows.size());
        for (const auto& r : rows) t.push_back(r.loss);
        return t;
    }
};

/** Squared L2 projection-domain loss ||A O(z) - p||^2, differentiable. */
inline Tensor radon_loss(Graph& g, const Network& net, const Tensor& z, const Tensor& p,
                         const Geometry& geom) {
    Tensor out = network_forward(g, net, z);
    Tensor s = radon_layer(g, out, geom);
    return sum_squares(g, sub(g, s, p));
}

namespace detail {

enum class FitLoss { Radon, NormalOp };

inline Image noise_image(int n, std::uint64_t seed, double std = 0.1) {
    Rng rng(seed);
    Image img(n);
    for (double& v : img.pixels) v = rng.gaussian(0.0, std);
    return img;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return seed * 0x9E3779B97F4A7C15ull + stream;
}

/**
 * Shared engine. When update_input is set, each epoch refreshes the network
 * input with the image-domain gradient step z <- O(z) + beta * At(p - A O(z))
 * before the inner parameter optimization; otherwise z stays fixed at z0.
 */
inline RunRecord run_reconstruction(const Sinogram& p, const Geometry& geom, const DrpConfig& cfg,
                                    Image z0, bool update_input, FitLoss fit_loss,
                                    const Image* reference) {
    cfg.validate();
    geom.validate();
    if (p.num_views != geom.num_views || p.num_detectors != geom.num_detectors)
        throw std::invalid_argument("drp: sinogram dims do not match geometry");
    if (geom.image_size % 16 != 0)
        throw std::invalid_argument("drp: image_size must be divisible by 16");
    ensure_finite(p.values, "drp: sinogram");

    NetConfig net_cfg = cfg.net;
    net_cfg.seed = cfg.seed;
    Network net = build_network(net_cfg);
    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;
    AdamState opt(net.parameters(), adam_cfg);

    const Tensor p_t = Tensor::from_sinogram(p);
    Image z = std::move(z0);
    Tensor z_t = Tensor::from_image(z);

    auto objective = [&](Graph& g) {
        if (fit_loss == FitLoss::Radon) return radon_loss(g, net, z_t, p_t, geom);
        Tensor out = network_forward(g, net, z_t);
        Tensor r = sub(g, radon_layer(g, out, geom), p_t);
        return sum_squares(g, backproject_layer(g, r, geom));
    };

    // The image step scales the adjoint direction by 1/||A||^2 (power
    // iteration estimate), putting step_beta on the normalized scale the
    // descent bound requires regardless of geometry size.
    const double step =
        update_input ? cfg.step_beta / std::max(operator_norm_sq_estimate(geom), 1e-30) : 0.0;

    // state from the most recent epoch-end evaluation
    Image y;          // O(z)
    Image delta;      // At (p - A O(z))
    double xi = 0.0;  // current objective value

    auto evaluate = [&](bool want_delta) {
        Graph g;
        Tensor out = network_forward(g, net, z_t);
        Tensor s = radon_layer(g, out, geom);
        y = out.to_image();
        Sinogram resid(geom.num_views, geom.num_detectors);
        for (size_t i = 0; i < resid.values.size(); ++i)
            resid.values[i] = p.values[i] - s.values()[i];
        if (fit_loss == FitLoss::Radon) {
            xi = l2_norm_sq(resid.values);
        } else {
            xi = l2_norm_sq(back_project(resid, geom).pixels);
        }
        if (want_delta) delta = back_project(resid, geom);
    };

    evaluate(update_input);

    RunRecord record;
    record.initial_loss = xi;
    record.rows.reserve(static_cast<size_t>(cfg.epochs));

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        if (update_input) {
            for (size_t i = 0; i < z.pixels.size(); ++i)
                z.pixels[i] = y.pixels[i] + step * delta.pixels[i];
            z_t = Tensor::from_image(z);
        }
        for (int it = 1; it <= cfg.inner_iters; ++it) {
            try {
                Graph g;
                Tensor loss = objective(g);
                opt.zero_grad();
                g.backward(loss);
                adam_step(opt);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("drp: numeric failure at epoch " + std::to_string(epoch) +
                                         ", inner iteration " + std::to_string(it) + ": " +
                                         e.what());
            }
        }
        try {
            evaluate(update_input && epoch < cfg.epochs);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("drp: numeric failure at epoch " + std::to_string(epoch) +
                                     " (end-of-epoch evaluation): " + e.what());
        }

        EpochRow row;
        row.epoch = epoch;
        row.loss = xi;
        if (reference) {
            row.psnr = psnr(y, *reference, 1.0);
            row.ssim = ssim(y, *reference);
        }
        row.entropy = entropy(y, 256);
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        record.rows.push_back(row);
    }

    record.final_image = y;
    for (double& v : record.final_image.pixels) v = std::max(v, 0.0);
    if (!cfg.checkpoint_path.empty()) {
        save_checkpoint(cfg.checkpoint_path, net.parameters());
        record.checkpoint_path = cfg.checkpoint_path;
    }
    return record;
}

}  // namespace detail

/**
 * Deep Radon Prior reconstruction: FBP initialization, then alternating
 * image-domain gradient steps and Adam optimization of the network on the
 * projection-domain loss, with parameters persisting across epochs.
 */
inline RunRecord drp_reconstruct(const Sinogram& p, const Geometry& geom, const DrpConfig& cfg,
                                 const Image* reference = nullptr) {
    if (cfg.mode != DrpMode::Drp)
        throw std::invalid_argument("drp_reconstruct: cfg.mode must be Drp");
    return detail::run_reconstruction(p, geom, cfg, fbp(p, geom, FilterKind::RamLak),
                                      !cfg.freeze_input, detail::FitLoss::Radon, reference);
}

/** Ablation: input fixed at the FBP image, only the parameters optimized. */
inline RunRecord drp_single_stage(const Sinogram& p, const Geometry& geom, const DrpConfig& cfg,
                                  const Image* reference = nullptr) {
    if (cfg.mode != DrpMode::SingleStage && cfg.mode != DrpMode::Drp)
        throw std::invalid_argument("drp_single_stage: cfg.mode must be SingleStage");
    return detail::run_reconstruction(p, geom, cfg, fbp(p, geom, FilterKind::RamLak), false,
                                      detail::FitLoss::Radon, reference);
}

/**
 * Untrained-network baselines on a fixed random input: projection-domain
 * loss (UnDipFixedInput) or its normal-operator form (UnDipNormalOp).
 */
inline RunRecord undip_reconstruct(const Sinogram& p, const Geometry& geom, const DrpConfig& cfg,
                                   const Image* reference = nullptr) {
    if (cfg.mode != DrpMode::UnDipFixedInput && cfg.mode != DrpMode::UnDipNormalOp)
        throw std::invalid_argument("undip_reconstruct: cfg.mode must be an UnDip mode");
    Image z0 = detail::noise_image(geom.image_size, detail::derive_seed(cfg.seed, 1));
    const auto loss_kind = cfg.mode == DrpMode::UnDipNormalOp ? detail::FitLoss::NormalOp
                                                              : detail::FitLoss::Radon;
    return detail::run_reconstruction(p, geom, cfg, std::move(z0), false, loss_kind, reference);
}

/** Fixed-input fitting with a caller-provided input image. */
inline RunRecord fit_fixed_input(const Sinogram& p, const Geometry& geom, const DrpConfig& cfg,
                                 Image z0, const Image* reference = nullptr) {
    return detail::run_reconstruction(p, geom, cfg, std::move(z0), false, detail::FitLoss::Radon,
                                      reference);
}

/** Dispatch on cfg.mode. */
inline RunRecord reconstruct(const Sinogram& p, const Geometry& geom, const DrpConfig& cfg,
                             const Image* reference = nullptr) {
    switch (cfg.mode) {
        case DrpMode::Drp: return drp_reconstruct(p, geom, cfg, reference);
        case DrpMode::SingleStage: return drp_single_stage(p, geom, cfg, reference);
        default: return undip_reconstruct(p, geom, cfg, reference);
    }
}

inline void write_runrecord_csv(const std::string& path, const RunRecord& record) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_runrecord_csv: cannot open " + path);
    out << "epoch,loss,psnr,ssim,entropy,seconds\n";
    for (const auto& r : record.rows)
        out << r.epoch << "," << format_double(r.loss) << "," << format_double(r.psnr) << ","
            << format_double(r.ssim) << "," << format_double(r.entropy) << ","
            << format_double(r.seconds) << "\n";
    if (!out) throw std::runtime_error("write_runrecord_csv: write failed for " + path);
}

}  // namespace drp
