// recon: sparse-view CT reconstruction experiments from the command line.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "drp/drp.hpp"

namespace {

struct CommonOpts {
    std::string phantom = "shepp-logan";
    int size = 64;
    int views = 60;
    int detectors = 0;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string sino_path;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--phantom", o.phantom,
                    "Phantom: shepp-logan, disks, squares, or file:<path>");
    cmd->add_option("--size", o.size, "Image size (multiple of 16)")->check(CLI::PositiveNumber);
    cmd->add_option("--views", o.views, "Number of projection views");
    cmd->add_option("--detectors", o.detectors, "Detector count (default 3/2 of size)");
    cmd->add_option("--noise", o.noise, "Gaussian sinogram noise sigma");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--out-dir", o.out_dir, "Output directory");
    cmd->add_option("--sino", o.sino_path,
                    "Reconstruct from a raw f64 sinogram (views x detectors) instead of "
                    "synthesizing projections; disables reference metrics");
}

drp::ExperimentSpec spec_from_common(const CommonOpts& o) {
    drp::ExperimentSpec spec;
    spec.phantom.kind = drp::phantom_kind_from_string(o.phantom);
    if (spec.phantom.kind == drp::PhantomKind::FromFile) spec.phantom.path = o.phantom.substr(5);
    spec.phantom.size = o.size;
    spec.views_list = {o.views};
    spec.num_detectors = o.detectors;
    spec.noise_sigma = o.noise;
    spec.seed = o.seed;
    spec.output_dir = o.out_dir;
    spec.drp_cfg.seed = o.seed;
    spec.drp_cfg.net.seed = o.seed;
    return spec;
}

int run_single_method(const CommonOpts& o, drp::ExperimentSpec spec, drp::Method method) {
    spec.methods = {method};
    if (o.sino_path.empty()) {
        const auto summary = drp::run_experiment(spec);
        return summary.all_failed() ? 1 : 0;
    }
    // file-based sinogram: reconstruct without a reference
    const drp::Geometry geom = spec.geometry_for(o.views);
    drp::Sinogram p(geom.num_views, geom.num_detectors);
    p.values = drp::read_raw_f64(o.sino_path, p.numel());
    drp::ensure_finite(p.values, "sinogram");

    std::filesystem::create_directories(spec.output_dir);
    const std::string stem =
        spec.output_dir + "/" + drp::method_to_string(method) + "_" + std::to_string(o.views) + "v";
    drp::Image result;
    switch (method) {
        case drp::Method::Fbp: result = drp::fbp(p, geom, spec.fbp_filter); break;
        case drp::Method::Gd: result = drp::gd_reconstruct(p, geom, spec.gd_cfg).image; break;
        case drp::Method::AdmmTv:
            result = drp::admm_tv_reconstruct(p, geom, spec.admm_cfg).image;
            break;
        default: {
            drp::DrpConfig cfg = spec.drp_cfg;
            cfg.checkpoint_path = stem + "_net.ckpt";
            switch (method) {
                case drp::Method::Drp: cfg.mode = drp::DrpMode::Drp; break;
                case drp::Method::SingleStage: cfg.mode = drp::DrpMode::SingleStage; break;
                case drp::Method::UnDipFixedInput: cfg.mode = drp::DrpMode::UnDipFixedInput; break;
                default: cfg.mode = drp::DrpMode::UnDipNormalOp; break;
            }
            drp::RunRecord rec = drp::reconstruct(p, geom, cfg);
            drp::write_runrecord_csv(stem + "_trace.csv", rec);
            std::cout << "wrote " << stem + "_trace.csv" << "\n";
            std::cout << "wrote " << rec.checkpoint_path << "\n";
            result = std::move(rec.final_image);
            break;
        }
    }
    drp::write_pgm(stem + ".pgm", result);
    std::cout << "wrote " << stem + ".pgm" << "\n";
    drp::write_png(stem + ".png", result);
    std::cout << "wrote " << stem + ".png" << "\n";
    drp::write_raw_f64(stem + ".f64", result.pixels);
    std::cout << "wrote " << stem + ".f64" << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-view CT reconstruction toolkit (radon-domain deep prior + baselines)"};
    app.require_subcommand(1);

    // ---- run ----
    auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
    std::string config_path;
    run->add_option("config", config_path, "Config file (sectioned key=value)")->required();
    std::uint64_t run_seed = 0;
    std::string run_out, run_channels;
    std::vector<int> run_views;
    int run_epochs = 0;
    double run_beta = 0.0, run_lr = 0.0;
    auto* o_seed = run->add_option("--seed", run_seed, "Override seed");
    auto* o_out = run->add_option("--out-dir", run_out, "Override output directory");
    auto* o_views = run->add_option("--views", run_views, "Override view counts")->delimiter(',');
    auto* o_epochs = run->add_option("--epochs", run_epochs, "Override epoch count");
    auto* o_beta = run->add_option("--beta", run_beta, "Override image step size");
    auto* o_lr = run->add_option("--lr", run_lr, "Override learning rate");
    auto* o_channels = run->add_option("--channels", run_channels, "Override channels (5 values)");

    // ---- phantom ----
    auto* phantom = app.add_subcommand("phantom", "Render a phantom image to a file");
    std::string ph_kind = "shepp-logan", ph_out = "phantom.png";
    int ph_size = 64;
    phantom->add_option("--kind", ph_kind, "shepp-logan, disks, squares, or file:<path>");
    phantom->add_option("--size", ph_size, "Image size (multiple of 16)");
    phantom->add_option("--out", ph_out, "Output path (.pgm, .png, or .f64)")->required();

    // ---- single-method subcommands ----
    CommonOpts fbp_o, gd_o, admm_o, drp_o;
    auto* fbp_cmd = app.add_subcommand("fbp", "Filtered back-projection");
    add_common(fbp_cmd, fbp_o);
    std::string fbp_filter = "ram-lak";
    fbp_cmd->add_option("--filter", fbp_filter, "ram-lak or shepp-logan");

    auto* gd_cmd = app.add_subcommand("gd", "Projection-domain gradient descent");
    add_common(gd_cmd, gd_o);
    int gd_iters = 200;
    double gd_beta = 0.25;
    bool gd_nonneg = true;
    gd_cmd->add_option("--iters", gd_iters, "Max iterations");
    gd_cmd->add_option("--beta", gd_beta, "Step size (normalized by ||A||^2)");
    gd_cmd->add_option("--nonneg", gd_nonneg, "Project iterates to >= 0");

    auto* admm_cmd = app.add_subcommand("admmtv", "ADMM with total-variation regularization");
    add_common(admm_cmd, admm_o);
    int admm_iters = 200;
    double admm_tvw = 0.1, admm_rho = 1.0;
    admm_cmd->add_option("--iters", admm_iters, "Max outer iterations");
    admm_cmd->add_option("--tv-weight", admm_tvw, "TV regularization weight");
    admm_cmd->add_option("--rho", admm_rho, "ADMM penalty parameter");

    auto* drp_cmd = app.add_subcommand("drp", "Radon-domain deep-prior reconstruction");
    add_common(drp_cmd, drp_o);
    int drp_epochs = 60, drp_inner = 100;
    double drp_beta = 0.25, drp_lr = 5e-4;
    std::string drp_mode = "drp", drp_channels;
    drp_cmd->add_option("--epochs", drp_epochs, "Outer epochs");
    drp_cmd->add_option("--inner", drp_inner, "Adam steps per epoch");
    drp_cmd->add_option("--beta", drp_beta, "Image step size");
    drp_cmd->add_option("--lr", drp_lr, "Adam learning rate");
    drp_cmd->add_option("--mode", drp_mode, "drp, single-stage, undip-fixed, or undip-normal");
    drp_cmd->add_option("--channels", drp_channels, "Encoder channels (5 comma-separated values)");

    // ---- metrics ----
    auto* metrics = app.add_subcommand("metrics", "PSNR/SSIM of an image against a reference");
    std::string m_img, m_ref;
    double m_peak = 1.0;
    metrics->add_option("image", m_img, "Image file (.pgm or .png)")->required();
    metrics->add_option("reference", m_ref, "Reference file (.pgm or .png)")->required();
    metrics->add_option("--peak", m_peak, "PSNR peak value");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            drp::ExperimentSpec spec = drp::parse_config(config_path);
            if (*o_seed) {
                spec.seed = run_seed;
                spec.drp_cfg.seed = run_seed;
                spec.drp_cfg.net.seed = run_seed;
            }
            if (*o_out) spec.output_dir = run_out;
            if (*o_views) {
                for (int v : run_views)
                    if (v < 2) throw std::invalid_argument("--views: view counts must be >= 2");
                spec.views_list = run_views;
            }
            if (*o_epochs) {
                if (run_epochs < 1) throw std::invalid_argument("--epochs must be >= 1");
                spec.drp_cfg.epochs = run_epochs;
            }
            if (*o_beta) {
                if (run_beta <= 0) throw std::invalid_argument("--beta must be positive");
                spec.drp_cfg.step_beta = run_beta;
                spec.gd_cfg.step_beta = run_beta;
            }
            if (*o_lr) {
                if (run_lr <= 0) throw std::invalid_argument("--lr must be positive");
                spec.drp_cfg.lr = run_lr;
            }
            if (*o_channels) {
                const auto toks = drp::detail::split_list(run_channels);
                if (toks.size() != 5)
                    throw std::invalid_argument("--channels: exactly 5 values required");
                for (size_t i = 0; i < 5; ++i) {
                    const int c = std::stoi(toks[i]);
                    if (c <= 0) throw std::invalid_argument("--channels: values must be positive");
                    spec.drp_cfg.net.channels[i] = c;
                }
            }
            const auto summary = drp::run_experiment(spec);
            return summary.all_failed() ? 1 : 0;
        }

        if (*phantom) {
            drp::Phantom ph;
            ph.kind = drp::phantom_kind_from_string(ph_kind);
            if (ph.kind == drp::PhantomKind::FromFile) ph.path = ph_kind.substr(5);
            ph.size = ph_size;
            const drp::Image img = drp::render_phantom(ph);
            if (ph_out.ends_with(".pgm")) drp::write_pgm(ph_out, img);
            else if (ph_out.ends_with(".png")) drp::write_png(ph_out, img);
            else if (ph_out.ends_with(".f64")) drp::write_raw_f64(ph_out, img.pixels);
            else throw std::invalid_argument("--out: extension must be .pgm, .png, or .f64");
            std::cout << "wrote " << ph_out << "\n";
            return 0;
        }

        if (*fbp_cmd) {
            drp::ExperimentSpec spec = spec_from_common(fbp_o);
            spec.fbp_filter = drp::filter_kind_from_string(fbp_filter);
            return run_single_method(fbp_o, spec, drp::Method::Fbp);
        }
        if (*gd_cmd) {
            drp::ExperimentSpec spec = spec_from_common(gd_o);
            spec.gd_cfg.max_iters = gd_iters;
            spec.gd_cfg.step_beta = gd_beta;
            spec.gd_cfg.nonneg = gd_nonneg;
            return run_single_method(gd_o, spec, drp::Method::Gd);
        }
        if (*admm_cmd) {
            drp::ExperimentSpec spec = spec_from_common(admm_o);
            spec.admm_cfg.max_iters = admm_iters;
            spec.admm_cfg.tv_weight = admm_tvw;
            spec.admm_cfg.admm_rho = admm_rho;
            return run_single_method(admm_o, spec, drp::Method::AdmmTv);
        }
        if (*drp_cmd) {
            drp::ExperimentSpec spec = spec_from_common(drp_o);
            spec.drp_cfg.epochs = drp_epochs;
            spec.drp_cfg.inner_iters = drp_inner;
            spec.drp_cfg.step_beta = drp_beta;
            spec.drp_cfg.lr = drp_lr;
            if (!drp_channels.empty()) {
                const auto toks = drp::detail::split_list(drp_channels);
                if (toks.size() != 5)
                    throw std::invalid_argument("--channels: exactly 5 values required");
                for (size_t i = 0; i < 5; ++i) spec.drp_cfg.net.channels[i] = std::stoi(toks[i]);
            }
            drp::Method method = drp::Method::Drp;
            if (drp_mode == "drp") method = drp::Method::Drp;
            else if (drp_mode == "single-stage") method = drp::Method::SingleStage;
            else if (drp_mode == "undip-fixed") method = drp::Method::UnDipFixedInput;
            else if (drp_mode == "undip-normal") method = drp::Method::UnDipNormalOp;
            else throw std::invalid_argument("--mode: unknown mode '" + drp_mode + "'");
            return run_single_method(drp_o, spec, method);
        }

        if (*metrics) {
            const auto load = [](const std::string& path) {
                const drp::GrayData g = drp::read_gray_image(path);
                if (g.width != g.height)
                    throw std::runtime_error("metrics: image must be square: " + path);
                drp::Image img(g.width);
                img.pixels = g.pixels;
                return img;
            };
            const drp::Image a = load(m_img);
            const drp::Image b = load(m_ref);
            std::cout << "psnr_db=" << drp::format_double(drp::psnr(a, b, m_peak)) << "\n";
            std::cout << "ssim=" << drp::format_double(drp::ssim(a, b)) << "\n";
            std::cout << "entropy_bits=" << drp::format_double(drp::entropy(a)) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
