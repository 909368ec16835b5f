#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "drp/fbp.hpp"
#include "drp/iterative.hpp"
#include "drp/metrics.hpp"
#include "drp/phantom.hpp"
#include "drp/projector.hpp"
#include "drp/reconstruct.hpp"
#include "drp/types.hpp"

namespace drp {

enum class Method { Fbp, Gd, AdmmTv, Drp, SingleStage, UnDipFixedInput, UnDipNormalOp };

inline Method method_from_string(const std::string& s) {
    if (s == "fbp") return Method::Fbp;
    if (s == "gd") return Method::Gd;
    if (s == "admmtv") return Method::AdmmTv;
    if (s == "drp") return Method::Drp;
    if (s == "single-stage") return Method::SingleStage;
    if (s == "undip-fixed") return Method::UnDipFixedInput;
    if (s == "undip-normal") return Method::UnDipNormalOp;
    throw std::invalid_argument("unknown method '" + s +
                                "' (want fbp, gd, admmtv, drp, single-stage, undip-fixed, "
                                "undip-normal)");
}

inline std::string method_to_string(Method m) {
    switch (m) {
        case Method::Fbp: return "fbp";
        case Method::Gd: return "gd";
        case Method::AdmmTv: return "admmtv";
        case Method::Drp: return "drp";
        case Method::SingleStage: return "single-stage";
        case Method::UnDipFixedInput: return "undip-fixed";
        case Method::UnDipNormalOp: return "undip-normal";
    }
    return "";
}

struct ExperimentSpec {
    Phantom phantom;
    int num_detectors = 0;  // 0 = auto (3/2 of the image size)
    double detector_spacing = 1.0;
    double detector_offset = 0.0;
    std::vector<Method> methods{Method::Fbp};
    std::vector<int> views_list{60};
    double noise_sigma = 0.0;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    FilterKind fbp_filter = FilterKind::RamLak;
    IterConfig gd_cfg;
    IterConfig admm_cfg;
    DrpConfig drp_cfg;

    int detectors() const { return num_detectors > 0 ? num_detectors : 3 * phantom.size / 2; }

    Geometry geometry_for(int views) const {
        Geometry g;
        g.image_size = phantom.size;
        g.num_views = views;
        g.num_detectors = detectors();
        g.detector_spacing = detector_spacing;
        g.detector_offset = detector_offset;
        return g;
    }

    void validate() const {
        if (methods.empty()) throw std::invalid_argument("experiment: at least one method required");
        if (views_list.empty()) throw std::invalid_argument("experiment: views list is empty");
        for (int v : views_list)
            if (v < 2) throw std::invalid_argument("experiment: view counts must be >= 2");
        if (noise_sigma < 0.0) throw std::invalid_argument("experiment: noise_sigma must be >= 0");
        geometry_for(views_list.front()).validate();
        gd_cfg.validate();
        admm_cfg.validate();
        drp_cfg.validate();
    }
};

// ------------------------------------------------------------ config files

namespace detail {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline bool parse_bool(const std::string& v, int lineno, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: line " + std::to_string(lineno) + ": key '" + key +
                      "': expected true or false");
}

template <typename F>
inline auto parse_number(const std::string& v, int lineno, const std::string& key, F conv) {
    try {
        size_t pos = 0;
        auto r = conv(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: line " + std::to_string(lineno) + ": key '" + key +
                          "': not a valid number ('" + v + "')");
    }
}

inline int parse_int(const std::string& v, int lineno, const std::string& key) {
    return parse_number(v, lineno, key, [](const std::string& s, size_t* p) { return std::stoi(s, p); });
}

inline double parse_f64(const std::string& v, int lineno, const std::string& key) {
    return parse_number(v, lineno, key, [](const std::string& s, size_t* p) { return std::stod(s, p); });
}

}  // namespace detail

/** Parse a sectioned key=value experiment config; unknown keys are rejected
 *  with their line number, and an empty file yields the defaults. */
inline ExperimentSpec parse_config_text(const std::string& text) {
    ExperimentSpec spec;
    std::istringstream in(text);
    std::string line, section = "experiment";
    int lineno = 0;

    while (std::getline(in, line)) {
        ++lineno;
        // strip comments and whitespace
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto is_space = [](unsigned char c) { return std::isspace(c); };
        while (!line.empty() && is_space(line.front())) line.erase(line.begin());
        while (!line.empty() && is_space(line.back())) line.pop_back();
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw detail::ConfigError("config: line " + std::to_string(lineno) +
                                          ": unterminated section header");
            section = line.substr(1, line.size() - 2);
            if (section != "experiment" && section != "geometry" && section != "fbp" &&
                section != "gd" && section != "admm" && section != "drp" && section != "net")
                throw detail::ConfigError("config: line " + std::to_string(lineno) +
                                          ": unknown section [" + section + "]");
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw detail::ConfigError("config: line " + std::to_string(lineno) +
                                      ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        while (!key.empty() && is_space(key.back())) key.pop_back();
        while (!val.empty() && is_space(val.front())) val.erase(val.begin());

        auto bad_key = [&]() -> detail::ConfigError {
            return detail::ConfigError("config: line " + std::to_string(lineno) +
                                       ": unknown key '" + key + "' in section [" + section + "]");
        };
        auto require = [&](bool ok, const std::string& constraint) {
            if (!ok)
                throw detail::ConfigError("config: line " + std::to_string(lineno) + ": key '" +
                                          key + "': " + constraint);
        };

        if (section == "experiment") {
            if (key == "phantom") {
                spec.phantom.kind = phantom_kind_from_string(val);
                if (spec.phantom.kind == PhantomKind::FromFile) spec.phantom.path = val.substr(5);
            } else if (key == "size") {
                spec.phantom.size = detail::parse_int(val, lineno, key);
                require(spec.phantom.size > 0 && spec.phantom.size % 16 == 0,
                        "size must be a positive multiple of 16");
            } else if (key == "views") {
                spec.views_list.clear();
                for (const auto& tok : detail::split_list(val)) {
                    const int v = detail::parse_int(tok, lineno, key);
                    require(v >= 2, "view counts must be >= 2");
                    spec.views_list.push_back(v);
                }
                require(!spec.views_list.empty(), "views list must not be empty");
            } else if (key == "methods") {
                spec.methods.clear();
                for (const auto& tok : detail::split_list(val))
                    spec.methods.push_back(method_from_string(tok));
                require(!spec.methods.empty(), "at least one method required");
            } else if (key == "noise_sigma") {
                spec.noise_sigma = detail::parse_f64(val, lineno, key);
                require(spec.noise_sigma >= 0.0, "noise_sigma must be >= 0");
            } else if (key == "output_dir") {
                spec.output_dir = val;
            } else if (key == "seed") {
                spec.seed = static_cast<std::uint64_t>(
                    detail::parse_number(val, lineno, key,
                                         [](const std::string& s, size_t* p) { return std::stoull(s, p); }));
            } else {
                throw bad_key();
            }
        } else if (section == "geometry") {
            if (key == "num_detectors") {
                spec.num_detectors = detail::parse_int(val, lineno, key);
                require(spec.num_detectors > 0, "num_detectors must be positive");
            } else if (key == "detector_spacing") {
                spec.detector_spacing = detail::parse_f64(val, lineno, key);
                require(spec.detector_spacing > 0.0, "detector_spacing must be positive");
            } else if (key == "detector_offset") {
                spec.detector_offset = detail::parse_f64(val, lineno, key);
            } else {
                throw bad_key();
            }
        } else if (section == "fbp") {
            if (key == "filter") spec.fbp_filter = filter_kind_from_string(val);
            else throw bad_key();
        } else if (section == "gd" || section == "admm") {
            IterConfig& cfg = section == "gd" ? spec.gd_cfg : spec.admm_cfg;
            if (key == "max_iters") {
                cfg.max_iters = detail::parse_int(val, lineno, key);
                require(cfg.max_iters >= 1, "max_iters must be >= 1");
            } else if (key == "step_beta") {
                cfg.step_beta = detail::parse_f64(val, lineno, key);
                require(cfg.step_beta > 0.0, "step_beta must be positive");
            } else if (key == "nonneg") {
                cfg.nonneg = detail::parse_bool(val, lineno, key);
            } else if (key == "tol") {
                cfg.tol = detail::parse_f64(val, lineno, key);
                require(cfg.tol >= 0.0, "tol must be >= 0");
            } else if (section == "admm" && key == "tv_weight") {
                cfg.tv_weight = detail::parse_f64(val, lineno, key);
                require(cfg.tv_weight >= 0.0, "tv_weight must be >= 0");
            } else if (section == "admm" && key == "rho") {
                cfg.admm_rho = detail::parse_f64(val, lineno, key);
                require(cfg.admm_rho > 0.0, "rho must be positive");
            } else {
                throw bad_key();
            }
        } else if (section == "drp") {
            if (key == "epochs") {
                spec.drp_cfg.epochs = detail::parse_int(val, lineno, key);
                require(spec.drp_cfg.epochs >= 1, "epochs must be >= 1");
            } else if (key == "inner_iters") {
                spec.drp_cfg.inner_iters = detail::parse_int(val, lineno, key);
                require(spec.drp_cfg.inner_iters >= 1, "inner_iters must be >= 1");
            } else if (key == "beta") {
                spec.drp_cfg.step_beta = detail::parse_f64(val, lineno, key);
                require(spec.drp_cfg.step_beta > 0.0, "beta must be positive");
            } else if (key == "lr") {
                spec.drp_cfg.lr = detail::parse_f64(val, lineno, key);
                require(spec.drp_cfg.lr > 0.0, "lr must be positive");
            } else if (key == "log_every") {
                spec.drp_cfg.log_every = detail::parse_int(val, lineno, key);
                require(spec.drp_cfg.log_every >= 0, "log_every must be >= 0");
            } else {
                throw bad_key();
            }
        } else if (section == "net") {
            if (key == "channels") {
                const auto toks = detail::split_list(val);
                require(toks.size() == 5, "channels must list exactly 5 values");
                for (size_t i = 0; i < 5; ++i) {
                    const int c = detail::parse_int(toks[i], lineno, key);
                    require(c > 0, "channel counts must be positive");
                    spec.drp_cfg.net.channels[i] = c;
                }
            } else if (key == "kernel_size") {
                spec.drp_cfg.net.kernel_size = detail::parse_int(val, lineno, key);
                require(spec.drp_cfg.net.kernel_size > 0 && spec.drp_cfg.net.kernel_size % 2 == 1,
                        "kernel_size must be odd and positive");
            } else if (key == "skips") {
                spec.drp_cfg.net.skip_connections = detail::parse_bool(val, lineno, key);
            } else if (key == "init_std") {
                spec.drp_cfg.net.init_std = detail::parse_f64(val, lineno, key);
                require(spec.drp_cfg.net.init_std > 0.0, "init_std must be positive");
            } else {
                throw bad_key();
            }
        }
    }

    spec.drp_cfg.seed = spec.seed;
    spec.drp_cfg.net.seed = spec.seed;
    spec.validate();
    return spec;
}

inline ExperimentSpec parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

inline std::string emit_config(const ExperimentSpec& spec) {
    std::ostringstream out;
    out << "[experiment]\n";
    out << "phantom = " << phantom_kind_to_string(spec.phantom) << "\n";
    out << "size = " << spec.phantom.size << "\n";
    out << "views = ";
    for (size_t i = 0; i < spec.views_list.size(); ++i)
        out << (i ? "," : "") << spec.views_list[i];
    out << "\n";
    out << "methods = ";
    for (size_t i = 0; i < spec.methods.size(); ++i)
        out << (i ? "," : "") << method_to_string(spec.methods[i]);
    out << "\n";
    out << "noise_sigma = " << format_double(spec.noise_sigma) << "\n";
    out << "output_dir = " << spec.output_dir << "\n";
    out << "seed = " << spec.seed << "\n";
    out << "\n[geometry]\n";
    out << "num_detectors = " << spec.detectors() << "\n";
    out << "detector_spacing = " << format_double(spec.detector_spacing) << "\n";
    out << "detector_offset = " << format_double(spec.detector_offset) << "\n";
    out << "\n[fbp]\n";
    out << "filter = " << filter_kind_to_string(spec.fbp_filter) << "\n";
    const auto iter_block = [&](const char* name, const IterConfig& cfg, bool admm) {
        out << "\n[" << name << "]\n";
        out << "max_iters = " << cfg.max_iters << "\n";
        out << "step_beta = " << format_double(cfg.step_beta) << "\n";
        out << "nonneg = " << (cfg.nonneg ? "true" : "false") << "\n";
        out << "tol = " << format_double(cfg.tol) << "\n";
        if (admm) {
            out << "tv_weight = " << format_double(cfg.tv_weight) << "\n";
            out << "rho = " << format_double(cfg.admm_rho) << "\n";
        }
    };
    iter_block("gd", spec.gd_cfg, false);
    iter_block("admm", spec.admm_cfg, true);
    out << "\n[drp]\n";
    out << "epochs = " << spec.drp_cfg.epochs << "\n";
    out << "inner_iters = " << spec.drp_cfg.inner_iters << "\n";
    out << "beta = " << format_double(spec.drp_cfg.step_beta) << "\n";
    out << "lr = " << format_double(spec.drp_cfg.lr) << "\n";
    out << "log_every = " << spec.drp_cfg.log_every << "\n";
    out << "\n[net]\n";
    out << "channels = ";
    for (size_t i = 0; i < 5; ++i) out << (i ? "," : "") << spec.drp_cfg.net.channels[i];
    out << "\n";
    out << "kernel_size = " << spec.drp_cfg.net.kernel_size << "\n";
    out << "skips = " << (spec.drp_cfg.net.skip_connections ? "true" : "false") << "\n";
    out << "init_std = " << format_double(spec.drp_cfg.net.init_std) << "\n";
    return out.str();
}

// ------------------------------------------------------------- experiments

struct SummaryRow {
    std::string method;
    int views = 0;
    double psnr = std::numeric_limits<double>::quiet_NaN();
    double ssim = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
    std::string status = "ok";
};

struct ExperimentSummary {
    std::vector<SummaryRow> rows;
    std::vector<std::string> files;
    bool all_failed() const {
        for (const auto& r : rows)
            if (r.status == "ok") return false;
        return !rows.empty();
    }
};

namespace detail {

inline void write_trace_csv(const std::string& path, const std::vector<double>& loss,
                            const std::vector<double>& psnr_trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
    out << "iter,loss,psnr\n";
    for (size_t i = 0; i < loss.size(); ++i) {
        out << i << "," << format_double(loss[i]) << ",";
        if (i < psnr_trace.size()) out << format_double(psnr_trace[i]);
        out << "\n";
    }
}

}  // namespace detail

/**
 * Run every (views, method) cell of the spec: synthesize projections of the
 * phantom, reconstruct, write image/trace files and one summary row per
 * cell. Every written file is reported on the log stream.
 */
inline ExperimentSummary run_experiment(const ExperimentSpec& spec, std::ostream& log = std::cout) {
    spec.validate();
    std::filesystem::create_directories(spec.output_dir);

    ExperimentSummary summary;
    auto emit_file = [&](const std::string& path) {
        summary.files.push_back(path);
        log << "wrote " << path << "\n";
    };
    auto save_image = [&](const Image& img, const std::string& stem) {
        write_pgm(stem + ".pgm", img);
        emit_file(stem + ".pgm");
        write_png(stem + ".png", img);
        emit_file(stem + ".png");
        write_raw_f64(stem + ".f64", img.pixels);
        emit_file(stem + ".f64");
    };

    const Image reference = render_phantom(spec.phantom);
    save_image(reference, spec.output_dir + "/ground_truth");

    for (int views : spec.views_list) {
        const Geometry geom = spec.geometry_for(views);
        Sinogram p = forward_project(reference, geom);
        if (spec.noise_sigma > 0.0) {
            Rng rng(detail::derive_seed(spec.seed, static_cast<std::uint64_t>(views)));
            for (double& v : p.values) v += rng.gaussian(0.0, spec.noise_sigma);
        }
        const std::string sino_path =
            spec.output_dir + "/sino_" + std::to_string(views) + "v.f64";
        write_raw_f64(sino_path, p.values);
        emit_file(sino_path);

        for (Method method : spec.methods) {
            const std::string name = method_to_string(method);
            const std::string stem =
                spec.output_dir + "/" + name + "_" + std::to_string(views) + "v";
            SummaryRow row;
            row.method = name;
            row.views = views;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                Image result;
                switch (method) {
                    case Method::Fbp: result = fbp(p, geom, spec.fbp_filter); break;
                    case Method::Gd: {
                        IterResult r = gd_reconstruct(p, geom, spec.gd_cfg, &reference);
                        detail::write_trace_csv(stem + "_trace.csv", r.loss, r.psnr);
                        emit_file(stem + "_trace.csv");
                        result = std::move(r.image);
                        break;
                    }
                    case Method::AdmmTv: {
                        IterResult r = admm_tv_reconstruct(p, geom, spec.admm_cfg, &reference);
                        detail::write_trace_csv(stem + "_trace.csv", r.loss, r.psnr);
                        emit_file(stem + "_trace.csv");
                        result = std::move(r.image);
                        break;
                    }
                    default: {
                        DrpConfig cfg = spec.drp_cfg;
                        cfg.seed = spec.seed;
                        cfg.checkpoint_path = stem + "_net.ckpt";
                        switch (method) {
                            case Method::Drp: cfg.mode = DrpMode::Drp; break;
                            case Method::SingleStage: cfg.mode = DrpMode::SingleStage; break;
                            case Method::UnDipFixedInput: cfg.mode = DrpMode::UnDipFixedInput; break;
                            default: cfg.mode = DrpMode::UnDipNormalOp; break;
                        }
                        RunRecord rec = reconstruct(p, geom, cfg, &reference);
                        write_runrecord_csv(stem + "_trace.csv", rec);
                        emit_file(stem + "_trace.csv");
                        emit_file(rec.checkpoint_path);
                        result = std::move(rec.final_image);
                        break;
                    }
                }
                row.seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                row.psnr = psnr(result, reference, 1.0);
                row.ssim = ssim(result, reference);
                save_image(result, stem);
            } catch (const std::exception& e) {
                row.seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::string msg = e.what();
                std::replace(msg.begin(), msg.end(), ',', ';');
                std::replace(msg.begin(), msg.end(), '\n', ' ');
                row.status = msg;
            }
            summary.rows.push_back(row);
        }
    }

    const std::string summary_path = spec.output_dir + "/summary.csv";
    {
        std::ofstream out(summary_path);
        if (!out) throw std::runtime_error("run_experiment: cannot open " + summary_path);
        out << "method,views,psnr,ssim,seconds,status\n";
        for (const auto& r : summary.rows)
            out << r.method << "," << r.views << "," << format_double(r.psnr) << ","
                << format_double(r.ssim) << "," << format_double(r.seconds) << "," << r.status
                << "\n";
    }
    emit_file(summary_path);

    log << "\nmethod        views    psnr(dB)    ssim      seconds   status\n";
    for (const auto& r : summary.rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-13s %-8d %-11.3f %-9.4f %-9.2f %s\n", r.method.c_str(),
                      r.views, r.psnr, r.ssim, r.seconds, r.status.c_str());
        log << buf;
    }
    return summary;
}

}  // namespace drp
