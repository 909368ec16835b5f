#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "drp/autodiff.hpp"
#include "drp/types.hpp"

namespace drp {

struct NetConfig {
    std::array<int, 5> channels = {8, 16, 32, 64, 128};
    int kernel_size = 3;
    bool skip_connections = true;
    double init_std = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        for (int c : channels)
            if (c <= 0) throw std::invalid_argument("NetConfig: channels must be positive");
        if (kernel_size <= 0 || kernel_size % 2 == 0)
            throw std::invalid_argument("NetConfig: kernel_size must be odd and positive");
        if (init_std <= 0.0) throw std::invalid_argument("NetConfig: init_std must be positive");
    }
};

/**
 * Symmetric 5-level encoder-decoder with optional skip concatenation:
 * two Conv->BN->ReLU blocks per level, stride-2 average pooling between
 * encoder levels, 2x bilinear upsampling between decoder levels, and a
 * final 1x1 convolution to one channel. Single channel in and out; spatial
 * size preserved for inputs divisible by 16.
 */
struct Network {
    struct Block {
        Tensor w, b, gamma, beta;
    };

    NetConfig cfg;
    std::vector<Block> enc;  // 10 blocks, two per level
    std::vector<Block> dec;  // 8 blocks, two per level
    Tensor out_w, out_b;

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> p;
        for (const auto& blk : enc) {
            p.push_back(blk.w);
            p.push_back(blk.b);
            p.push_back(blk.gamma);
            p.push_back(blk.beta);
        }
        for (const auto& blk : dec) {
            p.push_back(blk.w);
            p.push_back(blk.b);
            p.push_back(blk.gamma);
            p.push_back(blk.beta);
        }
        p.push_back(out_w);
        p.push_back(out_b);
        return p;
    }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& p : parameters()) n += p.numel();
        return n;
    }
};

namespace detail {

inline Network::Block make_block(Rng& rng, int in_c, int out_c, int k, double std,
                                 const std::string& name) {
    Network::Block blk;
    blk.w = Tensor({out_c, in_c, k, k}, true, name + ".w");
    for (size_t i = 0; i < blk.w.numel(); ++i) blk.w.data()[i] = rng.gaussian(0.0, std);
    blk.b = Tensor({out_c}, true, name + ".b");
    blk.gamma = Tensor({out_c}, true, name + ".gamma");
    for (size_t i = 0; i < blk.gamma.numel(); ++i) blk.gamma.data()[i] = 1.0;
    blk.beta = Tensor({out_c}, true, name + ".beta");
    return blk;
}

}  // namespace detail

/** Build a freshly initialized network; fully determined by cfg.seed. */
inline Network build_network(const NetConfig& cfg) {
    cfg.validate();
    Network net;
    net.cfg = cfg;
    Rng rng(cfg.seed);
    const int k = cfg.kernel_size;
    const auto& ch = cfg.channels;

    int prev = 1;
    for (int level = 0; level < 5; ++level) {
        const std::string base = "enc" + std::to_string(level);
        net.enc.push_back(detail::make_block(rng, prev, ch[level], k, cfg.init_std, base + ".0"));
        net.enc.push_back(detail::make_block(rng, ch[level], ch[level], k, cfg.init_std, base + ".1"));
        prev = ch[level];
    }
    for (int level = 3; level >= 0; --level) {
        const std::string base = "dec" + std::to_string(level);
        const int up_c = ch[level + 1];
        const int in_c = cfg.skip_connections ? up_c + ch[level] : up_c;
        net.dec.push_back(detail::make_block(rng, in_c, ch[level], k, cfg.init_std, base + ".0"));
        net.dec.push_back(detail::make_block(rng, ch[level], ch[level], k, cfg.init_std, base + ".1"));
    }
    net.out_w = Tensor({1, ch[0], 1, 1}, true, "out.w");
    for (size_t i = 0; i < net.out_w.numel(); ++i) net.out_w.data()[i] = rng.gaussian(0.0, cfg.init_std);
    net.out_b = Tensor({1}, true, "out.b");
    return net;
}

/** Differentiable forward pass; input [1,1,N,N] with N divisible by 16. */
inline Tensor network_forward(Graph& g, const Network& net, const Tensor& input) {
    const auto& is = input.shape();
    if (is.size() != 4 || is[0] != 1 || is[1] != 1)
        throw std::invalid_argument("network_forward: input must be [1,1,N,N]");
    if (is[2] != is[3] || is[2] % 16 != 0)
        throw std::invalid_argument("network_forward: spatial size must be square and divisible by 16");

    const int pad = net.cfg.kernel_size / 2;
    auto block = [&](const Tensor& x, const Network::Block& blk, const std::string& label) {
        Tensor y = conv2d(g, x, blk.w, blk.b, 1, pad, label + ".conv");
        y = batch_norm(g, y, blk.gamma, blk.beta, 1e-5, label + ".bn");
        return relu(g, y);
    };

    std::array<Tensor, 5> skips;
    Tensor x = input;
    for (int level = 0; level < 5; ++level) {
        if (level > 0) x = downsample2(g, x);
        const std::string base = "enc" + std::to_string(level);
        x = block(x, net.enc[static_cast<size_t>(2 * level)], base + ".0");
        x = block(x, net.enc[static_cast<size_t>(2 * level + 1)], base + ".1");
        skips[static_cast<size_t>(level)] = x;
    }
    for (int level = 3; level >= 0; --level) {
        x = upsample2(g, x);
        if (net.cfg.skip_connections) x = concat_channels(g, x, skips[static_cast<size_t>(level)]);
        const std::string base = "dec" + std::to_string(level);
        const size_t idx = static_cast<size_t>(2 * (3 - level));
        x = block(x, net.dec[idx], base + ".0");
        x = block(x, net.dec[idx + 1], base + ".1");
    }
    return conv2d(g, x, net.out_w, net.out_b, 1, 0, "out.conv");
}

/** Plain forward pass on an image. */
inline Image forward(const Network& net, const Image& z) {
    Graph g;
    return network_forward(g, net, Tensor::from_image(z)).to_image();
}

/**
 * Train the parameters with Adam to reproduce the given image from itself
 * (minimizing the squared residual of the forward pass). Returns the loss
 * at each step.
 */
inline std::vector<double> fit_identity(Network& net, const Image& z, int steps, double lr = 5e-4) {
    if (steps < 1) throw std::invalid_argument("fit_identity: steps must be >= 1");
    AdamConfig acfg;
    acfg.lr = lr;
    AdamState opt(net.parameters(), acfg);
    const Tensor target = Tensor::from_image(z);
    std::vector<double> losses;
    losses.reserve(static_cast<size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        Graph g;
        Tensor out = network_forward(g, net, target);
        Tensor loss = sum_squares(g, sub(g, out, target));
        opt.zero_grad();
        g.backward(loss);
        adam_step(opt);
        losses.push_back(loss.item());
    }
    return losses;
}

}  // namespace drp
