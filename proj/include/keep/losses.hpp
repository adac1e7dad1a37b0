#pragma once

// Training-stage loss functions with analytic gradients for the verifiable
// terms. There is no autodiff here: each loss returns its gradient
// descriptors explicitly, and the finite-difference suite checks them.

#include <cmath>
#include <functional>
#include <vector>

#include "keep/rng.hpp"
#include "keep/tensor.hpp"

namespace keep {

/// Stage-III balancing weights (supplement values).
struct LossWeights {
    double l1 = 0.01;
    double perceptual = 1.0;
    double adversarial = 0.1;
    double temporal = 0.1;

    void validate() const {
        if (l1 < 0.0 || perceptual < 0.0 || adversarial < 0.0 || temporal < 0.0)
            throw std::invalid_argument("LossWeights: weights must be nonnegative");
    }
};

struct ScalarLoss {
    double value = 0.0;
    std::vector<double> d_value_d_a; // same layout as the first argument
};

/// Mean absolute difference. The gradient is sign(a - b) / n, undefined on
/// the |.| kink; callers check it away from zero differences.
inline ScalarLoss l1_loss(const FrameTensor& a, const FrameTensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("l1_loss: shapes differ");
    ScalarLoss out;
    out.d_value_d_a.resize(a.data.size());
    std::vector<double> abs_diff(a.data.size());
    const double inv_n = 1.0 / static_cast<double>(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        abs_diff[i] = std::abs(d);
        out.d_value_d_a[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n;
    }
    out.value = pairwise_sum(abs_diff) * inv_n;
    return out;
}

/// Mean squared difference; gradient 2 (a - b) / n.
inline ScalarLoss l2_loss(const FrameTensor& a, const FrameTensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("l2_loss: shapes differ");
    ScalarLoss out;
    out.d_value_d_a.resize(a.data.size());
    std::vector<double> sq(a.data.size());
    const double inv_n = 1.0 / static_cast<double>(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        sq[i] = d * d;
        out.d_value_d_a[i] = 2.0 * d * inv_n;
    }
    out.value = pairwise_sum(sq) * inv_n;
    return out;
}

/// Per-scale feature maps produced by a perceptual hook.
using PerceptualHook = std::function<std::vector<std::vector<FrameTensor>>(const FrameTensor&)>;

/// Default perceptual feature hook: horizontal and vertical finite
/// differences at scales {1, 1/2, 1/4}. A stand-in for pretrained feature
/// networks; outputs are labeled "perceptual-proxy" downstream.
inline PerceptualHook gradient_feature_hook() {
    return [](const FrameTensor& frame) {
        std::vector<std::vector<FrameTensor>> scales;
        for (double factor : {1.0, 0.5, 0.25}) {
            FrameTensor f = factor == 1.0 ? frame : resample(frame, factor, ResampleMode::bilinear);
            if (f.width < 2 || f.height < 2)
                throw std::invalid_argument("gradient_feature_hook: frame too small for scale pyramid");
            FrameTensor dx(f.height, f.width - 1, f.channels);
            FrameTensor dy(f.height - 1, f.width, f.channels);
            for (int y = 0; y < f.height; ++y)
                for (int x = 0; x + 1 < f.width; ++x)
                    for (int c = 0; c < f.channels; ++c)
                        dx.at(y, x, c) = f.at(y, x + 1, c) - f.at(y, x, c);
            for (int y = 0; y + 1 < f.height; ++y)
                for (int x = 0; x < f.width; ++x)
                    for (int c = 0; c < f.channels; ++c)
                        dy.at(y, x, c) = f.at(y + 1, x, c) - f.at(y, x, c);
            scales.push_back({std::move(dx), std::move(dy)});
        }
        return scales;
    };
}

/// Mean over scales of the mean squared distance between hook features.
inline double perceptual_loss(const FrameTensor& a, const FrameTensor& b,
                              const PerceptualHook& hook) {
    if (!a.same_shape(b)) throw std::invalid_argument("perceptual_loss: shapes differ");
    auto fa = hook(a);
    auto fb = hook(b);
    if (fa.size() != fb.size()) throw std::invalid_argument("perceptual_loss: hook scale mismatch");
    std::vector<double> scale_mse(fa.size());
    for (std::size_t s = 0; s < fa.size(); ++s) {
        if (fa[s].size() != fb[s].size())
            throw std::invalid_argument("perceptual_loss: hook feature-count mismatch");
        std::vector<double> sq;
        for (std::size_t m = 0; m < fa[s].size(); ++m) {
            if (!fa[s][m].same_shape(fb[s][m]))
                throw std::invalid_argument("perceptual_loss: hook feature shapes differ");
            for (std::size_t i = 0; i < fa[s][m].data.size(); ++i) {
                double d = fa[s][m].data[i] - fb[s][m].data[i];
                sq.push_back(d * d);
            }
        }
        scale_mse[s] = sq.empty() ? 0.0 : mean_of(sq);
    }
    return mean_of(scale_mse);
}

struct GanLosses {
    double d_loss = 0.0;
    double g_loss = 0.0;
    std::vector<double> d_grad_real; // d(d_loss)/d(real score)
    std::vector<double> d_grad_fake; // d(d_loss)/d(fake score)
    std::vector<double> g_grad_fake; // d(g_loss)/d(fake score)
};

/// Standard log-form GAN objectives over post-logistic scores:
/// d_loss = -mean log(real) - mean log(1 - fake), g_loss = -mean log(fake).
inline GanLosses gan_losses(const std::vector<double>& real_scores,
                            const std::vector<double>& fake_scores) {
    if (real_scores.empty() || fake_scores.empty())
        throw std::invalid_argument("gan_losses: empty score sets");
    for (double s : real_scores) {
        if (!(s > 0.0 && s < 1.0))
            throw std::invalid_argument("gan_losses: real score outside (0,1)");
    }
    for (double s : fake_scores) {
        if (!(s > 0.0 && s < 1.0))
            throw std::invalid_argument("gan_losses: fake score outside (0,1)");
    }
    GanLosses out;
    const double inv_r = 1.0 / static_cast<double>(real_scores.size());
    const double inv_f = 1.0 / static_cast<double>(fake_scores.size());
    std::vector<double> terms(real_scores.size());
    out.d_grad_real.resize(real_scores.size());
    for (std::size_t i = 0; i < real_scores.size(); ++i) {
        terms[i] = -std::log(real_scores[i]);
        out.d_grad_real[i] = -inv_r / real_scores[i];
    }
    out.d_loss = pairwise_sum(terms) * inv_r;
    terms.assign(fake_scores.size(), 0.0);
    out.d_grad_fake.resize(fake_scores.size());
    out.g_grad_fake.resize(fake_scores.size());
    std::vector<double> g_terms(fake_scores.size());
    for (std::size_t i = 0; i < fake_scores.size(); ++i) {
        terms[i] = -std::log(1.0 - fake_scores[i]);
        out.d_grad_fake[i] = inv_f / (1.0 - fake_scores[i]);
        g_terms[i] = -std::log(fake_scores[i]);
        out.g_grad_fake[i] = -inv_f / fake_scores[i];
    }
    out.d_loss += pairwise_sum(terms) * inv_f;
    out.g_loss = pairwise_sum(g_terms) * inv_f;
    return out;
}

/// Weighted stage-III composite.
inline double stage3_composite(double l1, double l_per, double l_adv, double l_temp,
                               const LossWeights& weights = {}) {
    weights.validate();
    if (!std::isfinite(l1) || !std::isfinite(l_per) || !std::isfinite(l_adv) || !std::isfinite(l_temp))
        throw std::invalid_argument("stage3_composite: parts must be finite");
    return weights.l1 * l1 + weights.perceptual * l_per + weights.adversarial * l_adv +
           weights.temporal * l_temp;
}

/// Toy temporal-PatchGAN score producer: a seeded 3x3x3 convolution over the
/// luminance volume, patch-pooled and squashed to (0,1). Shape exercises
/// only; it is the pluggable hook's default stand-in.
inline std::vector<double> toy_temporal_discriminator(const std::vector<FrameTensor>& frames,
                                                      std::uint64_t seed, int patch = 8) {
    if (frames.size() < 3)
        throw std::invalid_argument("toy_temporal_discriminator: need at least 3 frames");
    const int height = frames.front().height, width = frames.front().width;
    for (const auto& f : frames) {
        if (f.height != height || f.width != width)
            throw std::invalid_argument("toy_temporal_discriminator: frame shapes differ");
    }
    SeededRng rng(seed);
    double w3[3][3][3];
    for (auto& plane : w3)
        for (auto& row : plane)
            for (double& v : row) v = rng.gaussian() / std::sqrt(27.0);
    auto luma = [](const FrameTensor& f, int y, int x) {
        double acc = 0.0;
        for (int c = 0; c < f.channels; ++c) acc += f.at(y, x, c);
        return acc / f.channels;
    };
    const int T = static_cast<int>(frames.size());
    std::vector<double> scores;
    for (int py = 0; py + patch <= height - 2; py += patch) {
        for (int px = 0; px + patch <= width - 2; px += patch) {
            std::vector<double> acts;
            for (int t = 1; t + 1 < T; ++t) {
                for (int y = py; y < py + patch; ++y) {
                    for (int x = px; x < px + patch; ++x) {
                        double acc = 0.0;
                        for (int dt = 0; dt < 3; ++dt)
                            for (int dy = 0; dy < 3; ++dy)
                                for (int dx = 0; dx < 3; ++dx)
                                    acc += w3[dt][dy][dx] * luma(frames[static_cast<std::size_t>(t + dt - 1)], y + dy, x + dx);
                        acts.push_back(acc);
                    }
                }
            }
            scores.push_back(1.0 / (1.0 + std::exp(-mean_of(acts))));
        }
    }
    if (scores.empty())
        throw std::invalid_argument("toy_temporal_discriminator: frames smaller than one patch");
    return scores;
}

} // namespace keep
