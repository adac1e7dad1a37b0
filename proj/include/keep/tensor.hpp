#pragma once

// Dense tensor value types and the elementwise / filtering kernels shared by
// the whole pipeline. Storage is double; reductions use fixed-order pairwise
// summation so results are identical run to run regardless of threading.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "keep/errors.hpp"

namespace keep {

/// Fixed-order pairwise reduction. Splitting is deterministic, and sums of
/// power-of-two many equal values are exact.
inline double pairwise_sum(std::span<const double> values) {
    if (values.empty()) return 0.0;
    if (values.size() == 1) return values[0];
    if (values.size() == 2) return values[0] + values[1];
    std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double mean_of(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_of: empty input");
    return pairwise_sum(values) / static_cast<double>(values.size());
}

inline bool all_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

/// Image-valued rank-3 tensor, row-major (y, x, channel). Pixel data is
/// expected in [0,1] at I/O boundaries; intermediate features are
/// unrestricted.
struct FrameTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    FrameTensor() = default;
    FrameTensor(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {
        if (h < 1 || w < 1 || c < 1)
            throw std::invalid_argument("FrameTensor: dimensions must be positive");
    }

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t size() const { return data.size(); }
    bool same_shape(const FrameTensor& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

/// Latent code grid, row-major (token row, token col, channel).
struct LatentState {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<double> data;

    LatentState() = default;
    LatentState(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), c(c_),
          data(static_cast<std::size_t>(h_) * w_ * c_, fill) {
        if (h_ < 1 || w_ < 1 || c_ < 1)
            throw std::invalid_argument("LatentState: dimensions must be positive");
    }

    double& at(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * w + j) * c + k];
    }
    double at(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * w + j) * c + k];
    }
    std::size_t size() const { return data.size(); }
    bool same_shape(const LatentState& o) const {
        return h == o.h && w == o.w && c == o.c;
    }
};

/// Per-token Kalman gain, values in [0,1], broadcast across latent channels.
struct GainField {
    int h = 0;
    int w = 0;
    std::vector<double> data;

    GainField() = default;
    GainField(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_, fill) {
        if (h_ < 1 || w_ < 1)
            throw std::invalid_argument("GainField: dimensions must be positive");
    }

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * w + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * w + j]; }
};

/// Dense rank-2 kernel / small matrix.
struct Kernel2d {
    int rows = 0;
    int cols = 0;
    std::vector<double> w;

    Kernel2d() = default;
    Kernel2d(int r, int c, double fill = 0.0)
        : rows(r), cols(c), w(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int r, int c) { return w[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return w[static_cast<std::size_t>(r) * cols + c]; }
};

enum class PaddingMode { reflect, zero };
enum class ResampleMode { bilinear, nearest };

/// Edge-inclusive reflection (… 1 0 | 0 1 2 … n-1 | n-1 n-2 …), valid for
/// offsets of any magnitude.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return (m < n) ? m : period - 1 - m;
}

/// 2D cross-correlation with an odd-sized kernel, each channel filtered
/// independently; output keeps the input's spatial shape.
inline FrameTensor conv2d(const FrameTensor& input, const Kernel2d& kernel,
                          PaddingMode padding = PaddingMode::reflect) {
    if (kernel.rows < 1 || kernel.cols < 1 || kernel.rows % 2 == 0 || kernel.cols % 2 == 0)
        throw std::invalid_argument("conv2d: kernel sides must be odd and positive");
    const int ry = kernel.rows / 2;
    const int rx = kernel.cols / 2;
    FrameTensor out(input.height, input.width, input.channels);
    for (int y = 0; y < input.height; ++y) {
        for (int x = 0; x < input.width; ++x) {
            for (int c = 0; c < input.channels; ++c) {
                double acc = 0.0;
                for (int ky = 0; ky < kernel.rows; ++ky) {
                    int sy = y + ky - ry;
                    for (int kx = 0; kx < kernel.cols; ++kx) {
                        int sx = x + kx - rx;
                        double v;
                        if (padding == PaddingMode::reflect) {
                            v = input.at(reflect_index(sy, input.height),
                                         reflect_index(sx, input.width), c);
                        } else {
                            v = (sy < 0 || sy >= input.height || sx < 0 || sx >= input.width)
                                    ? 0.0
                                    : input.at(sy, sx, c);
                        }
                        acc += v * kernel.at(ky, kx);
                    }
                }
                out.at(y, x, c) = acc;
            }
        }
    }
    return out;
}

/// Truncated sampled Gaussian on the (2r+1)^2 grid, renormalized to sum to 1.
inline Kernel2d gaussian_kernel(double sigma, int radius) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
    if (radius < 1) throw std::invalid_argument("gaussian_kernel: radius must be >= 1");
    const int side = 2 * radius + 1;
    Kernel2d k(side, side);
    double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            k.at(dy + radius, dx + radius) =
                std::exp(-(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) *
                         inv_two_sigma_sq);
        }
    }
    double total = pairwise_sum(k.w);
    for (double& v : k.w) v /= total;
    return k;
}

/// Default truncation radius for a blur of the given sigma.
inline int gaussian_radius(double sigma) {
    return std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
}

namespace detail {

inline double bilinear_sample(const FrameTensor& f, double sy, double sx, int c) {
    // Border clamp, then separable linear weights. Integer coordinates
    // reproduce the stored value bit-exactly.
    if (sy < 0.0) sy = 0.0;
    if (sx < 0.0) sx = 0.0;
    double max_y = static_cast<double>(f.height - 1);
    double max_x = static_cast<double>(f.width - 1);
    if (sy > max_y) sy = max_y;
    if (sx > max_x) sx = max_x;
    int y0 = static_cast<int>(sy);
    int x0 = static_cast<int>(sx);
    int y1 = std::min(y0 + 1, f.height - 1);
    int x1 = std::min(x0 + 1, f.width - 1);
    double fy = sy - y0;
    double fx = sx - x0;
    double top = f.at(y0, x0, c) * (1.0 - fx) + f.at(y0, x1, c) * fx;
    double bottom = f.at(y1, x0, c) * (1.0 - fx) + f.at(y1, x1, c) * fx;
    return top * (1.0 - fy) + bottom * fy;
}

} // namespace detail

/// Rescale by a positive factor using pixel-center (align-corners-false)
/// sampling. Output shape is round(input shape * factor).
inline FrameTensor resample(const FrameTensor& input, double factor, ResampleMode mode) {
    if (!(factor > 0.0)) throw std::invalid_argument("resample: factor must be > 0");
    int oh = static_cast<int>(std::lround(input.height * factor));
    int ow = static_cast<int>(std::lround(input.width * factor));
    if (oh < 1 || ow < 1) throw std::invalid_argument("resample: output dimensions must be >= 1");
    FrameTensor out(oh, ow, input.channels);
    double sy_scale = static_cast<double>(input.height) / oh;
    double sx_scale = static_cast<double>(input.width) / ow;
    for (int y = 0; y < oh; ++y) {
        double sy = (y + 0.5) * sy_scale - 0.5;
        for (int x = 0; x < ow; ++x) {
            double sx = (x + 0.5) * sx_scale - 0.5;
            for (int c = 0; c < input.channels; ++c) {
                if (mode == ResampleMode::bilinear) {
                    out.at(y, x, c) = detail::bilinear_sample(input, sy, sx, c);
                } else {
                    int iy = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, input.height - 1);
                    int ix = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, input.width - 1);
                    out.at(y, x, c) = input.at(iy, ix, c);
                }
            }
        }
    }
    return out;
}

/// Numerically stable softmax (max-subtracted).
inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    double max_logit = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite logit");
        if (v > max_logit) max_logit = v;
    }
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - max_logit);
    double total = pairwise_sum(out);
    for (double& v : out) v /= total;
    return out;
}

inline void require_finite(const LatentState& s, const char* who) {
    if (!all_finite(s.data)) throw InvalidStateError(std::string(who) + ": non-finite latent state");
}

inline void require_finite(const FrameTensor& f, const char* who) {
    if (!all_finite(f.data)) throw InvalidStateError(std::string(who) + ": non-finite frame");
}

} // namespace keep
