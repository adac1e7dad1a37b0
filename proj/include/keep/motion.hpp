#pragma once

// Desk-scale motion: block-matching flow estimation, backward warping, and
// forward-backward consistency masks. Flow convention matches warp():
// output(p) samples the source frame at p + flow(p).

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "keep/errors.hpp"
#include "keep/io.hpp"
#include "keep/parallel.hpp"
#include "keep/tensor.hpp"

namespace keep {

/// Per-pixel displacement field, (u, v) in pixels, row-major.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<double> data; // (y, x) -> (u, v)

    FlowField() = default;
    FlowField(int h, int w, double u0 = 0.0, double v0 = 0.0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 2) {
        if (h < 1 || w < 1) throw std::invalid_argument("FlowField: dimensions must be positive");
        for (std::size_t i = 0; i < data.size(); i += 2) {
            data[i] = u0;
            data[i + 1] = v0;
        }
    }

    double& u(int y, int x) { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }
    double& v(int y, int x) { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
    double u(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }
    double v(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
};

/// Binary validity mask.
struct ValidMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    ValidMask() = default;
    ValidMask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {
        if (h < 1 || w < 1) throw std::invalid_argument("ValidMask: dimensions must be positive");
    }

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Backward warp: out(p) = bilinear sample of frame at p + flow(p), border
/// clamped. Zero flow reproduces the frame bitwise.
inline FrameTensor warp(const FrameTensor& frame, const FlowField& flow) {
    if (flow.height != frame.height || flow.width != frame.width)
        throw std::invalid_argument("warp: flow shape does not match frame");
    FrameTensor out(frame.height, frame.width, frame.channels);
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            double sx = x + flow.u(y, x);
            double sy = y + flow.v(y, x);
            for (int c = 0; c < frame.channels; ++c)
                out.at(y, x, c) = detail::bilinear_sample(frame, sy, sx, c);
        }
    }
    return out;
}

namespace detail {

inline double clamped_pixel(const FrameTensor& f, int y, int x, int c) {
    y = std::clamp(y, 0, f.height - 1);
    x = std::clamp(x, 0, f.width - 1);
    return f.at(y, x, c);
}

/// Piecewise-linear interpolation over a monotone coordinate grid; clamps
/// outside the node range. Returns (segment index, weight toward the upper node).
inline std::pair<int, double> grid_segment(const std::vector<double>& centers, double coord) {
    int n = static_cast<int>(centers.size());
    if (n == 1 || coord <= centers.front()) return {0, 0.0};
    if (coord >= centers.back()) return {n - 2, 1.0};
    int seg = 0;
    while (seg + 2 < n && centers[seg + 1] <= coord) ++seg;
    double span = centers[seg + 1] - centers[seg];
    return {seg, span > 0.0 ? (coord - centers[seg]) / span : 0.0};
}

} // namespace detail

/// Integer block-matching flow from prev to next. Each block of the next
/// frame searches [-radius, radius]^2 for the SAD-minimizing displacement
/// into prev (clamped reads); ties prefer smaller |d|^2, then smaller u, then
/// smaller v. The per-block grid is bilinearly interpolated to pixels.
inline FlowField estimate_flow_block_matching(const FrameTensor& prev, const FrameTensor& next,
                                              int block = 8, int search_radius = 8) {
    if (!prev.same_shape(next))
        throw std::invalid_argument("estimate_flow_block_matching: frame shapes differ");
    if (block < 4) throw std::invalid_argument("estimate_flow_block_matching: block must be >= 4");
    if (search_radius < 1)
        throw std::invalid_argument("estimate_flow_block_matching: search_radius must be >= 1");

    const int nby = (prev.height + block - 1) / block;
    const int nbx = (prev.width + block - 1) / block;
    std::vector<double> grid_u(static_cast<std::size_t>(nby) * nbx, 0.0);
    std::vector<double> grid_v(grid_u.size(), 0.0);
    std::vector<double> centers_y(nby), centers_x(nbx);
    for (int bi = 0; bi < nby; ++bi) {
        int y0 = bi * block, y1 = std::min(prev.height, y0 + block);
        centers_y[bi] = 0.5 * (y0 + y1 - 1);
    }
    for (int bj = 0; bj < nbx; ++bj) {
        int x0 = bj * block, x1 = std::min(prev.width, x0 + block);
        centers_x[bj] = 0.5 * (x0 + x1 - 1);
    }

    parallel_for(static_cast<std::size_t>(nby) * nbx, [&](std::size_t b) {
        int bi = static_cast<int>(b) / nbx;
        int bj = static_cast<int>(b) % nbx;
        int y0 = bi * block, y1 = std::min(prev.height, y0 + block);
        int x0 = bj * block, x1 = std::min(prev.width, x0 + block);
        double best_sad = 0.0;
        int best_u = 0, best_v = 0;
        long best_mag = 0;
        bool first = true;
        for (int dv = -search_radius; dv <= search_radius; ++dv) {
            for (int du = -search_radius; du <= search_radius; ++du) {
                double sad = 0.0;
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        for (int c = 0; c < prev.channels; ++c) {
                            sad += std::abs(next.at(y, x, c) -
                                            detail::clamped_pixel(prev, y + dv, x + du, c));
                        }
                    }
                }
                long mag = static_cast<long>(du) * du + static_cast<long>(dv) * dv;
                bool better = first || sad < best_sad ||
                              (sad == best_sad &&
                               (mag < best_mag ||
                                (mag == best_mag &&
                                 (du < best_u || (du == best_u && dv < best_v)))));
                if (better) {
                    best_sad = sad;
                    best_u = du;
                    best_v = dv;
                    best_mag = mag;
                    first = false;
                }
            }
        }
        grid_u[b] = best_u;
        grid_v[b] = best_v;
    });

    FlowField flow(prev.height, prev.width);
    for (int y = 0; y < prev.height; ++y) {
        auto [si, ty] = detail::grid_segment(centers_y, y);
        for (int x = 0; x < prev.width; ++x) {
            auto [sj, tx] = detail::grid_segment(centers_x, x);
            auto lerp2 = [&](const std::vector<double>& g) {
                std::size_t i00 = static_cast<std::size_t>(si) * nbx + sj;
                std::size_t i01 = i00 + (nbx > 1 ? 1 : 0);
                std::size_t i10 = i00 + (nby > 1 ? static_cast<std::size_t>(nbx) : 0);
                std::size_t i11 = i10 + (nbx > 1 ? 1 : 0);
                double top = g[i00] + tx * (g[i01] - g[i00]);
                double bottom = g[i10] + tx * (g[i11] - g[i10]);
                return top + ty * (bottom - top);
            };
            flow.u(y, x) = lerp2(grid_u);
            flow.v(y, x) = lerp2(grid_v);
        }
    }
    return flow;
}

namespace detail {

inline std::pair<double, double> sample_flow(const FlowField& f, double sy, double sx) {
    sx = std::clamp(sx, 0.0, static_cast<double>(f.width - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(f.height - 1));
    int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
    int x1 = std::min(x0 + 1, f.width - 1), y1 = std::min(y0 + 1, f.height - 1);
    double fx = sx - x0, fy = sy - y0;
    auto lerp = [&](auto get) {
        double top = get(y0, x0) * (1.0 - fx) + get(y0, x1) * fx;
        double bottom = get(y1, x0) * (1.0 - fx) + get(y1, x1) * fx;
        return top * (1.0 - fy) + bottom * fy;
    };
    return {lerp([&](int y, int x) { return f.u(y, x); }),
            lerp([&](int y, int x) { return f.v(y, x); })};
}

} // namespace detail

/// Forward-backward consistency: pixel p is valid iff
/// |fwd(p) + bwd(p + fwd(p))|^2 <= alpha * (|fwd(p)|^2 + |bwd(p + fwd(p))|^2) + beta.
inline ValidMask fb_consistency_mask(const FlowField& fwd, const FlowField& bwd,
                                     double alpha = 0.01, double beta = 0.5) {
    if (fwd.height != bwd.height || fwd.width != bwd.width)
        throw std::invalid_argument("fb_consistency_mask: flow shapes differ");
    if (alpha < 0.0 || beta < 0.0)
        throw std::invalid_argument("fb_consistency_mask: alpha and beta must be >= 0");
    ValidMask mask(fwd.height, fwd.width);
    for (int y = 0; y < fwd.height; ++y) {
        for (int x = 0; x < fwd.width; ++x) {
            double fu = fwd.u(y, x), fv = fwd.v(y, x);
            auto [bu, bv] = detail::sample_flow(bwd, y + fv, x + fu);
            double residual = (fu + bu) * (fu + bu) + (fv + bv) * (fv + bv);
            double budget = alpha * (fu * fu + fv * fv + bu * bu + bv * bv) + beta;
            mask.at(y, x) = residual <= budget ? 1 : 0;
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Middlebury .flo: float LE magic 202021.25, int32 width, int32 height, then
// interleaved float32 (u, v) row-major.
// ---------------------------------------------------------------------------

inline void write_flo(const std::string& path, const FlowField& flow) {
    auto out = io::detail::open_out(path);
    io::detail::put_f32(out, 202021.25f);
    io::detail::put_u32(out, static_cast<std::uint32_t>(flow.width));
    io::detail::put_u32(out, static_cast<std::uint32_t>(flow.height));
    for (double v : flow.data) io::detail::put_f32(out, static_cast<float>(v));
    if (!out) throw IoError("write failed: " + path);
}

inline FlowField read_flo(const std::string& path) {
    auto in = io::detail::open_in(path);
    float magic = io::detail::get_f32(in, path);
    if (magic != 202021.25f) throw FormatError("not a .flo file: " + path);
    auto width = static_cast<std::int32_t>(io::detail::get_u32(in, path));
    auto height = static_cast<std::int32_t>(io::detail::get_u32(in, path));
    if (width < 1 || height < 1) throw FormatError("bad .flo dimensions: " + path);
    FlowField flow(height, width);
    for (double& v : flow.data) v = io::detail::get_f32(in, path);
    return flow;
}

} // namespace keep
