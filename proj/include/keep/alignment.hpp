#pragma once

// Landmark-track smoothing and canonical-template alignment. The temporal
// Gaussian filter always renormalizes its (possibly truncated) window so
// constant tracks are fixed points.

#include <cmath>
#include <vector>

#include "keep/errors.hpp"
#include "keep/tensor.hpp"

namespace keep {

/// (x, y) pixel coordinates for L landmarks over T frames.
struct LandmarkTrack {
    int frames = 0;
    int landmarks = 0;
    std::vector<double> xy; // (t, k) -> (x, y)

    LandmarkTrack() = default;
    LandmarkTrack(int t, int l)
        : frames(t), landmarks(l), xy(static_cast<std::size_t>(t) * l * 2, 0.0) {
        if (t < 1 || l < 1) throw std::invalid_argument("LandmarkTrack: T and L must be >= 1");
    }

    double& x(int t, int k) { return xy[(static_cast<std::size_t>(t) * landmarks + k) * 2]; }
    double& y(int t, int k) { return xy[(static_cast<std::size_t>(t) * landmarks + k) * 2 + 1]; }
    double x(int t, int k) const { return xy[(static_cast<std::size_t>(t) * landmarks + k) * 2]; }
    double y(int t, int k) const { return xy[(static_cast<std::size_t>(t) * landmarks + k) * 2 + 1]; }
};

/// Temporal Gaussian low-pass over each landmark coordinate. Windows are
/// truncated at clip boundaries and renormalized to sum to 1.
inline LandmarkTrack smooth_landmarks(const LandmarkTrack& track, double sigma, int radius) {
    if (!(sigma > 0.0)) throw std::invalid_argument("smooth_landmarks: sigma must be > 0");
    if (radius < 1) throw std::invalid_argument("smooth_landmarks: radius must be >= 1");
    std::vector<double> taps(static_cast<std::size_t>(radius) + 1);
    for (int d = 0; d <= radius; ++d)
        taps[static_cast<std::size_t>(d)] = std::exp(-(static_cast<double>(d) * d) / (2.0 * sigma * sigma));
    LandmarkTrack out(track.frames, track.landmarks);
    for (int t = 0; t < track.frames; ++t) {
        int lo = std::max(0, t - radius);
        int hi = std::min(track.frames - 1, t + radius);
        double norm = 0.0;
        for (int n = lo; n <= hi; ++n) norm += taps[static_cast<std::size_t>(std::abs(n - t))];
        for (int k = 0; k < track.landmarks; ++k) {
            double sx = 0.0, sy = 0.0;
            for (int n = lo; n <= hi; ++n) {
                double w = taps[static_cast<std::size_t>(std::abs(n - t))];
                sx += w * track.x(n, k);
                sy += w * track.y(n, k);
            }
            out.x(t, k) = sx / norm;
            out.y(t, k) = sy / norm;
        }
    }
    return out;
}

/// 4-DOF similarity p -> s R p + t.
struct SimilarityTransform {
    double scale = 1.0;
    double rotation = 0.0; // radians
    double tx = 0.0;
    double ty = 0.0;

    std::pair<double, double> apply(double x, double y) const {
        double c = std::cos(rotation), s = std::sin(rotation);
        return {scale * (c * x - s * y) + tx, scale * (s * x + c * y) + ty};
    }

    std::pair<double, double> apply_inverse(double x, double y) const {
        double c = std::cos(rotation), s = std::sin(rotation);
        double dx = (x - tx) / scale, dy = (y - ty) / scale;
        return {c * dx + s * dy, -s * dx + c * dy};
    }
};

/// Least-squares similarity (Procrustes closed form) minimizing
/// sum_i | s R p_i + t - q_i |^2 over rotation-only similarities.
inline SimilarityTransform estimate_similarity(const std::vector<std::pair<double, double>>& src,
                                               const std::vector<std::pair<double, double>>& dst) {
    if (src.size() != dst.size())
        throw std::invalid_argument("estimate_similarity: point counts differ");
    if (src.size() < 2) throw std::invalid_argument("estimate_similarity: need >= 2 point pairs");
    const auto n = static_cast<double>(src.size());
    double mx = 0.0, my = 0.0, qx = 0.0, qy = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        mx += src[i].first;
        my += src[i].second;
        qx += dst[i].first;
        qy += dst[i].second;
    }
    mx /= n; my /= n; qx /= n; qy /= n;
    double dot = 0.0, cross = 0.0, src_norm = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        double px = src[i].first - mx, py = src[i].second - my;
        double dx = dst[i].first - qx, dy = dst[i].second - qy;
        dot += px * dx + py * dy;
        cross += px * dy - py * dx;
        src_norm += px * px + py * py;
    }
    if (src_norm <= 0.0)
        throw RankDeficiencyError("estimate_similarity: source points are coincident");
    SimilarityTransform t;
    t.rotation = std::atan2(cross, dot);
    t.scale = std::sqrt(dot * dot + cross * cross) / src_norm;
    if (!(t.scale > 0.0))
        throw RankDeficiencyError("estimate_similarity: degenerate scale");
    double c = std::cos(t.rotation), s = std::sin(t.rotation);
    t.tx = qx - t.scale * (c * mx - s * my);
    t.ty = qy - t.scale * (s * mx + c * my);
    return t;
}

/// Resample a frame into the canonical space of the transform:
/// out(q) = frame(T^{-1}(q)), bilinear, border clamped.
inline FrameTensor align_frame(const FrameTensor& frame, const SimilarityTransform& transform,
                               int out_height, int out_width) {
    if (out_height < 1 || out_width < 1)
        throw std::invalid_argument("align_frame: output shape must be positive");
    FrameTensor out(out_height, out_width, frame.channels);
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            auto [sx, sy] = transform.apply_inverse(static_cast<double>(x), static_cast<double>(y));
            for (int c = 0; c < frame.channels; ++c)
                out.at(y, x, c) = detail::bilinear_sample(frame, sy, sx, c);
        }
    }
    return out;
}

} // namespace keep
