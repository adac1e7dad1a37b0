#pragma once

// Fidelity and temporal-consistency metrics. Reductions use fixed-order
// pairwise summation so parallel callers see run-to-run identical values.
// The identity embedder is a documented desk-scale proxy, not a pretrained
// network.

#include <cmath>
#include <functional>
#include <vector>

#include "keep/alignment.hpp"
#include "keep/motion.hpp"
#include "keep/tensor.hpp"

namespace keep {

/// Peak signal-to-noise ratio against MAX = 1, capped at 100 dB so identical
/// frames (zero MSE) stay finite and sequence means stay well-defined.
inline double psnr(const FrameTensor& a, const FrameTensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shapes differ");
    std::vector<double> sq(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        sq[i] = d * d;
    }
    double mse = pairwise_sum(sq) / static_cast<double>(sq.size());
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 1; the map is averaged over all pixels and channels
/// (reflect-padded windows).
inline double ssim(const FrameTensor& a, const FrameTensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shapes differ");
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    Kernel2d window = gaussian_kernel(1.5, 5);
    FrameTensor aa(a.height, a.width, a.channels);
    FrameTensor bb(a.height, a.width, a.channels);
    FrameTensor ab(a.height, a.width, a.channels);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        aa.data[i] = a.data[i] * a.data[i];
        bb.data[i] = b.data[i] * b.data[i];
        ab.data[i] = a.data[i] * b.data[i];
    }
    FrameTensor mu_a = conv2d(a, window, PaddingMode::reflect);
    FrameTensor mu_b = conv2d(b, window, PaddingMode::reflect);
    FrameTensor m_aa = conv2d(aa, window, PaddingMode::reflect);
    FrameTensor m_bb = conv2d(bb, window, PaddingMode::reflect);
    FrameTensor m_ab = conv2d(ab, window, PaddingMode::reflect);
    std::vector<double> map(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double ma = mu_a.data[i], mb = mu_b.data[i];
        double va = m_aa.data[i] - ma * ma;
        double vb = m_bb.data[i] - mb * mb;
        double cov = m_ab.data[i] - ma * mb;
        map[i] = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return pairwise_sum(map) / static_cast<double>(map.size());
}

/// Population standard deviation of a per-frame series.
inline double population_std(const std::vector<double>& series) {
    if (series.empty()) return 0.0;
    double mean = pairwise_sum(series) / static_cast<double>(series.size());
    std::vector<double> sq(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        double d = series[i] - mean;
        sq[i] = d * d;
    }
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
}

struct SeriesMetric {
    double value = 0.0;  // mean over frames
    double sigma = 0.0;  // population standard deviation over frames
    std::vector<double> series;
};

/// Average keypoint distance: per frame, the mean Euclidean landmark gap;
/// the result averages frames and reports the population deviation.
inline SeriesMetric akd(const LandmarkTrack& pred, const LandmarkTrack& gt) {
    if (pred.frames != gt.frames || pred.landmarks != gt.landmarks)
        throw std::invalid_argument("akd: track shapes differ");
    SeriesMetric out;
    out.series.resize(static_cast<std::size_t>(pred.frames));
    std::vector<double> dists(static_cast<std::size_t>(pred.landmarks));
    for (int t = 0; t < pred.frames; ++t) {
        for (int k = 0; k < pred.landmarks; ++k) {
            double dx = pred.x(t, k) - gt.x(t, k);
            double dy = pred.y(t, k) - gt.y(t, k);
            dists[static_cast<std::size_t>(k)] = std::sqrt(dx * dx + dy * dy);
        }
        out.series[static_cast<std::size_t>(t)] = mean_of(dists);
    }
    out.value = mean_of(out.series);
    out.sigma = population_std(out.series);
    return out;
}

/// Produces a unit-norm identity embedding for a frame.
using EmbedderHook = std::function<std::vector<double>(const FrameTensor&)>;

/// Desk-scale identity proxy: 8x8-per-channel average-pooled grid,
/// L2-normalized. An all-zero frame maps to the first basis vector.
inline EmbedderHook default_embedder() {
    return [](const FrameTensor& frame) {
        const int grid = 8;
        std::vector<double> embedding(static_cast<std::size_t>(grid) * grid * frame.channels, 0.0);
        std::vector<double> cell;
        for (int gy = 0; gy < grid; ++gy) {
            int y0 = gy * frame.height / grid;
            int y1 = std::max(y0 + 1, (gy + 1) * frame.height / grid);
            y1 = std::min(y1, frame.height);
            for (int gx = 0; gx < grid; ++gx) {
                int x0 = gx * frame.width / grid;
                int x1 = std::max(x0 + 1, (gx + 1) * frame.width / grid);
                x1 = std::min(x1, frame.width);
                for (int c = 0; c < frame.channels; ++c) {
                    cell.clear();
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x) cell.push_back(frame.at(y, x, c));
                    embedding[(static_cast<std::size_t>(gy) * grid + gx) * frame.channels + c] =
                        mean_of(cell);
                }
            }
        }
        std::vector<double> sq(embedding.size());
        for (std::size_t i = 0; i < embedding.size(); ++i) sq[i] = embedding[i] * embedding[i];
        double norm = std::sqrt(pairwise_sum(sq));
        if (norm < 1e-300) {
            std::fill(embedding.begin(), embedding.end(), 0.0);
            embedding[0] = 1.0;
            return embedding;
        }
        for (double& v : embedding) v /= norm;
        return embedding;
    };
}

/// Identity similarity: cosine between embeddings, per frame; mean and
/// population deviation over the clip.
inline SeriesMetric ids(const std::vector<FrameTensor>& pred, const std::vector<FrameTensor>& gt,
                        const EmbedderHook& embedder) {
    if (pred.size() != gt.size()) throw std::invalid_argument("ids: sequence lengths differ");
    if (pred.empty()) throw std::invalid_argument("ids: empty sequences");
    SeriesMetric out;
    out.series.resize(pred.size());
    for (std::size_t t = 0; t < pred.size(); ++t) {
        std::vector<double> ea = embedder(pred[t]);
        std::vector<double> eb = embedder(gt[t]);
        if (ea.size() != eb.size()) throw std::invalid_argument("ids: embedder output sizes differ");
        std::vector<double> prod(ea.size());
        for (std::size_t i = 0; i < ea.size(); ++i) prod[i] = ea[i] * eb[i];
        out.series[t] = pairwise_sum(prod);
    }
    out.value = mean_of(out.series);
    out.sigma = population_std(out.series);
    return out;
}

/// Masked temporal warping error:
/// sum over t >= 2 of the mean, over valid pixels, of |y_t - warp(y_{t-1}, flow)|.
/// Frames whose mask is empty contribute zero.
inline double temporal_warp_error(const std::vector<FrameTensor>& frames,
                                  const std::vector<FlowField>& flows,
                                  const std::vector<ValidMask>& masks) {
    if (frames.size() < 1) throw std::invalid_argument("temporal_warp_error: empty sequence");
    if (flows.size() != frames.size() - 1 || masks.size() != frames.size() - 1)
        throw std::invalid_argument("temporal_warp_error: need T-1 flows and masks");
    double total = 0.0;
    std::vector<double> terms;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const FrameTensor& cur = frames[t];
        FrameTensor warped = warp(frames[t - 1], flows[t - 1]);
        const ValidMask& mask = masks[t - 1];
        if (mask.height != cur.height || mask.width != cur.width)
            throw std::invalid_argument("temporal_warp_error: mask shape mismatch");
        terms.clear();
        for (int y = 0; y < cur.height; ++y) {
            for (int x = 0; x < cur.width; ++x) {
                if (!mask.at(y, x)) continue;
                for (int c = 0; c < cur.channels; ++c)
                    terms.push_back(std::abs(cur.at(y, x, c) - warped.at(y, x, c)));
            }
        }
        if (!terms.empty()) total += mean_of(terms);
    }
    return total;
}

} // namespace keep
