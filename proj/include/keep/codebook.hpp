#pragma once

// Vector-quantized codebook: nearest-neighbor token lookup and the
// code-level training losses. Stop-gradient semantics are carried as
// gradient-routing descriptors on the loss results; there is no autodiff.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "keep/rng.hpp"
#include "keep/tensor.hpp"

namespace keep {

struct Codebook {
    int count = 0;     // N
    int dimension = 0; // d
    std::vector<double> codes; // row-major (N, d)

    Codebook() = default;
    Codebook(int n, int d)
        : count(n), dimension(d), codes(static_cast<std::size_t>(n) * d, 0.0) {
        if (n < 1 || d < 1) throw std::invalid_argument("Codebook: N and d must be >= 1");
    }

    double& at(int k, int j) { return codes[static_cast<std::size_t>(k) * dimension + j]; }
    double at(int k, int j) const { return codes[static_cast<std::size_t>(k) * dimension + j]; }

    /// Desk-scale default: seeded gaussian entries scaled to unit RMS.
    static Codebook seeded(int n, int d, std::uint64_t seed) {
        Codebook book(n, d);
        SeededRng rng(seed);
        for (double& v : book.codes) v = rng.gaussian();
        double ms = 0.0;
        for (double v : book.codes) ms += v * v;
        double rms = std::sqrt(ms / static_cast<double>(book.codes.size()));
        if (rms > 0.0) {
            for (double& v : book.codes) v /= rms;
        }
        return book;
    }
};

struct QuantizedCode {
    int h = 0;
    int w = 0;
    std::vector<int> indices;  // (h, w), values in [0, N)
    LatentState quantized;     // assembled from codebook rows

    int index_at(int i, int j) const { return indices[static_cast<std::size_t>(i) * w + j]; }
};

/// Nearest-neighbor quantization per token (squared L2), ties broken by the
/// smallest index.
inline QuantizedCode quantize(const LatentState& state, const Codebook& book) {
    if (state.c != book.dimension)
        throw std::invalid_argument("quantize: state channels do not match codebook dimension");
    QuantizedCode out;
    out.h = state.h;
    out.w = state.w;
    out.indices.assign(static_cast<std::size_t>(state.h) * state.w, 0);
    out.quantized = LatentState(state.h, state.w, state.c);
    for (int i = 0; i < state.h; ++i) {
        for (int j = 0; j < state.w; ++j) {
            int best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (int k = 0; k < book.count; ++k) {
                double dist = 0.0;
                for (int ch = 0; ch < state.c; ++ch) {
                    double diff = state.at(i, j, ch) - book.at(k, ch);
                    dist += diff * diff;
                }
                if (dist < best_dist) {
                    best_dist = dist;
                    best = k;
                }
            }
            out.indices[static_cast<std::size_t>(i) * state.w + j] = best;
            for (int ch = 0; ch < state.c; ++ch) out.quantized.at(i, j, ch) = book.at(best, ch);
        }
    }
    return out;
}

/// Code-level losses of codebook pre-training. Both scalars equal the mean
/// squared encoder/quantized gap; they differ only in gradient routing: the
/// codebook term's gradient flows to the codes, the commitment term's to the
/// encoder output.
struct CodeLosses {
    double codebook_loss = 0.0;
    double commit_loss = 0.0;
    LatentState d_commit_d_encoder;      // gradient of commit_loss w.r.t. encoder_out
    std::vector<double> d_codebook_d_codes; // (N, d) gradient of codebook_loss w.r.t. codes
};

// beta_commit is accepted for parity with the classic commitment formulation;
// the returned scalars follow the contract that both terms share one value,
// so it does not rescale them.
inline CodeLosses code_losses(const LatentState& encoder_out, const QuantizedCode& quantized,
                              const Codebook& book, double beta_commit = 1.0) {
    (void)beta_commit;
    if (!encoder_out.same_shape(quantized.quantized))
        throw std::invalid_argument("code_losses: shapes differ");
    CodeLosses out;
    out.d_commit_d_encoder = LatentState(encoder_out.h, encoder_out.w, encoder_out.c);
    out.d_codebook_d_codes.assign(static_cast<std::size_t>(book.count) * book.dimension, 0.0);
    const auto n = static_cast<double>(encoder_out.data.size());
    std::vector<double> sq(encoder_out.data.size());
    for (std::size_t i = 0; i < encoder_out.data.size(); ++i) {
        double diff = encoder_out.data[i] - quantized.quantized.data[i];
        sq[i] = diff * diff;
        out.d_commit_d_encoder.data[i] = 2.0 * diff / n;
    }
    double mse = pairwise_sum(sq) / n;
    out.codebook_loss = mse;
    out.commit_loss = mse;
    for (int i = 0; i < encoder_out.h; ++i) {
        for (int j = 0; j < encoder_out.w; ++j) {
            int k = quantized.index_at(i, j);
            for (int ch = 0; ch < encoder_out.c; ++ch) {
                double diff = quantized.quantized.at(i, j, ch) - encoder_out.at(i, j, ch);
                out.d_codebook_d_codes[static_cast<std::size_t>(k) * book.dimension + ch] +=
                    2.0 * diff / n;
            }
        }
    }
    return out;
}

/// Token-prediction cross entropy: mean over tokens of -log softmax(logits)[target].
struct TokenCrossEntropy {
    double loss = 0.0;
    std::vector<double> d_loss_d_logits; // same layout as logits (h, w, N)
};

inline TokenCrossEntropy token_cross_entropy(const LatentState& logits,
                                             const std::vector<int>& target_indices) {
    const int h = logits.h, w = logits.w, n_codes = logits.c;
    if (target_indices.size() != static_cast<std::size_t>(h) * w)
        throw std::invalid_argument("token_cross_entropy: target grid shape mismatch");
    for (int t : target_indices) {
        if (t < 0 || t >= n_codes)
            throw std::invalid_argument("token_cross_entropy: target index out of range");
    }
    TokenCrossEntropy out;
    out.d_loss_d_logits.assign(logits.data.size(), 0.0);
    const double inv_tokens = 1.0 / (static_cast<double>(h) * w);
    std::vector<double> token_losses(static_cast<std::size_t>(h) * w);
    std::vector<double> row(static_cast<std::size_t>(n_codes));
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            for (int k = 0; k < n_codes; ++k) row[static_cast<std::size_t>(k)] = logits.at(i, j, k);
            std::vector<double> probs = softmax(row);
            int target = target_indices[static_cast<std::size_t>(i) * w + j];
            // log(prob) via the stable path: logit - max - log(sum exp)
            double max_logit = *std::max_element(row.begin(), row.end());
            std::vector<double> exps(row.size());
            for (std::size_t k = 0; k < row.size(); ++k) exps[k] = std::exp(row[k] - max_logit);
            double log_norm = max_logit + std::log(pairwise_sum(exps));
            token_losses[static_cast<std::size_t>(i) * w + j] = log_norm - row[static_cast<std::size_t>(target)];
            for (int k = 0; k < n_codes; ++k) {
                double grad = probs[static_cast<std::size_t>(k)] - (k == target ? 1.0 : 0.0);
                out.d_loss_d_logits[(static_cast<std::size_t>(i) * w + j) * n_codes + k] =
                    grad * inv_tokens;
            }
        }
    }
    out.loss = pairwise_sum(token_losses) * inv_tokens;
    return out;
}

} // namespace keep
