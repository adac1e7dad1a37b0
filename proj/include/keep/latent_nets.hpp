#pragma once

// Parameterized blocks of the restoration network at desk scale:
// cross-frame attention, spatial-temporal attention, controllable feature
// transformation, the Kalman gain network, and the toy encoder/decoder pair
// standing in for the pretrained backbone. Every block is a deterministic
// pure function of (inputs, params).

#include <cmath>
#include <cstdint>
#include <vector>

#include "keep/rng.hpp"
#include "keep/tensor.hpp"

namespace keep {

/// Single-head projection matrices over the feature dimension.
struct AttentionWeights {
    int d_feat = 0;
    Kernel2d query; // all (d_feat, d_feat)
    Kernel2d key;
    Kernel2d value;

    static AttentionWeights identity(int d) {
        AttentionWeights w;
        w.d_feat = d;
        w.query = Kernel2d(d, d);
        w.key = Kernel2d(d, d);
        w.value = Kernel2d(d, d);
        for (int i = 0; i < d; ++i) {
            w.query.at(i, i) = 1.0;
            w.key.at(i, i) = 1.0;
            w.value.at(i, i) = 1.0;
        }
        return w;
    }

    static AttentionWeights seeded(int d, std::uint64_t seed) {
        AttentionWeights w = identity(d);
        SeededRng rng(seed);
        double scale = 1.0 / std::sqrt(static_cast<double>(d));
        for (Kernel2d* m : {&w.query, &w.key, &w.value}) {
            for (double& v : m->w) v = rng.gaussian() * scale;
        }
        return w;
    }
};

/// Channel-mixing convolution with zero padding and odd kernel size.
/// Weight layout: (out_channel, in_channel, ky, kx), row-major.
struct ChannelConv {
    int in_c = 0;
    int out_c = 0;
    int ksize = 1;
    std::vector<double> weights;
    std::vector<double> bias;

    ChannelConv() = default;
    ChannelConv(int in, int out, int k)
        : in_c(in), out_c(out), ksize(k),
          weights(static_cast<std::size_t>(out) * in * k * k, 0.0),
          bias(static_cast<std::size_t>(out), 0.0) {
        if (k % 2 == 0) throw std::invalid_argument("ChannelConv: kernel size must be odd");
    }

    static ChannelConv seeded(int in, int out, int k, std::uint64_t seed) {
        ChannelConv conv(in, out, k);
        SeededRng rng(seed);
        double scale = 1.0 / std::sqrt(static_cast<double>(in) * k * k);
        for (double& v : conv.weights) v = rng.gaussian() * scale;
        for (double& v : conv.bias) v = 0.0;
        return conv;
    }

    std::vector<double> apply(const std::vector<double>& data, int height, int width) const {
        std::vector<double> out(static_cast<std::size_t>(height) * width * out_c, 0.0);
        const int r = ksize / 2;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                for (int oc = 0; oc < out_c; ++oc) {
                    double acc = bias[static_cast<std::size_t>(oc)];
                    for (int ky = 0; ky < ksize; ++ky) {
                        int sy = y + ky - r;
                        if (sy < 0 || sy >= height) continue;
                        for (int kx = 0; kx < ksize; ++kx) {
                            int sx = x + kx - r;
                            if (sx < 0 || sx >= width) continue;
                            std::size_t pix = (static_cast<std::size_t>(sy) * width + sx) *
                                              static_cast<std::size_t>(in_c);
                            std::size_t wbase =
                                ((static_cast<std::size_t>(oc) * in_c) * ksize + ky) * ksize + kx;
                            for (int ic = 0; ic < in_c; ++ic) {
                                acc += data[pix + ic] *
                                       weights[wbase + static_cast<std::size_t>(ic) * ksize * ksize];
                            }
                        }
                    }
                    out[(static_cast<std::size_t>(y) * width + x) * out_c + oc] = acc;
                }
            }
        }
        return out;
    }
};

namespace detail {

inline void relu_inplace(std::vector<double>& v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
}

struct AttentionOutcome {
    LatentState output;
    int queries = 0;
    int keys = 0;
    std::vector<double> weights; // (queries, keys) row-major softmax weights
};

/// Shared scaled-dot-product core. Key/value tokens come from the
/// concatenation of the given source states in order.
inline AttentionOutcome attend(const LatentState& query_state,
                               const std::vector<const LatentState*>& kv_sources,
                               const AttentionWeights& w) {
    const int c = query_state.c;
    if (w.d_feat != c)
        throw std::invalid_argument("attention: weights dimension does not match channels");
    for (const LatentState* src : kv_sources) {
        if (!src->same_shape(query_state))
            throw std::invalid_argument("attention: state shapes differ");
    }
    const int n_q = query_state.h * query_state.w;
    const int n_k = n_q * static_cast<int>(kv_sources.size());

    auto project = [&](const Kernel2d& m, const double* token, double* out_vec) {
        for (int i = 0; i < c; ++i) {
            double acc = 0.0;
            for (int j = 0; j < c; ++j) acc += m.at(i, j) * token[j];
            out_vec[i] = acc;
        }
    };

    std::vector<double> keys(static_cast<std::size_t>(n_k) * c);
    std::vector<double> values(static_cast<std::size_t>(n_k) * c);
    int kt = 0;
    for (const LatentState* src : kv_sources) {
        for (int t = 0; t < n_q; ++t, ++kt) {
            const double* token = src->data.data() + static_cast<std::size_t>(t) * c;
            project(w.key, token, keys.data() + static_cast<std::size_t>(kt) * c);
            project(w.value, token, values.data() + static_cast<std::size_t>(kt) * c);
        }
    }

    AttentionOutcome outcome;
    outcome.output = LatentState(query_state.h, query_state.w, c);
    outcome.queries = n_q;
    outcome.keys = n_k;
    outcome.weights.assign(static_cast<std::size_t>(n_q) * n_k, 0.0);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(c));
    std::vector<double> q_vec(static_cast<std::size_t>(c));
    std::vector<double> scores(static_cast<std::size_t>(n_k));
    for (int t = 0; t < n_q; ++t) {
        project(w.query, query_state.data.data() + static_cast<std::size_t>(t) * c, q_vec.data());
        for (int k = 0; k < n_k; ++k) {
            double dot = 0.0;
            const double* key = keys.data() + static_cast<std::size_t>(k) * c;
            for (int i = 0; i < c; ++i) dot += q_vec[i] * key[i];
            scores[static_cast<std::size_t>(k)] = dot * inv_sqrt_d;
        }
        std::vector<double> attn = softmax(scores);
        double* out_token = outcome.output.data.data() + static_cast<std::size_t>(t) * c;
        for (int k = 0; k < n_k; ++k) {
            double a = attn[static_cast<std::size_t>(k)];
            outcome.weights[static_cast<std::size_t>(t) * n_k + k] = a;
            const double* val = values.data() + static_cast<std::size_t>(k) * c;
            for (int i = 0; i < c; ++i) out_token[i] += a * val[i];
        }
    }
    return outcome;
}

} // namespace detail

/// Cross-frame attention: current-frame tokens query the previous frame's
/// keys/values; softmax(Q K^T / sqrt(d)) V, single head.
inline detail::AttentionOutcome cross_frame_attention_debug(const LatentState& v_t,
                                                            const LatentState& v_prev,
                                                            const AttentionWeights& w) {
    return detail::attend(v_t, {&v_prev}, w);
}

inline LatentState cross_frame_attention(const LatentState& v_t, const LatentState& v_prev,
                                         const AttentionWeights& w) {
    return cross_frame_attention_debug(v_t, v_prev, w).output;
}

/// Spatial-temporal attention: the key/value set is the concatenation of the
/// anchor (first) frame and the previous frame.
inline detail::AttentionOutcome st_attention_debug(const LatentState& query_state,
                                                   const LatentState& anchor_state,
                                                   const LatentState& prev_state,
                                                   const AttentionWeights& w) {
    return detail::attend(query_state, {&anchor_state, &prev_state}, w);
}

inline LatentState st_attention(const LatentState& query_state, const LatentState& anchor_state,
                                const LatentState& prev_state, const AttentionWeights& w) {
    return st_attention_debug(query_state, anchor_state, prev_state, w).output;
}

/// Stack of channel-mixing convolutions with a rectifier between layers.
struct ModulationStack {
    std::vector<ChannelConv> layers;

    std::vector<double> apply(const std::vector<double>& data, int height, int width) const {
        if (layers.empty()) throw std::invalid_argument("ModulationStack: no layers");
        std::vector<double> cur = layers.front().apply(data, height, width);
        for (std::size_t i = 1; i < layers.size(); ++i) {
            detail::relu_inplace(cur);
            cur = layers[i].apply(cur, height, width);
        }
        return cur;
    }
};

/// Controllable feature transformation: (alpha, beta) = stack(encoder_feat)
/// split along channels; out = F_d + alpha * F_d + beta.
inline FrameTensor cft(const FrameTensor& decoder_feat, const FrameTensor& encoder_feat,
                       const ModulationStack& modulation_convs) {
    if (!decoder_feat.same_shape(encoder_feat))
        throw std::invalid_argument("cft: feature shapes differ");
    if (modulation_convs.layers.empty() ||
        modulation_convs.layers.front().in_c != encoder_feat.channels ||
        modulation_convs.layers.back().out_c != 2 * decoder_feat.channels)
        throw std::invalid_argument("cft: modulation stack must map C channels to 2C");
    std::vector<double> ab =
        modulation_convs.apply(encoder_feat.data, encoder_feat.height, encoder_feat.width);
    const int c = decoder_feat.channels;
    FrameTensor out(decoder_feat.height, decoder_feat.width, c);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            std::size_t pix = static_cast<std::size_t>(y) * out.width + x;
            for (int ch = 0; ch < c; ++ch) {
                double alpha = ab[pix * 2 * c + ch];
                double beta = ab[pix * 2 * c + c + ch];
                double fd = decoder_feat.at(y, x, ch);
                out.at(y, x, ch) = fd + alpha * fd + beta;
            }
        }
    }
    return out;
}

/// Kalman Gain Network parameters: ST-Attn over code channels, a two-layer
/// uncertainty stack, and a 1x1 gain head squashed by a logistic.
struct KgnParams {
    AttentionWeights st_attention;
    ChannelConv uncertainty_conv1; // 3x3, c -> c
    ChannelConv uncertainty_conv2; // 3x3, c -> c
    ChannelConv gain_head;         // 1x1, c -> 1

    static KgnParams seeded(int channels, std::uint64_t seed) {
        KgnParams p;
        p.st_attention = AttentionWeights::seeded(channels, splitmix64(seed ^ 1));
        p.uncertainty_conv1 = ChannelConv::seeded(channels, channels, 3, splitmix64(seed ^ 2));
        p.uncertainty_conv2 = ChannelConv::seeded(channels, channels, 3, splitmix64(seed ^ 3));
        p.gain_head = ChannelConv::seeded(channels, 1, 1, splitmix64(seed ^ 4));
        return p;
    }

    static KgnParams zeros(int channels) {
        KgnParams p;
        p.st_attention = AttentionWeights::identity(channels);
        p.uncertainty_conv1 = ChannelConv(channels, channels, 3);
        p.uncertainty_conv2 = ChannelConv(channels, channels, 3);
        p.gain_head = ChannelConv(channels, 1, 1);
        for (Kernel2d* m : {&p.st_attention.query, &p.st_attention.key, &p.st_attention.value})
            for (double& v : m->w) v = 0.0;
        return p;
    }
};

/// Learned per-token gain: ST-Attn(current | anchor, prev) -> conv -> relu ->
/// conv -> 1x1 head -> logistic. Output is strictly inside (0,1).
inline GainField kgn_gain(const LatentState& anchor, const LatentState& prev_obs,
                          const LatentState& current_obs, const KgnParams& params) {
    if (!anchor.same_shape(prev_obs) || !anchor.same_shape(current_obs))
        throw std::invalid_argument("kgn_gain: state shapes differ");
    LatentState features = st_attention(current_obs, anchor, prev_obs, params.st_attention);
    std::vector<double> u1 = params.uncertainty_conv1.apply(features.data, features.h, features.w);
    detail::relu_inplace(u1);
    std::vector<double> u2 = params.uncertainty_conv2.apply(u1, features.h, features.w);
    std::vector<double> logits = params.gain_head.apply(u2, features.h, features.w);
    GainField gain(features.h, features.w);
    for (std::size_t i = 0; i < logits.size(); ++i)
        gain.data[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    return gain;
}

// ---------------------------------------------------------------------------
// Toy codec: the desk-scale stand-in for the pretrained encoders/decoder.
// ---------------------------------------------------------------------------

enum class ToyCodecMode { pool_identity, conv_seeded };

/// pool-identity: encoder is a per-channel scale x scale average pool,
/// decoder a nearest-neighbor upsample; encode(decode(z)) == z exactly.
/// conv-seeded: seeded channel-mixing convolutions around the same
/// pool/upsample, for structural exercises.
struct ToyCodec {
    ToyCodecMode mode = ToyCodecMode::pool_identity;
    int scale = 32;
    int channels = 0;       // latent channels (pool-identity: frame channels)
    int frame_channels = 0; // conv-seeded only
    ChannelConv enc_conv;
    ChannelConv dec_conv;

    static ToyCodec pool_identity(int channels, int scale = 32) {
        ToyCodec codec;
        codec.mode = ToyCodecMode::pool_identity;
        codec.scale = scale;
        codec.channels = channels;
        codec.frame_channels = channels;
        return codec;
    }

    static ToyCodec conv_seeded(int frame_channels, int latent_channels, std::uint64_t seed,
                                int scale = 32) {
        ToyCodec codec;
        codec.mode = ToyCodecMode::conv_seeded;
        codec.scale = scale;
        codec.channels = latent_channels;
        codec.frame_channels = frame_channels;
        codec.enc_conv = ChannelConv::seeded(frame_channels, latent_channels, 3, splitmix64(seed ^ 11));
        codec.dec_conv = ChannelConv::seeded(latent_channels, frame_channels, 3, splitmix64(seed ^ 12));
        return codec;
    }
};

inline LatentState toy_encode(const FrameTensor& frame, const ToyCodec& codec) {
    if (frame.height % codec.scale != 0 || frame.width % codec.scale != 0)
        throw std::invalid_argument("toy_encode: frame dimensions must be divisible by the stride");
    const int s = codec.scale;
    std::vector<double> working = frame.data;
    int in_c = frame.channels;
    if (codec.mode == ToyCodecMode::conv_seeded) {
        if (frame.channels != codec.frame_channels)
            throw std::invalid_argument("toy_encode: frame channels do not match codec");
        working = codec.enc_conv.apply(working, frame.height, frame.width);
        in_c = codec.channels;
    } else if (codec.channels != 0 && codec.channels != frame.channels) {
        throw std::invalid_argument("toy_encode: frame channels do not match codec");
    }
    LatentState state(frame.height / s, frame.width / s, in_c);
    std::vector<double> cell(static_cast<std::size_t>(s) * s);
    for (int i = 0; i < state.h; ++i) {
        for (int j = 0; j < state.w; ++j) {
            for (int ch = 0; ch < in_c; ++ch) {
                std::size_t n = 0;
                for (int dy = 0; dy < s; ++dy) {
                    for (int dx = 0; dx < s; ++dx) {
                        std::size_t pix =
                            (static_cast<std::size_t>(i * s + dy) * frame.width + (j * s + dx));
                        cell[n++] = working[pix * in_c + ch];
                    }
                }
                state.at(i, j, ch) = pairwise_sum(cell) / static_cast<double>(s * s);
            }
        }
    }
    return state;
}

inline FrameTensor toy_decode(const LatentState& state, const ToyCodec& codec) {
    const int s = codec.scale;
    FrameTensor up(state.h * s, state.w * s, state.c);
    for (int y = 0; y < up.height; ++y) {
        for (int x = 0; x < up.width; ++x) {
            for (int ch = 0; ch < state.c; ++ch) up.at(y, x, ch) = state.at(y / s, x / s, ch);
        }
    }
    if (codec.mode == ToyCodecMode::conv_seeded) {
        FrameTensor out(up.height, up.width, codec.frame_channels);
        out.data = codec.dec_conv.apply(up.data, up.height, up.width);
        return out;
    }
    return up;
}

} // namespace keep
