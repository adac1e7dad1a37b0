#pragma once

// The KEEP inference recursion over a clip. Per frame:
//   prior  z[t]-  = hq_encode(warp(y[t-1], flow))        (state prediction)
//   observed z~t  = encode(x[t])
//   gain   K[t]   = kgn | fixed | oracle schedule
//   posterior     = (1 - K) prior + K observed            (state update)
//   y[t]          = decode(posterior)   [optional quantize / CFA before decode]
// Frame 1 initializes posterior = observed. Everything is deterministic given
// (frames, config); oracle mode additionally composes the scalar transition
// coefficient into the dynamic model so the closed-form filter is reproduced
// exactly on constant clips.

#include <cstdint>
#include <optional>
#include <vector>

#include "keep/codebook.hpp"
#include "keep/errors.hpp"
#include "keep/latent_nets.hpp"
#include "keep/motion.hpp"
#include "keep/state_space.hpp"
#include "keep/tensor.hpp"

namespace keep {

enum class GainSourceKind { kgn, fixed, oracle };
enum class FlowSourceKind { block_matching, file_ingested };

struct KeepConfig {
    GainSourceKind gain_source = GainSourceKind::kgn;
    double fixed_gain = 1.0;                 // gain_source == fixed
    LinearGaussianSystem oracle_system{};    // gain_source == oracle
    FlowSourceKind flow_source = FlowSourceKind::block_matching;
    int bm_block = 8;
    int bm_search_radius = 8;
    std::vector<FlowField> ingested_flows;   // flow_source == file_ingested; [t-2] for step t
    ToyCodec codec = ToyCodec::pool_identity(0);
    bool quantize_after_update = false;
    bool cfa_enabled = false;
    std::uint64_t seed = 0;                  // derives block parameters (KGN, CFA, codebook)
    std::optional<Codebook> codebook;        // default: seeded N=64 over latent channels

    void validate() const {
        if (gain_source == GainSourceKind::fixed && !(fixed_gain >= 0.0 && fixed_gain <= 1.0))
            throw std::invalid_argument("KeepConfig: fixed gain must be in [0,1]");
        if (gain_source == GainSourceKind::oracle) oracle_system.validate();
    }
};

struct SequenceResult {
    std::vector<FrameTensor> restored;   // y[t]
    std::vector<LatentState> posteriors; // z[t]+
    std::vector<LatentState> priors;     // z[t]-  (prior == posterior at t = 1)
    std::vector<GainField> gains;        // all-ones at t = 1
};

/// Flow carrying content of frame t-1 to frame t (1-based t in [2, T]),
/// either block-matched from the degraded frames or ingested verbatim.
inline FlowField flow_for_step(const std::vector<FrameTensor>& frames, int t,
                               const KeepConfig& config) {
    if (t < 2 || t > static_cast<int>(frames.size()))
        throw std::invalid_argument("flow_for_step: t must be in [2, T]");
    if (config.flow_source == FlowSourceKind::block_matching) {
        return estimate_flow_block_matching(frames[static_cast<std::size_t>(t) - 2],
                                            frames[static_cast<std::size_t>(t) - 1],
                                            config.bm_block, config.bm_search_radius);
    }
    if (static_cast<std::size_t>(t - 2) >= config.ingested_flows.size())
        throw IoError("flow_for_step: missing ingested flow for step " + std::to_string(t));
    return config.ingested_flows[static_cast<std::size_t>(t) - 2];
}

inline SequenceResult run_keep(const std::vector<FrameTensor>& frames, const KeepConfig& config) {
    config.validate();
    if (frames.empty()) throw std::invalid_argument("run_keep: empty sequence");
    for (const auto& f : frames) {
        if (!f.same_shape(frames.front()))
            throw InvalidStateError("run_keep: frame shape drift in input sequence");
    }
    const auto T = static_cast<int>(frames.size());

    auto encode = [&](const FrameTensor& f) { return toy_encode(f, config.codec); };
    auto decode = [&](const LatentState& z) { return toy_decode(z, config.codec); };

    SequenceResult result;
    result.restored.reserve(frames.size());
    result.posteriors.reserve(frames.size());
    result.priors.reserve(frames.size());
    result.gains.reserve(frames.size());

    // t = 1: the only information is the first observation.
    LatentState observed = encode(frames[0]);
    const int lh = observed.h, lw = observed.w, lc = observed.c;
    LatentState posterior = observed;
    LatentState prev_observed = observed;
    LatentState prev_feature = posterior;        // latent actually decoded at t-1
    LatentState feature_before_prev = posterior; // latent decoded at t-2
    const LatentState anchor = observed;         // z~1

    std::optional<KgnParams> kgn;
    if (config.gain_source == GainSourceKind::kgn)
        kgn = KgnParams::seeded(lc, splitmix64(config.seed ^ 0x6B676EULL));
    std::optional<AttentionWeights> cfa_weights;
    if (config.cfa_enabled)
        cfa_weights = AttentionWeights::seeded(lc, splitmix64(config.seed ^ 0x636661ULL));
    std::optional<Codebook> book;
    if (config.quantize_after_update) {
        book = config.codebook ? *config.codebook
                               : Codebook::seeded(64, lc, splitmix64(config.seed ^ 0x7671ULL));
        if (book->dimension != lc)
            throw std::invalid_argument("run_keep: codebook dimension does not match latent channels");
    }
    std::vector<double> gain_schedule;
    if (config.gain_source == GainSourceKind::oracle)
        gain_schedule = oracle_gain_schedule(config.oracle_system, T - 1);

    result.priors.push_back(posterior);
    result.posteriors.push_back(posterior);
    result.gains.push_back(GainField(lh, lw, 1.0));
    result.restored.push_back(decode(prev_feature));

    for (int i = 1; i < T; ++i) {
        FlowField flow = flow_for_step(frames, i + 1, config);

        // State prediction through the same emit path that produced y[t-1].
        StateSpaceModel model;
        model.encoder = encode;
        model.generator = decode;
        model.hq_encoder = encode;
        model.dynamic = [&](const LatentState& prev_post) {
            LatentState feature = prev_post;
            if (cfa_weights && i >= 2)
                feature = cross_frame_attention(prev_post, feature_before_prev, *cfa_weights);
            FrameTensor emitted = decode(feature);
            return encode(warp(emitted, flow));
        };
        LatentState prior = predict(model, posterior);
        if (config.gain_source == GainSourceKind::oracle && config.oracle_system.F != 1.0) {
            for (double& v : prior.data) v *= config.oracle_system.F;
        }

        observed = encode(frames[static_cast<std::size_t>(i)]);
        if (observed.h != lh || observed.w != lw || observed.c != lc)
            throw InvalidStateError("run_keep: latent shape drift");

        GainField gain(lh, lw);
        switch (config.gain_source) {
        case GainSourceKind::kgn:
            gain = kgn_gain(anchor, prev_observed, observed, *kgn);
            break;
        case GainSourceKind::fixed:
            gain = GainField(lh, lw, config.fixed_gain);
            break;
        case GainSourceKind::oracle:
            gain = GainField(lh, lw, gain_schedule[static_cast<std::size_t>(i) - 1]);
            break;
        }

        posterior = update(prior, observed, gain);
        if (book) posterior = quantize(posterior, *book).quantized;

        LatentState feature = posterior;
        if (cfa_weights) feature = cross_frame_attention(posterior, prev_feature, *cfa_weights);

        result.priors.push_back(prior);
        result.posteriors.push_back(posterior);
        result.gains.push_back(gain);
        result.restored.push_back(decode(feature));
        feature_before_prev = prev_feature;
        prev_feature = feature;
        prev_observed = observed;
    }
    return result;
}

} // namespace keep
