#pragma once

// Kalman formulation over latent states: model interfaces, the
// predict / innovation / update algebra, and a closed-form scalar
// linear-Gaussian filter used as the validation oracle.

#include <cmath>
#include <functional>
#include <vector>

#include "keep/errors.hpp"
#include "keep/tensor.hpp"

namespace keep {

/// Interface bundle for one state-space configuration. All members are pure
/// functions; the bundle is immutable after construction and shareable.
struct StateSpaceModel {
    std::function<LatentState(const LatentState&)> dynamic;     // carries z[t-1]+ to the prior z[t]-
    std::function<LatentState(const FrameTensor&)> encoder;     // degraded frame -> observed state
    std::function<FrameTensor(const LatentState&)> generator;   // state -> restored frame
    std::function<LatentState(const FrameTensor&)> hq_encoder;  // clean-domain frame -> state
};

/// Residual between the prior estimate and the observed state.
struct Innovation {
    LatentState delta;
};

/// Prior estimate from the previous posterior through the dynamic model.
inline LatentState predict(const StateSpaceModel& model, const LatentState& posterior_prev) {
    require_finite(posterior_prev, "predict");
    LatentState prior = model.dynamic(posterior_prev);
    require_finite(prior, "predict(output)");
    return prior;
}

inline Innovation innovation(const LatentState& prior, const LatentState& observed) {
    if (!prior.same_shape(observed))
        throw std::invalid_argument("innovation: state shapes differ");
    Innovation out{LatentState(prior.h, prior.w, prior.c)};
    for (std::size_t i = 0; i < prior.data.size(); ++i)
        out.delta.data[i] = prior.data[i] - observed.data[i];
    return out;
}

/// Convex per-token blend: z+ = (1-K) * prior + K * observed, gain broadcast
/// across channels. Every output component is clamped into the closed
/// interval spanned by its inputs, and K = 0 / K = 1 reproduce prior /
/// observed exactly.
inline LatentState update(const LatentState& prior, const LatentState& observed,
                          const GainField& gain) {
    if (!prior.same_shape(observed))
        throw std::invalid_argument("update: state shapes differ");
    if (gain.h != prior.h || gain.w != prior.w)
        throw std::invalid_argument("update: gain shape does not match state");
    for (double k : gain.data) {
        if (!(k >= 0.0 && k <= 1.0))
            throw std::invalid_argument("update: gain outside [0,1]");
    }
    LatentState posterior(prior.h, prior.w, prior.c);
    for (int i = 0; i < prior.h; ++i) {
        for (int j = 0; j < prior.w; ++j) {
            double k = gain.at(i, j);
            for (int ch = 0; ch < prior.c; ++ch) {
                double p = prior.at(i, j, ch);
                double o = observed.at(i, j, ch);
                double z = (1.0 - k) * p + k * o;
                posterior.at(i, j, ch) = std::clamp(z, std::min(p, o), std::max(p, o));
            }
        }
    }
    return posterior;
}

/// Scalar linear-Gaussian system y[t] = F y[t-1] + q, x[t] = H y[t] + r.
/// Diagonal systems apply this per component.
struct LinearGaussianSystem {
    double F = 1.0;
    double H = 1.0;
    double Q = 0.0;  // process-noise variance, >= 0
    double R = 1.0;  // measurement-noise variance, > 0
    double P0 = 1.0; // initial variance, >= 0

    void validate() const {
        if (!(R > 0.0)) throw std::invalid_argument("LinearGaussianSystem: R must be > 0");
        if (Q < 0.0 || P0 < 0.0)
            throw std::invalid_argument("LinearGaussianSystem: Q and P0 must be >= 0");
    }
};

struct KalmanStep {
    double prior_mean = 0.0;
    double gain = 0.0;
    double posterior_mean = 0.0;
    double posterior_variance = 0.0;
};

/// Classical closed-form recursion, one step per observation:
///   P- = F P F + Q;  K = P- H / (H P- H + R);
///   m- = F m;        m+ = m- + K (obs - H m-);  P+ = (1 - K H) P-.
inline std::vector<KalmanStep> kalman_oracle(const LinearGaussianSystem& sys,
                                             const std::vector<double>& observations,
                                             double initial_mean) {
    sys.validate();
    std::vector<KalmanStep> steps;
    steps.reserve(observations.size());
    double mean = initial_mean;
    double var = sys.P0;
    for (double obs : observations) {
        KalmanStep s;
        double prior_var = sys.F * var * sys.F + sys.Q;
        s.prior_mean = sys.F * mean;
        s.gain = prior_var * sys.H / (sys.H * prior_var * sys.H + sys.R);
        s.posterior_mean = s.prior_mean + s.gain * (obs - sys.H * s.prior_mean);
        s.posterior_variance = (1.0 - s.gain * sys.H) * prior_var;
        mean = s.posterior_mean;
        var = s.posterior_variance;
        steps.push_back(s);
    }
    return steps;
}

/// Gain schedule only (the variance recursion does not depend on the
/// observations). Used to inject oracle gains into the latent engine.
inline std::vector<double> oracle_gain_schedule(const LinearGaussianSystem& sys, int steps) {
    sys.validate();
    std::vector<double> gains;
    gains.reserve(static_cast<std::size_t>(std::max(steps, 0)));
    double var = sys.P0;
    for (int t = 0; t < steps; ++t) {
        double prior_var = sys.F * var * sys.F + sys.Q;
        double gain = prior_var * sys.H / (sys.H * prior_var * sys.H + sys.R);
        var = (1.0 - gain * sys.H) * prior_var;
        gains.push_back(gain);
    }
    return gains;
}

} // namespace keep
