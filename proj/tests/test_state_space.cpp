#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "keep/rng.hpp"
#include "keep/state_space.hpp"

using namespace keep;

namespace {

LatentState constant_state(int h, int w, int c, double v) { return LatentState(h, w, c, v); }

LatentState random_state(int h, int w, int c, std::uint64_t seed) {
    LatentState s(h, w, c);
    SeededRng rng(seed);
    for (double& v : s.data) v = rng.uniform(-4.0, 4.0);
    return s;
}

} // namespace

TEST_CASE("predict applies the dynamic model", "[state-space]") {
    StateSpaceModel identity_model;
    identity_model.dynamic = [](const LatentState& z) { return z; };
    LatentState z = random_state(2, 3, 4, 1);
    REQUIRE(predict(identity_model, z).data == z.data);

    StateSpaceModel decay_model;
    decay_model.dynamic = [](const LatentState& z) {
        LatentState out = z;
        for (double& v : out.data) v *= 0.9;
        return out;
    };
    LatentState ones = constant_state(2, 2, 2, 1.0);
    for (double v : predict(decay_model, ones).data) REQUIRE(v == Catch::Approx(0.9).margin(0.0));

    LatentState poisoned = ones;
    poisoned.data[1] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(predict(identity_model, poisoned), InvalidStateError);
}

TEST_CASE("innovation is the prior minus the observation", "[state-space]") {
    LatentState prior = constant_state(2, 2, 1, 2.0);
    LatentState observed = constant_state(2, 2, 1, 6.0);
    Innovation delta = innovation(prior, observed);
    for (double v : delta.delta.data) REQUIRE(v == -4.0);

    LatentState same = random_state(3, 3, 2, 2);
    for (double v : innovation(same, same).delta.data) REQUIRE(v == 0.0);

    LatentState a = random_state(2, 2, 3, 3), b = random_state(2, 2, 3, 4);
    Innovation d = innovation(a, b);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        REQUIRE(d.delta.data[i] + b.data[i] == a.data[i]);

    REQUIRE_THROWS_AS(innovation(a, random_state(2, 3, 3, 5)), std::invalid_argument);
}

TEST_CASE("update extremes and convex blend", "[state-space]") {
    LatentState prior = random_state(4, 4, 2, 6);
    LatentState observed = random_state(4, 4, 2, 7);
    REQUIRE(update(prior, observed, GainField(4, 4, 0.0)).data == prior.data);
    REQUIRE(update(prior, observed, GainField(4, 4, 1.0)).data == observed.data);

    LatentState two = constant_state(2, 2, 1, 2.0), six = constant_state(2, 2, 1, 6.0);
    for (double v : update(two, six, GainField(2, 2, 0.25)).data)
        REQUIRE(v == Catch::Approx(3.0).margin(0.0));

    GainField bad(4, 4, 1.5);
    REQUIRE_THROWS_AS(update(prior, observed, bad), std::invalid_argument);
    GainField mismatched(3, 4, 0.5);
    REQUIRE_THROWS_AS(update(prior, observed, mismatched), std::invalid_argument);
}

TEST_CASE("update stays inside the prior/observed interval", "[state-space]") {
    SeededRng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        LatentState prior = random_state(3, 3, 2, 100 + static_cast<std::uint64_t>(trial));
        LatentState observed = random_state(3, 3, 2, 900 + static_cast<std::uint64_t>(trial));
        GainField gain(3, 3);
        for (double& g : gain.data) g = rng.uniform();
        LatentState post = update(prior, observed, gain);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                for (int c = 0; c < 2; ++c) {
                    double lo = std::min(prior.at(i, j, c), observed.at(i, j, c));
                    double hi = std::max(prior.at(i, j, c), observed.at(i, j, c));
                    REQUIRE(post.at(i, j, c) >= lo);
                    REQUIRE(post.at(i, j, c) <= hi);
                }
            }
        }
        // idempotent when prior == observed
        LatentState same = update(prior, prior, gain);
        REQUIRE(same.data == prior.data);
    }
}

TEST_CASE("oracle gain schedule follows 1/(t+1) for the random-walk-free system", "[state-space]") {
    LinearGaussianSystem sys{1.0, 1.0, 0.0, 1.0, 1.0};
    std::vector<double> gains = oracle_gain_schedule(sys, 50);
    for (int t = 0; t < 50; ++t)
        REQUIRE(gains[static_cast<std::size_t>(t)] ==
                Catch::Approx(1.0 / (t + 2)).margin(1e-12));

    std::vector<double> obs(50, 0.0);
    auto steps = kalman_oracle(sys, obs, 0.0);
    for (int t = 0; t < 50; ++t)
        REQUIRE(steps[static_cast<std::size_t>(t)].posterior_variance ==
                Catch::Approx(1.0 / (t + 2)).margin(1e-12));
}

TEST_CASE("oracle limit behaviors", "[state-space]") {
    SeededRng rng(14);
    std::vector<double> obs(40);
    for (double& v : obs) v = rng.uniform(-1.0, 1.0);

    LinearGaussianSystem deaf{1.0, 1.0, 0.0, 1e12, 1.0};
    auto deaf_steps = kalman_oracle(deaf, obs, 0.25);
    for (const auto& s : deaf_steps)
        REQUIRE(s.posterior_mean == Catch::Approx(0.25).margin(1e-6));

    LinearGaussianSystem sharp{1.0, 1.0, 0.0, 1e-12, 1.0};
    auto sharp_steps = kalman_oracle(sharp, obs, 0.25);
    for (std::size_t t = 0; t < obs.size(); ++t)
        REQUIRE(sharp_steps[t].posterior_mean == Catch::Approx(obs[t]).margin(1e-6));

    LinearGaussianSystem bad{1.0, 1.0, 0.0, 0.0, 1.0};
    REQUIRE_THROWS_AS(kalman_oracle(bad, obs, 0.0), std::invalid_argument);
}

TEST_CASE("oracle variance is non-increasing when Q = 0 and gains stay in [0,1] for H = 1",
          "[state-space]") {
    for (double f : {0.5, 0.95, 1.0}) {
        LinearGaussianSystem sys{f, 1.0, 0.0, 0.3, 2.0};
        std::vector<double> obs(60, 1.0);
        auto steps = kalman_oracle(sys, obs, 0.0);
        double prev_var = sys.P0;
        for (const auto& s : steps) {
            REQUIRE(s.gain >= 0.0);
            REQUIRE(s.gain <= 1.0);
            if (f <= 1.0) REQUIRE(s.posterior_variance <= prev_var + 1e-15);
            prev_var = s.posterior_variance;
        }
    }
}

TEST_CASE("latent engine matches the scalar oracle in the linear configuration", "[state-space]") {
    // dynamic = multiply by F, encoder = identity over constant latents,
    // gains injected from the oracle's schedule.
    const double F = 0.93, H = 1.0, Q = 0.02, R = 0.05, P0 = 1.0;
    LinearGaussianSystem sys{F, H, Q, R, P0};
    SeededRng rng(46);
    const int steps = 100;
    std::vector<double> obs(steps);
    double truth = 1.0;
    for (double& v : obs) {
        truth = F * truth + 0.1 * rng.gaussian();
        v = H * truth + 0.2 * rng.gaussian();
    }

    StateSpaceModel model;
    model.dynamic = [&](const LatentState& z) {
        LatentState out = z;
        for (double& v : out.data) v *= F;
        return out;
    };
    std::vector<double> schedule = oracle_gain_schedule(sys, steps);
    LatentState posterior = constant_state(2, 2, 2, obs[0] / H);
    auto oracle = kalman_oracle(sys, std::vector<double>(obs.begin() + 1, obs.end()), obs[0] / H);
    for (int t = 1; t < steps; ++t) {
        LatentState prior = predict(model, posterior);
        LatentState observed = constant_state(2, 2, 2, obs[static_cast<std::size_t>(t)] / H);
        GainField gain(2, 2, schedule[static_cast<std::size_t>(t) - 1]);
        posterior = update(prior, observed, gain);
        for (double v : posterior.data)
            REQUIRE(v == Catch::Approx(oracle[static_cast<std::size_t>(t) - 1].posterior_mean)
                             .margin(1e-10));
    }
}
