#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "keep/degrade.hpp"
#include "keep/rng.hpp"

using namespace keep;

namespace {

// Smooth deterministic test frame with gradients and texture.
FrameTensor natural_like(int h, int w, int channels = 1) {
    FrameTensor f(h, w, channels);
    const double pi = 3.14159265358979323846;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < channels; ++c) {
                double v = 0.5 + 0.25 * std::sin(2.0 * pi * x / 17.0 + c) *
                                     std::cos(2.0 * pi * y / 23.0) +
                           0.2 * (static_cast<double>(x) / w) - 0.1 * (static_cast<double>(y) / h);
                f.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return f;
}

} // namespace

TEST_CASE("split presets tile the global ranges", "[degrade]") {
    DegradationConfig mild = make_split(DegradationSplit::mild);
    REQUIRE(mild.blur_sigma_lo == 2.0);
    REQUIRE(mild.blur_sigma_hi == 4.0);
    REQUIRE(mild.noise_sigma_lo == 0.0);
    REQUIRE(mild.noise_sigma_hi == 3.0);
    REQUIRE(mild.crf_lo == 25.0);
    REQUIRE(mild.crf_hi == 32.0);

    DegradationConfig heavy = make_split(DegradationSplit::heavy);
    REQUIRE(heavy.blur_sigma_hi == 10.0);
    REQUIRE(heavy.noise_sigma_hi == 10.0);
    REQUIRE(heavy.crf_hi == 45.0);

    for (auto split : {DegradationSplit::mild, DegradationSplit::medium, DegradationSplit::heavy}) {
        DegradationConfig c = make_split(split);
        REQUIRE(c.blur_sigma_lo >= 2.0);
        REQUIRE(c.blur_sigma_hi <= 10.0);
        REQUIRE(c.noise_sigma_lo >= 0.0);
        REQUIRE(c.noise_sigma_hi <= 10.0);
        REQUIRE(c.crf_lo >= 25.0);
        REQUIRE(c.crf_hi <= 45.0);
    }
}

TEST_CASE("noise-free constant clip degrades to itself", "[degrade]") {
    DegradationConfig config;
    config.blur_sigma_lo = config.blur_sigma_hi = 2.0;
    config.noise_sigma_lo = config.noise_sigma_hi = 0.0;
    config.codec_mode = CodecMode::none;
    config.seed = 5;
    std::vector<FrameTensor> clip{FrameTensor(16, 16, 1, 0.5), FrameTensor(16, 16, 1, 0.5)};
    auto [lq, record] = degrade_sequence(clip, config);
    REQUIRE(record.blur_sigma == 2.0);
    REQUIRE(record.noise_sigma == 0.0);
    for (const auto& f : lq)
        for (double v : f.data) REQUIRE(v == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("same seed reproduces identical outputs and records", "[degrade]") {
    DegradationConfig config = make_split(DegradationSplit::medium);
    config.seed = 99;
    std::vector<FrameTensor> clip;
    for (int t = 0; t < 3; ++t) clip.push_back(natural_like(24, 32));
    auto [lq1, rec1] = degrade_sequence(clip, config);
    auto [lq2, rec2] = degrade_sequence(clip, config);
    REQUIRE(rec1.blur_sigma == rec2.blur_sigma);
    REQUIRE(rec1.noise_sigma == rec2.noise_sigma);
    REQUIRE(rec1.crf == rec2.crf);
    REQUIRE(rec1.frame_seeds == rec2.frame_seeds);
    for (std::size_t t = 0; t < clip.size(); ++t) REQUIRE(lq1[t].data == lq2[t].data);

    // parallel path must match the serial path bit for bit
    setenv("KEEP_THREADS", "1", 1);
    auto [serial, rec3] = degrade_sequence(clip, config);
    setenv("KEEP_THREADS", "4", 1);
    auto [parallel, rec4] = degrade_sequence(clip, config);
    unsetenv("KEEP_THREADS");
    for (std::size_t t = 0; t < clip.size(); ++t) REQUIRE(serial[t].data == parallel[t].data);

    // in-clip parameters are shared, noise draws are not
    REQUIRE(rec1.frame_seeds[0] != rec1.frame_seeds[1]);
}

TEST_CASE("measured noise std matches the configured level", "[degrade]") {
    const double delta = 10.0;
    FrameTensor frame(512, 512, 1, 0.5);
    DegradedFrame stages = degrade_frame(frame, 2.0, delta, 30.0, CodecMode::none, "", 4242);
    REQUIRE(stages.noisy.height == 128);
    std::vector<double> residual(stages.noisy.data.size());
    for (std::size_t i = 0; i < residual.size(); ++i)
        residual[i] = stages.noisy.data[i] - stages.blurred_down.data[i];
    REQUIRE(residual.size() >= 10000);
    double mean = mean_of(residual);
    double acc = 0.0;
    for (double r : residual) acc += (r - mean) * (r - mean);
    double std_dev = std::sqrt(acc / static_cast<double>(residual.size()));
    REQUIRE(std_dev == Catch::Approx(delta / 255.0).epsilon(0.05));
}

TEST_CASE("codec proxy near-lossless at crf 0", "[degrade]") {
    FrameTensor f = natural_like(64, 64);
    FrameTensor coded = codec_proxy(f, 0.0);
    // dead-zone error is below one step per coefficient; the orthonormal
    // transform keeps the RMS pixel error below that step (~8.7e-4)
    std::vector<double> sq(f.data.size());
    for (std::size_t i = 0; i < f.data.size(); ++i) {
        double d = f.data[i] - coded.data[i];
        sq[i] = d * d;
    }
    double rms = std::sqrt(mean_of(sq));
    REQUIRE(rms < 1e-3);
}

TEST_CASE("codec proxy zero fixed point and constant blocks", "[degrade]") {
    FrameTensor zero(16, 16, 1, 0.0);
    FrameTensor coded = codec_proxy(zero, 35.0);
    for (double v : coded.data) REQUIRE(v == 0.0);

    // a constant block decodes to a constant (quantized DC only)
    FrameTensor constant(8, 8, 1, 0.5);
    FrameTensor c_coded = codec_proxy(constant, 25.0);
    for (double v : c_coded.data) REQUIRE(v == Catch::Approx(c_coded.data[0]).margin(1e-12));
    REQUIRE(c_coded.data[0] == Catch::Approx(0.5).margin(codec_proxy_step(25.0)));

    REQUIRE_THROWS_AS(codec_proxy(zero, -1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(codec_proxy(zero, 52.0), std::invalid_argument);
}

TEST_CASE("codec proxy error grows with crf", "[degrade]") {
    FrameTensor f = natural_like(64, 64, 3);
    double previous = -1.0;
    for (double crf : {25.0, 35.0, 45.0}) {
        FrameTensor coded = codec_proxy(f, crf);
        std::vector<double> sq(f.data.size());
        for (std::size_t i = 0; i < f.data.size(); ++i) {
            double d = f.data[i] - coded.data[i];
            sq[i] = d * d;
        }
        double mse = mean_of(sq);
        REQUIRE(mse >= previous);
        previous = mse;
    }
}

TEST_CASE("codec proxy is idempotent on its own output", "[degrade]") {
    FrameTensor f = natural_like(32, 48);
    for (double crf : {25.0, 38.0}) {
        FrameTensor once = codec_proxy(f, crf);
        FrameTensor twice = codec_proxy(once, crf);
        for (std::size_t i = 0; i < once.data.size(); ++i)
            REQUIRE(twice.data[i] == Catch::Approx(once.data[i]).margin(1e-6));
    }
}

TEST_CASE("external codec hook round-trips through the command", "[degrade]") {
    FrameTensor f = natural_like(16, 16);
    FrameTensor out = codec_external(f, 30.0, "cp {in} {out}", 7);
    // the hook crosses a PPM boundary, so values are 8-bit quantized
    for (std::size_t i = 0; i < f.data.size(); ++i)
        REQUIRE(out.data[i] == Catch::Approx(f.data[i]).margin(0.5 / 255.0 + 1e-9));
    REQUIRE_THROWS_AS(codec_external(f, 30.0, "false", 8), IoError);
}

TEST_CASE("degrade_sequence rejects bad shapes", "[degrade]") {
    DegradationConfig config;
    std::vector<FrameTensor> ragged{FrameTensor(15, 16, 1)};
    REQUIRE_THROWS_AS(degrade_sequence(ragged, config), std::invalid_argument);
    std::vector<FrameTensor> empty;
    REQUIRE_THROWS_AS(degrade_sequence(empty, config), std::invalid_argument);
    DegradationConfig bad;
    bad.blur_sigma_lo = 5.0;
    bad.blur_sigma_hi = 2.0;
    std::vector<FrameTensor> ok{FrameTensor(16, 16, 1)};
    REQUIRE_THROWS_AS(degrade_sequence(ok, bad), std::invalid_argument);
}
