#pragma once

// Blind degradation synthesis: per-clip sampled blur / noise / compression
// parameters, seeded reproducibly; the pipeline per frame is
//   blur -> 4x down -> add noise -> codec stage -> 4x up.
// The codec stage is a deterministic block-DCT dead-zone quantizer whose step
// doubles every 6 CRF, with an external-command hook for real encoders.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "keep/errors.hpp"
#include "keep/io.hpp"
#include "keep/parallel.hpp"
#include "keep/rng.hpp"
#include "keep/tensor.hpp"

namespace keep {

enum class CodecMode { proxy, external_hook, none };

struct DegradationConfig {
    double blur_sigma_lo = 2.0, blur_sigma_hi = 10.0;   // paper range [2,10]
    double noise_sigma_lo = 0.0, noise_sigma_hi = 10.0; // 8-bit units, paper range [0,10]
    double crf_lo = 25.0, crf_hi = 45.0;                // paper range [25,45]
    int scale = 4;
    CodecMode codec_mode = CodecMode::proxy;
    std::string external_codec_cmd; // template with {in}, {out}, {crf}
    std::uint64_t seed = 0;

    void validate() const {
        if (blur_sigma_lo > blur_sigma_hi || noise_sigma_lo > noise_sigma_hi || crf_lo > crf_hi)
            throw std::invalid_argument("DegradationConfig: range lo must be <= hi");
        if (!(blur_sigma_lo > 0.0))
            throw std::invalid_argument("DegradationConfig: blur sigma must be positive");
        if (noise_sigma_lo < 0.0)
            throw std::invalid_argument("DegradationConfig: noise sigma must be >= 0");
        if (scale < 1) throw std::invalid_argument("DegradationConfig: scale must be >= 1");
    }
};

enum class DegradationSplit { mild, medium, heavy };

/// Split presets: thirds of the global parameter ranges; the heavy upper
/// bounds coincide with the global upper bounds (10, 10, 45).
inline DegradationConfig make_split(DegradationSplit split) {
    DegradationConfig config;
    switch (split) {
    case DegradationSplit::mild:
        config.blur_sigma_lo = 2.0; config.blur_sigma_hi = 4.0;
        config.noise_sigma_lo = 0.0; config.noise_sigma_hi = 3.0;
        config.crf_lo = 25.0; config.crf_hi = 32.0;
        break;
    case DegradationSplit::medium:
        config.blur_sigma_lo = 4.0; config.blur_sigma_hi = 7.0;
        config.noise_sigma_lo = 3.0; config.noise_sigma_hi = 7.0;
        config.crf_lo = 32.0; config.crf_hi = 38.0;
        break;
    case DegradationSplit::heavy:
        config.blur_sigma_lo = 7.0; config.blur_sigma_hi = 10.0;
        config.noise_sigma_lo = 7.0; config.noise_sigma_hi = 10.0;
        config.crf_lo = 38.0; config.crf_hi = 45.0;
        break;
    }
    return config;
}

namespace detail {

/// Orthonormal 8x8 DCT-II basis, B[u][x] = a(u) cos((2x+1) u pi / 16).
inline const std::array<std::array<double, 8>, 8>& dct8_basis() {
    static const auto basis = [] {
        std::array<std::array<double, 8>, 8> b{};
        const double pi = 3.14159265358979323846;
        for (int u = 0; u < 8; ++u) {
            double amp = (u == 0) ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x)
                b[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)] =
                    amp * std::cos((2.0 * x + 1.0) * u * pi / 16.0);
        }
        return b;
    }();
    return basis;
}

inline double deadzone_quantize(double coef, double step) {
    // floor of the magnitude widens the zero bin to (-step, step); the tiny
    // nudge keeps exact lattice points on their own bin under re-encoding.
    double q = std::floor(std::abs(coef) / step + 1e-9);
    return (coef < 0.0 ? -q : q) * step;
}

} // namespace detail

/// CRF -> quantization step: 1/64 at CRF 25, doubling every 6 CRF.
inline double codec_proxy_step(double crf) {
    return (1.0 / 64.0) * std::pow(2.0, (crf - 25.0) / 6.0);
}

/// Deterministic compression proxy: per channel, per 8x8 block (edge blocks
/// zero-padded), orthonormal DCT-II, dead-zone quantization of every
/// coefficient, inverse DCT, clamp to [0,1].
inline FrameTensor codec_proxy(const FrameTensor& frame, double crf) {
    if (!(crf >= 0.0 && crf <= 51.0))
        throw std::invalid_argument("codec_proxy: crf must be in [0,51]");
    const double step = codec_proxy_step(crf);
    const auto& basis = detail::dct8_basis();
    FrameTensor out(frame.height, frame.width, frame.channels);
    double block[8][8], coef[8][8], tmp[8][8];
    for (int c = 0; c < frame.channels; ++c) {
        for (int by = 0; by < frame.height; by += 8) {
            for (int bx = 0; bx < frame.width; bx += 8) {
                for (int y = 0; y < 8; ++y) {
                    for (int x = 0; x < 8; ++x) {
                        int sy = by + y, sx = bx + x;
                        block[y][x] = (sy < frame.height && sx < frame.width)
                                          ? frame.at(sy, sx, c)
                                          : 0.0;
                    }
                }
                // rows then columns, forward
                for (int y = 0; y < 8; ++y) {
                    for (int u = 0; u < 8; ++u) {
                        double acc = 0.0;
                        for (int x = 0; x < 8; ++x)
                            acc += block[y][x] * basis[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)];
                        tmp[y][u] = acc;
                    }
                }
                for (int u = 0; u < 8; ++u) {
                    for (int v = 0; v < 8; ++v) {
                        double acc = 0.0;
                        for (int y = 0; y < 8; ++y)
                            acc += tmp[y][u] * basis[static_cast<std::size_t>(v)][static_cast<std::size_t>(y)];
                        coef[v][u] = detail::deadzone_quantize(acc, step);
                    }
                }
                // inverse: transpose applications of the orthonormal basis
                for (int u = 0; u < 8; ++u) {
                    for (int y = 0; y < 8; ++y) {
                        double acc = 0.0;
                        for (int v = 0; v < 8; ++v)
                            acc += coef[v][u] * basis[static_cast<std::size_t>(v)][static_cast<std::size_t>(y)];
                        tmp[y][u] = acc;
                    }
                }
                for (int y = 0; y < 8; ++y) {
                    for (int x = 0; x < 8; ++x) {
                        double acc = 0.0;
                        for (int u = 0; u < 8; ++u)
                            acc += tmp[y][u] * basis[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)];
                        int sy = by + y, sx = bx + x;
                        if (sy < frame.height && sx < frame.width)
                            out.at(sy, sx, c) = std::clamp(acc, 0.0, 1.0);
                    }
                }
            }
        }
    }
    return out;
}

/// Runs a user-supplied encoder command with {in}, {out}, {crf} substituted;
/// frames cross the hook boundary as PPM/PGM.
inline FrameTensor codec_external(const FrameTensor& frame, double crf,
                                  const std::string& cmd_template, std::uint64_t tag) {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path();
    std::string ext = frame.channels == 1 ? ".pgm" : ".ppm";
    fs::path in_path = dir / ("keep_codec_in_" + std::to_string(tag) + ext);
    fs::path out_path = dir / ("keep_codec_out_" + std::to_string(tag) + ext);
    io::write_pnm(in_path.string(), frame);
    std::string cmd = cmd_template;
    auto replace_all = [&cmd](const std::string& token, const std::string& value) {
        for (std::size_t pos = cmd.find(token); pos != std::string::npos; pos = cmd.find(token, pos))
            cmd.replace(pos, token.size(), value), pos += value.size();
    };
    replace_all("{in}", in_path.string());
    replace_all("{out}", out_path.string());
    replace_all("{crf}", io::detail::format_double(crf));
    int rc = std::system(cmd.c_str());
    if (rc != 0) throw IoError("external codec command failed: " + cmd);
    FrameTensor out = io::read_pnm(out_path.string());
    fs::remove(in_path);
    fs::remove(out_path);
    return out;
}

/// Intermediate stages of one frame's degradation, exposed for verification.
struct DegradedFrame {
    FrameTensor blurred_down; // after blur and 4x downsample
    FrameTensor noisy;        // after additive gaussian noise, clamped
    FrameTensor coded;        // after the codec stage
    FrameTensor lq;           // after 4x upsample back to input size
};

inline DegradedFrame degrade_frame(const FrameTensor& frame, double blur_sigma,
                                   double noise_sigma_8bit, double crf, CodecMode codec_mode,
                                   const std::string& external_cmd, std::uint64_t frame_seed,
                                   int scale = 4, std::uint64_t hook_tag = 0) {
    DegradedFrame stages;
    Kernel2d kernel = gaussian_kernel(blur_sigma, gaussian_radius(blur_sigma));
    FrameTensor blurred = conv2d(frame, kernel, PaddingMode::reflect);
    stages.blurred_down = resample(blurred, 1.0 / scale, ResampleMode::bilinear);
    stages.noisy = stages.blurred_down;
    if (noise_sigma_8bit > 0.0) {
        SeededRng rng(frame_seed);
        double sigma = noise_sigma_8bit / 255.0;
        for (double& v : stages.noisy.data) v = std::clamp(v + sigma * rng.gaussian(), 0.0, 1.0);
    } else {
        for (double& v : stages.noisy.data) v = std::clamp(v, 0.0, 1.0);
    }
    switch (codec_mode) {
    case CodecMode::proxy:
        stages.coded = codec_proxy(stages.noisy, crf);
        break;
    case CodecMode::external_hook:
        stages.coded = codec_external(stages.noisy, crf, external_cmd, hook_tag);
        break;
    case CodecMode::none:
        stages.coded = stages.noisy;
        break;
    }
    stages.lq = resample(stages.coded, static_cast<double>(scale), ResampleMode::bilinear);
    return stages;
}

/// Provenance of one degraded clip; together with the config this fully
/// determines the output.
struct DegradationRecord {
    double blur_sigma = 0.0;
    double noise_sigma = 0.0; // 8-bit units
    double crf = 0.0;
    std::string codec_label;
    std::vector<std::uint64_t> frame_seeds;
};

/// Degrades a clip: one (sigma, delta, crf) draw per clip, independent noise
/// per frame via child streams. Parallel and serial execution produce
/// identical bytes.
inline std::pair<std::vector<FrameTensor>, DegradationRecord>
degrade_sequence(const std::vector<FrameTensor>& hq, const DegradationConfig& config) {
    config.validate();
    if (hq.empty()) throw std::invalid_argument("degrade_sequence: empty sequence");
    for (const auto& f : hq) {
        if (f.height % config.scale != 0 || f.width % config.scale != 0)
            throw std::invalid_argument(
                "degrade_sequence: frame dimensions must be divisible by the scale");
        if (!f.same_shape(hq.front()))
            throw std::invalid_argument("degrade_sequence: frames must share one shape");
    }
    DegradationRecord record;
    SeededRng clip_rng(config.seed);
    record.blur_sigma = clip_rng.uniform(config.blur_sigma_lo, config.blur_sigma_hi);
    record.noise_sigma = clip_rng.uniform(config.noise_sigma_lo, config.noise_sigma_hi);
    record.crf = clip_rng.uniform(config.crf_lo, config.crf_hi);
    switch (config.codec_mode) {
    case CodecMode::proxy: record.codec_label = "proxy"; break;
    case CodecMode::external_hook: record.codec_label = "external"; break;
    case CodecMode::none: record.codec_label = "none"; break;
    }
    record.frame_seeds.resize(hq.size());
    for (std::size_t t = 0; t < hq.size(); ++t)
        record.frame_seeds[t] = splitmix64(config.seed ^ static_cast<std::uint64_t>(t));

    std::vector<FrameTensor> lq(hq.size());
    parallel_for(hq.size(), [&](std::size_t t) {
        lq[t] = degrade_frame(hq[t], record.blur_sigma, record.noise_sigma, record.crf,
                              config.codec_mode, config.external_codec_cmd, record.frame_seeds[t],
                              config.scale, static_cast<std::uint64_t>(t))
                    .lq;
    });
    return {std::move(lq), std::move(record)};
}

} // namespace keep
