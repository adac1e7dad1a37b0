#pragma once

// File formats crossing the tool boundary:
//   KTNS       — binary tensor container (float32 payload)
//   PPM/PGM    — binary 8-bit frames, P6/P5, maxval 255, v = byte/255
//   .flo       — Middlebury optical flow
//   CSV        — landmark tracks, header "frame,landmark,x,y"
// Writers are canonical: writing what a reader returned reproduces the bytes.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "keep/errors.hpp"
#include "keep/tensor.hpp"

namespace keep::io {

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    return in;
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<unsigned char, 4> b{static_cast<unsigned char>(v & 0xFF),
                                   static_cast<unsigned char>((v >> 8) & 0xFF),
                                   static_cast<unsigned char>((v >> 16) & 0xFF),
                                   static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4))
        throw FormatError("truncated file: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline float get_f32(std::istream& in, const std::string& path) {
    std::uint32_t bits = get_u32(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

/// Shortest round-trip decimal for a double (to_chars), so CSV written from
/// parsed values is byte-stable.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

} // namespace detail

// ---------------------------------------------------------------------------
// KTNS: magic "KTNS", u32 LE version = 1, u32 ndim, ndim x u32 dims, then
// float32 LE payload, row-major.
// ---------------------------------------------------------------------------

inline void write_ktns(const std::string& path, const std::vector<std::uint32_t>& dims,
                       std::span<const double> payload) {
    std::size_t expect = 1;
    for (auto d : dims) expect *= d;
    if (expect != payload.size()) throw std::invalid_argument("write_ktns: dims/payload mismatch");
    auto out = detail::open_out(path);
    out.write("KTNS", 4);
    detail::put_u32(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) detail::put_u32(out, d);
    for (double v : payload) detail::put_f32(out, static_cast<float>(v));
    if (!out) throw IoError("write failed: " + path);
}

struct KtnsTensor {
    std::vector<std::uint32_t> dims;
    std::vector<double> data;
};

inline KtnsTensor read_ktns(const std::string& path) {
    auto in = detail::open_in(path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "KTNS", 4) != 0)
        throw FormatError("not a KTNS file: " + path);
    std::uint32_t version = detail::get_u32(in, path);
    if (version != 1) throw FormatError("unsupported KTNS version: " + path);
    std::uint32_t ndim = detail::get_u32(in, path);
    if (ndim == 0 || ndim > 8) throw FormatError("bad KTNS ndim: " + path);
    KtnsTensor t;
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        t.dims.push_back(detail::get_u32(in, path));
        total *= t.dims.back();
    }
    t.data.resize(total);
    for (std::size_t i = 0; i < total; ++i) t.data[i] = detail::get_f32(in, path);
    return t;
}

inline void write_ktns(const std::string& path, const FrameTensor& f) {
    write_ktns(path,
               {static_cast<std::uint32_t>(f.height), static_cast<std::uint32_t>(f.width),
                static_cast<std::uint32_t>(f.channels)},
               f.data);
}

inline void write_ktns(const std::string& path, const LatentState& s) {
    write_ktns(path,
               {static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w),
                static_cast<std::uint32_t>(s.c)},
               s.data);
}

inline FrameTensor read_ktns_frame(const std::string& path) {
    KtnsTensor t = read_ktns(path);
    if (t.dims.size() != 3) throw FormatError("KTNS tensor is not rank-3: " + path);
    FrameTensor f(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                  static_cast<int>(t.dims[2]));
    f.data = std::move(t.data);
    return f;
}

// ---------------------------------------------------------------------------
// PPM (P6) / PGM (P5), binary, maxval 255.
// ---------------------------------------------------------------------------

inline void write_pnm(const std::string& path, const FrameTensor& f) {
    if (f.channels != 1 && f.channels != 3)
        throw std::invalid_argument("write_pnm: channels must be 1 or 3");
    auto out = detail::open_out(path);
    out << (f.channels == 3 ? "P6" : "P5") << "\n"
        << f.width << " " << f.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(f.width) * f.channels);
    for (int y = 0; y < f.height; ++y) {
        for (int x = 0; x < f.width; ++x) {
            for (int c = 0; c < f.channels; ++c) {
                double v = std::clamp(f.at(y, x, c), 0.0, 1.0);
                row[static_cast<std::size_t>(x) * f.channels + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace detail {

inline int pnm_token(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comments, returns a nonnegative integer.
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = in.get();
    }
    if (ch == EOF || !std::isdigit(ch)) throw FormatError("malformed PNM header: " + path);
    int value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        ch = in.get();
    }
    return value;
}

} // namespace detail

inline FrameTensor read_pnm(const std::string& path) {
    auto in = detail::open_in(path);
    char p = 0, kind = 0;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '5' && kind != '6')) throw FormatError("not a P5/P6 PNM: " + path);
    int width = detail::pnm_token(in, path);
    int height = detail::pnm_token(in, path);
    int maxval = detail::pnm_token(in, path);
    if (width < 1 || height < 1 || maxval != 255) throw FormatError("unsupported PNM header: " + path);
    int channels = (kind == '6') ? 3 : 1;
    FrameTensor f(height, width, channels);
    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * channels);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw FormatError("truncated PNM payload: " + path);
    for (std::size_t i = 0; i < raw.size(); ++i) f.data[i] = raw[i] / 255.0;
    return f;
}

// ---------------------------------------------------------------------------
// Landmark CSV.
// ---------------------------------------------------------------------------

inline void write_landmark_csv(const std::string& path, int frames, int landmarks,
                               std::span<const double> xy) {
    if (xy.size() != static_cast<std::size_t>(frames) * landmarks * 2)
        throw std::invalid_argument("write_landmark_csv: size mismatch");
    auto out = detail::open_out(path);
    out << "frame,landmark,x,y\n";
    for (int t = 0; t < frames; ++t) {
        for (int k = 0; k < landmarks; ++k) {
            std::size_t base = (static_cast<std::size_t>(t) * landmarks + k) * 2;
            out << t << "," << k << "," << detail::format_double(xy[base]) << ","
                << detail::format_double(xy[base + 1]) << "\n";
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

struct LandmarkCsv {
    int frames = 0;
    int landmarks = 0;
    std::vector<double> xy; // (t, k) -> (x, y)
};

inline LandmarkCsv read_landmark_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty landmark CSV: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "frame,landmark,x,y") throw FormatError("bad landmark CSV header: " + path);
    struct Row {
        int t, k;
        double x, y;
    };
    std::vector<Row> rows;
    int max_t = -1, max_k = -1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Row r{};
        char extra;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf%c", &r.t, &r.k, &r.x, &r.y, &extra) != 4 ||
            r.t < 0 || r.k < 0)
            throw FormatError("bad landmark CSV row: " + path);
        max_t = std::max(max_t, r.t);
        max_k = std::max(max_k, r.k);
        rows.push_back(r);
    }
    if (rows.empty()) throw FormatError("landmark CSV has no rows: " + path);
    LandmarkCsv track;
    track.frames = max_t + 1;
    track.landmarks = max_k + 1;
    if (rows.size() != static_cast<std::size_t>(track.frames) * track.landmarks)
        throw FormatError("landmark CSV is not a dense (frame, landmark) grid: " + path);
    track.xy.assign(rows.size() * 2, 0.0);
    for (const Row& r : rows) {
        std::size_t base = (static_cast<std::size_t>(r.t) * track.landmarks + r.k) * 2;
        track.xy[base] = r.x;
        track.xy[base + 1] = r.y;
    }
    return track;
}

// ---------------------------------------------------------------------------
// Frame directories: zero-padded 6-digit numbering, lexicographic order is
// temporal order.
// ---------------------------------------------------------------------------

inline std::string frame_name(int index_1based, int channels) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06d.%s", index_1based, channels == 1 ? "pgm" : "ppm");
    return buf;
}

inline std::vector<std::string> list_frame_files(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .ppm/.pgm frames in: " + dir);
    return files;
}

inline std::vector<FrameTensor> read_frame_dir(const std::string& dir) {
    std::vector<FrameTensor> frames;
    for (const auto& f : list_frame_files(dir)) frames.push_back(read_pnm(f));
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (!frames[i].same_shape(frames[0]))
            throw FormatError("frame shape drift in directory: " + dir);
    }
    return frames;
}

inline void write_frame_dir(const std::string& dir, const std::vector<FrameTensor>& frames) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        write_pnm((fs::path(dir) / frame_name(static_cast<int>(i) + 1, frames[i].channels)).string(),
                  frames[i]);
    }
}

} // namespace keep::io
