#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "keep/io.hpp"
#include "keep/motion.hpp"
#include "keep/rng.hpp"
#include "keep/tensor.hpp"

using namespace keep;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / ("keep_io_test_" + std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("ktns write-read-write is byte identical", "[io]") {
    fs::path dir = temp_dir();
    FrameTensor f(5, 7, 3);
    SeededRng rng(5);
    for (double& v : f.data) v = rng.uniform(-2.0, 2.0);
    fs::path first = dir / "a.ktns";
    fs::path second = dir / "b.ktns";
    io::write_ktns(first.string(), f);
    FrameTensor back = io::read_ktns_frame(first.string());
    REQUIRE(back.same_shape(f));
    io::write_ktns(second.string(), back);
    REQUIRE(read_bytes(first) == read_bytes(second));
    // payload is float32, so the first write already rounds
    for (std::size_t i = 0; i < f.data.size(); ++i)
        REQUIRE(back.data[i] == static_cast<double>(static_cast<float>(f.data[i])));
}

TEST_CASE("ktns format errors", "[io]") {
    fs::path dir = temp_dir();
    fs::path bad = dir / "bad.ktns";
    std::ofstream(bad) << "NOTKTNSFILE";
    REQUIRE_THROWS_AS(io::read_ktns(bad.string()), FormatError);
    REQUIRE_THROWS_AS(io::read_ktns((dir / "missing.ktns").string()), IoError);
}

TEST_CASE("pnm round trip and value mapping", "[io]") {
    fs::path dir = temp_dir();
    for (int channels : {1, 3}) {
        FrameTensor f(6, 4, channels);
        SeededRng rng(13 + static_cast<std::uint64_t>(channels));
        for (double& v : f.data) v = rng.uniform();
        fs::path first = dir / ("a" + std::to_string(channels));
        fs::path second = dir / ("b" + std::to_string(channels));
        io::write_pnm(first.string(), f);
        FrameTensor back = io::read_pnm(first.string());
        io::write_pnm(second.string(), back);
        REQUIRE(read_bytes(first) == read_bytes(second));
        for (double v : back.data) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
            // every stored value is byte/255
            REQUIRE(v * 255.0 == Catch::Approx(std::round(v * 255.0)).margin(1e-9));
        }
    }
}

TEST_CASE("pnm tolerates comments and rejects junk", "[io]") {
    fs::path dir = temp_dir();
    fs::path commented = dir / "c.pgm";
    {
        std::ofstream out(commented, std::ios::binary);
        out << "P5\n# a comment\n2 1\n255\n";
        out.put(static_cast<char>(0));
        out.put(static_cast<char>(255));
    }
    FrameTensor f = io::read_pnm(commented.string());
    REQUIRE(f.width == 2);
    REQUIRE(f.at(0, 0, 0) == 0.0);
    REQUIRE(f.at(0, 1, 0) == 1.0);

    fs::path junk = dir / "junk.pgm";
    std::ofstream(junk) << "P2\n2 2\n255\n0 0 0 0\n"; // ascii PNM unsupported
    REQUIRE_THROWS_AS(io::read_pnm(junk.string()), FormatError);
}

TEST_CASE("flo round trip", "[io]") {
    fs::path dir = temp_dir();
    FlowField flow(4, 6);
    SeededRng rng(21);
    for (double& v : flow.data) v = rng.uniform(-3.0, 3.0);
    fs::path first = dir / "a.flo";
    fs::path second = dir / "b.flo";
    write_flo(first.string(), flow);
    FlowField back = read_flo(first.string());
    REQUIRE(back.height == 4);
    REQUIRE(back.width == 6);
    write_flo(second.string(), back);
    REQUIRE(read_bytes(first) == read_bytes(second));

    fs::path bad = dir / "bad.flo";
    std::ofstream(bad) << "garbage data here";
    REQUIRE_THROWS_AS(read_flo(bad.string()), FormatError);
}

TEST_CASE("landmark csv round trip", "[io]") {
    fs::path dir = temp_dir();
    const int frames = 3, landmarks = 2;
    std::vector<double> xy;
    SeededRng rng(31);
    for (int i = 0; i < frames * landmarks; ++i) {
        xy.push_back(rng.uniform(0.0, 511.0));
        xy.push_back(rng.uniform(0.0, 511.0));
    }
    fs::path first = dir / "a.csv";
    fs::path second = dir / "b.csv";
    io::write_landmark_csv(first.string(), frames, landmarks, xy);
    io::LandmarkCsv back = io::read_landmark_csv(first.string());
    REQUIRE(back.frames == frames);
    REQUIRE(back.landmarks == landmarks);
    io::write_landmark_csv(second.string(), back.frames, back.landmarks, back.xy);
    REQUIRE(read_bytes(first) == read_bytes(second));
    for (std::size_t i = 0; i < xy.size(); ++i) REQUIRE(back.xy[i] == xy[i]);

    fs::path bad = dir / "bad.csv";
    std::ofstream(bad) << "frame,landmark,x,y\n0,0,1.0\n";
    REQUIRE_THROWS_AS(io::read_landmark_csv(bad.string()), FormatError);
}

TEST_CASE("frame directory ordering", "[io]") {
    fs::path dir = temp_dir() / "frames";
    std::vector<FrameTensor> frames;
    for (int t = 0; t < 3; ++t) frames.push_back(FrameTensor(4, 4, 1, t * 0.25));
    io::write_frame_dir(dir.string(), frames);
    auto files = io::list_frame_files(dir.string());
    REQUIRE(files.size() == 3);
    REQUIRE(files[0].find("frame_000001.pgm") != std::string::npos);
    auto back = io::read_frame_dir(dir.string());
    REQUIRE(back.size() == 3);
    for (int t = 0; t < 3; ++t)
        REQUIRE(back[static_cast<std::size_t>(t)].at(0, 0, 0) ==
                Catch::Approx(t * 0.25).margin(1.0 / 255.0));
    REQUIRE_THROWS_AS(io::read_frame_dir((dir / "nope").string()), IoError);
}
