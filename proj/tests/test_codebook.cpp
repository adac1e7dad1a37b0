#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "keep/codebook.hpp"
#include "keep/rng.hpp"

using namespace keep;

namespace {

LatentState random_state(int h, int w, int c, std::uint64_t seed) {
    LatentState s(h, w, c);
    SeededRng rng(seed);
    for (double& v : s.data) v = rng.uniform(-2.0, 2.0);
    return s;
}

// Exhaustive nearest-neighbor search, kept separate from the implementation.
int brute_force_index(const LatentState& s, int i, int j, const Codebook& book) {
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < book.count; ++k) {
        double dist = 0.0;
        for (int ch = 0; ch < s.c; ++ch) {
            double d = s.at(i, j, ch) - book.at(k, ch);
            dist += d * d;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = k;
        }
    }
    return best;
}

} // namespace

TEST_CASE("quantize exact match, hand distances, and tie-break", "[codebook]") {
    Codebook book(4, 2);
    const double entries[4][2] = {{0.0, 0.0}, {1.0, 1.0}, {-1.0, 0.5}, {0.3, 0.4}};
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 2; ++j) book.at(k, j) = entries[k][j];

    LatentState s(1, 3, 2);
    s.at(0, 0, 0) = 0.3; s.at(0, 0, 1) = 0.4;   // exactly code 3
    s.at(0, 1, 0) = 0.2; s.at(0, 1, 1) = 0.1;   // 0.05 to code 0 vs 1.45 to code 1
    s.at(0, 2, 0) = 0.5; s.at(0, 2, 1) = 0.5;   // equidistant from codes 0 and 1
    QuantizedCode q = quantize(s, book);
    REQUIRE(q.index_at(0, 0) == 3);
    REQUIRE(q.quantized.at(0, 0, 0) == 0.3);
    REQUIRE(q.index_at(0, 1) == 0);
    REQUIRE(q.index_at(0, 2) == 0); // tie prefers the smallest index

    LatentState wrong_dim(1, 1, 3);
    REQUIRE_THROWS_AS(quantize(wrong_dim, book), std::invalid_argument);
}

TEST_CASE("quantize is idempotent and never beaten by another assignment", "[codebook]") {
    Codebook book = Codebook::seeded(8, 3, 17);
    LatentState s = random_state(4, 5, 3, 18);
    QuantizedCode q = quantize(s, book);
    QuantizedCode again = quantize(q.quantized, book);
    REQUIRE(again.indices == q.indices);

    for (int i = 0; i < s.h; ++i)
        for (int j = 0; j < s.w; ++j)
            REQUIRE(q.index_at(i, j) == brute_force_index(s, i, j, book));
}

TEST_CASE("seeded codebook has unit RMS", "[codebook]") {
    Codebook book = Codebook::seeded(64, 16, 3);
    double ms = 0.0;
    for (double v : book.codes) ms += v * v;
    REQUIRE(std::sqrt(ms / static_cast<double>(book.codes.size())) ==
            Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("code losses share one value and vanish on agreement", "[codebook]") {
    Codebook book = Codebook::seeded(6, 2, 21);
    LatentState s = random_state(3, 3, 2, 22);
    QuantizedCode q = quantize(s, book);

    CodeLosses on_match = code_losses(q.quantized, q, book);
    REQUIRE(on_match.codebook_loss == 0.0);
    REQUIRE(on_match.commit_loss == 0.0);

    CodeLosses losses = code_losses(s, q, book);
    REQUIRE(losses.codebook_loss == losses.commit_loss);

    LatentState shifted = q.quantized;
    for (double& v : shifted.data) v += 0.1;
    CodeLosses offset = code_losses(shifted, q, book);
    REQUIRE(offset.commit_loss == Catch::Approx(0.01).margin(1e-12));
    REQUIRE(offset.codebook_loss == Catch::Approx(0.01).margin(1e-12));
}

TEST_CASE("commit-loss gradient matches central differences", "[codebook]") {
    Codebook book = Codebook::seeded(5, 4, 31);
    LatentState s = random_state(2, 2, 4, 32);
    QuantizedCode q = quantize(s, book);
    CodeLosses base = code_losses(s, q, book);
    const double h = 1e-6;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        LatentState plus = s, minus = s;
        plus.data[i] += h;
        minus.data[i] -= h;
        double fd = (code_losses(plus, q, book).commit_loss -
                     code_losses(minus, q, book).commit_loss) /
                    (2.0 * h);
        REQUIRE(base.d_commit_d_encoder.data[i] ==
                Catch::Approx(fd).epsilon(1e-4).margin(1e-10));
    }
}

TEST_CASE("token cross entropy values", "[codebook]") {
    const int h = 2, w = 2, n = 4;
    LatentState logits(h, w, n, 0.0);
    std::vector<int> targets{0, 1, 2, 3};
    TokenCrossEntropy uniform = token_cross_entropy(logits, targets);
    REQUIRE(uniform.loss == Catch::Approx(std::log(4.0)).margin(1e-12));

    LatentState confident(h, w, n, 0.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            confident.at(i, j, targets[static_cast<std::size_t>(i) * w + j]) = 20.0;
    REQUIRE(token_cross_entropy(confident, targets).loss < 1e-8);

    std::vector<int> bad{0, 1, 2, 4};
    REQUIRE_THROWS_AS(token_cross_entropy(logits, bad), std::invalid_argument);
}

TEST_CASE("token cross entropy gradient matches central differences", "[codebook]") {
    LatentState logits = random_state(2, 2, 5, 41);
    std::vector<int> targets{1, 4, 0, 2};
    TokenCrossEntropy base = token_cross_entropy(logits, targets);
    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.data.size(); ++i) {
        LatentState plus = logits, minus = logits;
        plus.data[i] += h;
        minus.data[i] -= h;
        double fd = (token_cross_entropy(plus, targets).loss -
                     token_cross_entropy(minus, targets).loss) /
                    (2.0 * h);
        REQUIRE(base.d_loss_d_logits[i] == Catch::Approx(fd).epsilon(1e-4).margin(1e-10));
    }
}
