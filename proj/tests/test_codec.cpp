#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <vector>

#include "pcdf/codec.hpp"
#include "pcdf/keys.hpp"
#include "pcdf/rng.hpp"
#include "pcdf/spectral.hpp"

using namespace pcdf;

namespace {

/// Oracle: build the circulant matrix explicitly and multiply. Independent of
/// the library's accumulation loop.
std::vector<double> conv_oracle(const std::vector<double>& x, const std::vector<double>& k) {
    const std::size_t n = x.size();
    std::vector<double> y(n, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t z = 0; z < n; ++z) y[t] += k[(t + n - z) % n] * x[z];
    return y;
}

std::vector<double> corr_oracle(const std::vector<double>& y, const std::vector<double>& k) {
    const std::size_t n = y.size();
    std::vector<double> x(n, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t z = 0; z < n; ++z) x[t] += k[(z + n - t) % n] * y[z];
    return x;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double amp = 2.0) {
    Matrix m(rows, cols);
    for (auto& v : m.storage()) v = rng.uniform(-amp, amp);
    return m;
}

std::vector<double> shift1(const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) out[t] = x[(t + x.size() - 1) % x.size()];
    return out;
}

}  // namespace

TEST_CASE("encode_channel with a delta key is the identity") {
    const std::vector<double> x{3.0, 1.0, 4.0, 1.0, 5.0};
    const auto key = make_delta_key(5);
    CHECK(encode_channel(x, key.base) == x);
}

TEST_CASE("encode_channel matches the worked example") {
    const std::vector<double> x{1, 2, 3, 4};
    const std::vector<double> k{1, 0, 1, 0};
    CHECK(encode_channel(x, k) == std::vector<double>{4, 6, 4, 6});
}

TEST_CASE("encode_channel is shift-equivariant") {
    Rng rng(31);
    std::vector<double> x(8), k(8);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : k) v = rng.uniform(-1, 1);
    const auto lhs = encode_channel(shift1(x), k);
    const auto rhs = shift1(encode_channel(x, k));
    for (std::size_t t = 0; t < 8; ++t)
        REQUIRE_THAT(lhs[t], Catch::Matchers::WithinAbs(rhs[t], 1e-9));
}

TEST_CASE("encode_channel and decode agree with the circulant oracles") {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(32);
        std::vector<double> x(n), k(n);
        for (auto& v : x) v = rng.uniform(-2, 2);
        for (auto& v : k) v = rng.uniform(-2, 2);
        const auto fast = encode_channel(x, k);
        const auto slow = conv_oracle(x, k);
        for (std::size_t t = 0; t < n; ++t)
            REQUIRE_THAT(fast[t], Catch::Matchers::WithinAbs(slow[t], 1e-9));
        const auto fast_corr = correlate_channel(x, k);
        const auto slow_corr = corr_oracle(x, k);
        for (std::size_t t = 0; t < n; ++t)
            REQUIRE_THAT(fast_corr[t], Catch::Matchers::WithinAbs(slow_corr[t], 1e-9));
    }
}

TEST_CASE("encode_channel rejects mismatched lengths") {
    REQUIRE_THROWS_AS(encode_channel(std::vector<double>{1, 2}, std::vector<double>{1}),
                      ArgumentError);
}

TEST_CASE("compress_dense degenerates to the channel for C=1 with a delta key") {
    Rng rng(7);
    const auto x = random_matrix(6, 1, rng);
    const auto key = make_delta_key(6);
    const auto compressed = compress_dense(x, key);
    REQUIRE(compressed.mode == CompressionMode::dense);
    CHECK(compressed.y == x.col(0));
}

TEST_CASE("compress_dense cancels opposite channels") {
    Rng rng(8);
    Matrix x(8, 2);
    for (std::size_t t = 0; t < 8; ++t) {
        x(t, 0) = rng.uniform(-1, 1);
        x(t, 1) = -x(t, 0);
    }
    const auto key = make_orthogonal_key(4, 2);
    for (double v : compress_dense(x, key).y)
        REQUIRE_THAT(v, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("compress_dense equals the summed per-channel oracle") {
    Rng rng(9);
    const auto x = random_matrix(8, 3, rng);
    const auto key = make_orthogonal_key(4, 3);
    const auto tiled = tile_key(key.base, 8);
    std::vector<double> expected(8, 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto enc = conv_oracle(x.col(c), tiled);
        for (std::size_t t = 0; t < 8; ++t) expected[t] += enc[t];
    }
    const auto compressed = compress_dense(x, key);
    for (std::size_t t = 0; t < 8; ++t)
        REQUIRE_THAT(compressed.y[t], Catch::Matchers::WithinAbs(expected[t], 1e-10));
}

TEST_CASE("compress_sparse with a delta base is the identity per segment") {
    Matrix x(4, 1);
    x(0, 0) = 1;
    x(1, 0) = 2;
    x(2, 0) = 3;
    x(3, 0) = 4;
    const auto key = make_delta_key(2);
    CHECK(compress_sparse(x, key).y == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("compress_sparse drops the tail shorter than tau") {
    Rng rng(10);
    const auto x = random_matrix(5, 2, rng);
    const auto key = make_orthogonal_key(2, 4);
    const auto compressed = compress_sparse(x, key);
    CHECK(compressed.y.size() == 4);
    CHECK(compressed.mode == CompressionMode::sparse);
}

TEST_CASE("compress_sparse equals per-segment oracle convolutions summed") {
    Rng rng(11);
    const auto x = random_matrix(8, 2, rng);
    const auto key = make_orthogonal_key(4, 5);
    std::vector<double> expected(8, 0.0);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t j = 0; j < 2; ++j) {
            std::vector<double> seg(4);
            for (std::size_t t = 0; t < 4; ++t) seg[t] = x(j * 4 + t, c);
            const auto enc = conv_oracle(seg, key.base);
            for (std::size_t t = 0; t < 4; ++t) expected[j * 4 + t] += enc[t];
        }
    const auto compressed = compress_sparse(x, key);
    for (std::size_t t = 0; t < 8; ++t)
        REQUIRE_THAT(compressed.y[t], Catch::Matchers::WithinAbs(expected[t], 1e-10));
}

TEST_CASE("sparse decode inverts a single channel exactly with an orthonormal key") {
    Rng rng(12);
    const auto x = random_matrix(12, 1, rng);
    const auto key = make_orthogonal_key(4, 6);
    const auto compressed = compress_sparse(x, key);
    const auto decoded = decode(compressed.y, key, CompressionMode::sparse);
    for (std::size_t t = 0; t < decoded.size(); ++t)
        REQUIRE_THAT(decoded[t] / key.sum_sq, Catch::Matchers::WithinAbs(x(t, 0), 1e-8));
}

TEST_CASE("decode with a delta key is the identity") {
    Rng rng(13);
    std::vector<double> y(9);
    for (auto& v : y) v = rng.uniform(-4, 4);
    // Sparse: every tau-block decodes through the identity circulant.
    CHECK(decode(y, make_delta_key(3), CompressionMode::sparse) == y);
    // Dense: identity when the delta spans the whole decode window.
    CHECK(decode(y, make_delta_key(9), CompressionMode::dense) == y);
}

TEST_CASE("sparse decode recovers the channel sum for C=2") {
    Rng rng(14);
    const auto x = random_matrix(8, 2, rng);
    const auto key = make_orthogonal_key(4, 7);
    const auto compressed = compress_sparse(x, key);
    const auto decoded = decode(compressed.y, key, CompressionMode::sparse);
    for (std::size_t t = 0; t < 8; ++t)
        REQUIRE_THAT(decoded[t] / key.sum_sq,
                     Catch::Matchers::WithinAbs(x(t, 0) + x(t, 1), 1e-8));
}

TEST_CASE("sparse decode reports misaligned horizons") {
    const auto key = make_orthogonal_key(4, 8);
    std::vector<double> y(10, 1.0);
    try {
        decode(y, key, CompressionMode::sparse);
        FAIL("expected ArgumentError");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("multiple of tau") != std::string::npos);
    }
}

TEST_CASE("dense decode matches the direct correlation oracle") {
    Rng rng(15);
    std::vector<double> y(10);
    for (auto& v : y) v = rng.uniform(-1, 1);
    const auto key = make_orthogonal_key(5, 9);
    std::vector<double> tiled(10);
    for (std::size_t t = 0; t < 10; ++t) tiled[t] = key.base[t % 5];
    const auto expected = corr_oracle(y, tiled);
    const auto decoded = decode(y, key, CompressionMode::dense);
    for (std::size_t t = 0; t < 10; ++t)
        REQUIRE_THAT(decoded[t], Catch::Matchers::WithinAbs(expected[t], 1e-10));
}

TEST_CASE("compression is linear in both modes") {
    Rng rng(16);
    const auto key = make_orthogonal_key(4, 10);
    const auto a = random_matrix(12, 3, rng);
    const auto b = random_matrix(12, 3, rng);
    const double ca = 1.7, cb = -0.6;
    Matrix mix(12, 3);
    for (std::size_t i = 0; i < mix.storage().size(); ++i)
        mix.storage()[i] = ca * a.storage()[i] + cb * b.storage()[i];
    for (auto mode : {CompressionMode::dense, CompressionMode::sparse}) {
        const auto ya = compress(a, std::span<const CircularKey>(&key, 1), mode);
        const auto yb = compress(b, std::span<const CircularKey>(&key, 1), mode);
        const auto ym = compress(mix, std::span<const CircularKey>(&key, 1), mode);
        for (std::size_t t = 0; t < ym.y.size(); ++t)
            REQUIRE_THAT(ym.y[t],
                         Catch::Matchers::WithinAbs(ca * ya.y[t] + cb * yb.y[t], 1e-9));
    }
}

TEST_CASE("compressing periodic channels preserves block predictability") {
    Rng rng(17);
    for (std::size_t tau : {4u, 12u}) {
        const std::size_t len = 4 * tau;
        Matrix x(len, 3);
        for (std::size_t c = 0; c < 3; ++c) {
            std::vector<double> block(tau);
            for (auto& v : block) v = rng.uniform(-1, 1);
            for (std::size_t t = 0; t < len; ++t) x(t, c) = block[t % tau];
        }
        const auto key = make_orthogonal_key(tau, 18);
        const auto score = predictability_score(compress_dense(x, key).y, tau);
        REQUIRE(score.has_value());
        REQUIRE_THAT(*score, Catch::Matchers::WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("interference vanishes on the orthogonal sparse path") {
    Rng rng(18);
    const auto x = random_matrix(16, 3, rng);
    const auto key = make_orthogonal_key(4, 19);
    for (double v : interference_estimate(x, key, CompressionMode::sparse))
        REQUIRE_THAT(v, Catch::Matchers::WithinAbs(0.0, 1e-8));
}

TEST_CASE("interference is exactly zero for a full-window delta key") {
    Rng rng(19);
    const auto x = random_matrix(8, 1, rng);
    const auto key = make_delta_key(8);
    for (double v : interference_estimate(x, key, CompressionMode::dense)) CHECK(v == 0.0);
}

TEST_CASE("a random-normal key leaves measurable interference") {
    Rng rng(20);
    const auto x = random_matrix(64, 1, rng);
    const auto key = make_random_key(8, RandomKeyDist::normal, 21);
    double norm = 0.0;
    for (double v : interference_estimate(x, key, CompressionMode::dense)) norm += v * v;
    CHECK(std::sqrt(norm) > 1e-3);
}

namespace {

/// Straight-line re-implementation of the head: explicit zero-padded arrays
/// and separate loops, used as the dual-implementation oracle.
Matrix head_oracle(const std::vector<double>& x_tilde, const ReconstructionHead& head,
                   double sum_sq) {
    const std::size_t h = x_tilde.size();
    const std::size_t c_n = head.channels;
    const std::size_t f_n = head.hidden;
    const std::size_t k = head.kernel;
    const std::size_t r = k / 2;

    std::vector<std::vector<double>> z(h + 2 * r, std::vector<double>(c_n, 0.0));
    for (std::size_t t = 0; t < h; ++t)
        for (std::size_t c = 0; c < c_n; ++c) z[t + r][c] = x_tilde[t] / sum_sq;

    const auto w1 = head.params.group("conv1_w");
    const auto b1 = head.params.group("conv1_b");
    std::vector<std::vector<double>> hid(h + 2 * r, std::vector<double>(f_n, 0.0));
    for (std::size_t t = 0; t < h; ++t)
        for (std::size_t f = 0; f < f_n; ++f) {
            double acc = b1[f];
            for (std::size_t c = 0; c < c_n; ++c)
                for (std::size_t d = 0; d < k; ++d) acc += w1[(f * c_n + c) * k + d] * z[t + d][c];
            hid[t + r][f] = std::max(acc, 0.0);
        }

    const auto w2 = head.params.group("conv2_w");
    const auto b2 = head.params.group("conv2_b");
    std::vector<std::vector<double>> res(h, std::vector<double>(c_n, 0.0));
    for (std::size_t t = 0; t < h; ++t)
        for (std::size_t c = 0; c < c_n; ++c) {
            double acc = b2[c];
            for (std::size_t f = 0; f < f_n; ++f)
                for (std::size_t d = 0; d < k; ++d)
                    acc += w2[(c * f_n + f) * k + d] * hid[t + d][f];
            res[t][c] = acc;
        }

    const auto dw = head.params.group("dense_w");
    const auto db = head.params.group("dense_b");
    Matrix out(h, c_n);
    for (std::size_t t = 0; t < h; ++t)
        for (std::size_t i = 0; i < c_n; ++i) {
            double acc = db[i];
            for (std::size_t j = 0; j < c_n; ++j)
                acc += dw[i * c_n + j] * (x_tilde[t] / sum_sq + res[t][j]);
            out(t, i) = acc;
        }
    return out;
}

}  // namespace

TEST_CASE("reconstruct with a degenerate head is the scaled broadcast") {
    auto head = ReconstructionHead::make(3);
    auto dw = head.params.group("dense_w");
    for (std::size_t c = 0; c < 3; ++c) dw[c * 3 + c] = 1.0;
    const std::vector<double> x_tilde{1.0, -2.0, 4.0};
    const auto out = reconstruct(x_tilde, head, 3, 2.0);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t c = 0; c < 3; ++c)
            REQUIRE_THAT(out(t, c), Catch::Matchers::WithinAbs(x_tilde[t] / 2.0, 1e-12));
}

TEST_CASE("reconstruct maps zero input to zero with zero biases") {
    Rng rng(22);
    auto head = ReconstructionHead::make(2);
    head.init_random(rng);
    for (auto& v : head.params.group("conv1_b")) v = 0.0;
    for (auto& v : head.params.group("conv2_b")) v = 0.0;
    for (auto& v : head.params.group("dense_b")) v = 0.0;
    const std::vector<double> x_tilde(5, 0.0);
    const auto out = reconstruct(x_tilde, head, 2, 1.0);
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t c = 0; c < 2; ++c) CHECK(out(t, c) == 0.0);
}

TEST_CASE("reconstruct matches the straight-line oracle") {
    Rng rng(23);
    auto head = ReconstructionHead::make(4);
    head.init_random(rng, 0.7);
    std::vector<double> x_tilde(10);
    for (auto& v : x_tilde) v = rng.uniform(-2, 2);
    const double sum_sq = 1.3;
    const auto fast = reconstruct(x_tilde, head, 4, sum_sq);
    const auto slow = head_oracle(x_tilde, head, sum_sq);
    for (std::size_t t = 0; t < 10; ++t)
        for (std::size_t c = 0; c < 4; ++c)
            REQUIRE_THAT(fast(t, c), Catch::Matchers::WithinAbs(slow(t, c), 1e-10));
}

TEST_CASE("reconstruct rejects non-finite parameters") {
    auto head = ReconstructionHead::make(2);
    head.params.group("conv1_w")[0] = std::nan("");
    REQUIRE_THROWS_AS(reconstruct(std::vector<double>{1.0, 2.0}, head, 2, 1.0), NumericError);
}

TEST_CASE("payload serialization round-trips") {
    Rng rng(24);
    CompressedSeries series;
    series.mode = CompressionMode::sparse;
    series.tau = 6;
    series.y.resize(18);
    for (auto& v : series.y) v = rng.uniform(-3, 3);
    NormStats stats;
    stats.mean = 0.25;
    stats.std = 1.75;
    series.norm = stats;

    const auto bytes = serialize_payload(series);
    CHECK(bytes.size() == 28 + 8 * series.y.size());
    const auto back = deserialize_payload(bytes);
    CHECK(back.mode == series.mode);
    CHECK(back.tau == series.tau);
    CHECK(back.y == series.y);
    REQUIRE(back.norm.has_value());
    CHECK(back.norm->mean == stats.mean);
    CHECK(back.norm->std == stats.std);
}

TEST_CASE("payload deserialization rejects corruption") {
    CompressedSeries series;
    series.y = {1.0, 2.0};
    series.tau = 2;
    auto bytes = serialize_payload(series);
    bytes.pop_back();
    REQUIRE_THROWS_AS(deserialize_payload(bytes), DataError);
    bytes.clear();
    REQUIRE_THROWS_AS(deserialize_payload(bytes), DataError);
}

TEST_CASE("sparse compression scales more gently with window length than dense") {
    // Ratio ordering only: quadrupling L should multiply dense cost by ~16
    // and sparse cost by ~4; assert the dense growth ratio strictly exceeds
    // the sparse one with slack for scheduler noise.
    Rng rng(25);
    const std::size_t tau = 8;
    const auto key = make_orthogonal_key(tau, 26);
    const auto small = random_matrix(1024, 1, rng);
    const auto large = random_matrix(4096, 1, rng);

    auto time_once = [](auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double>(t1 - t0).count();
    };
    auto best_of = [&](auto&& fn) {
        double best = 1e18;
        for (int rep = 0; rep < 3; ++rep) best = std::min(best, time_once(fn));
        return best;
    };

    volatile double sink = 0.0;
    const double dense_small = best_of([&] { sink = compress_dense(small, key).y[0]; });
    const double dense_large = best_of([&] { sink = compress_dense(large, key).y[0]; });
    const double sparse_small = best_of([&] { sink = compress_sparse(small, key).y[0]; });
    const double sparse_large = best_of([&] { sink = compress_sparse(large, key).y[0]; });
    (void)sink;

    const double dense_ratio = dense_large / dense_small;
    const double sparse_ratio = sparse_large / sparse_small;
    CHECK(dense_ratio > sparse_ratio * 1.5);
}
