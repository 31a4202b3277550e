#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "pcdf/rng.hpp"
#include "pcdf/spectral.hpp"

using namespace pcdf;

namespace {

/// Direct O(n^2) evaluation of the transform definition; the independent
/// oracle every fast path is checked against.
std::vector<cdouble> dft_direct(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<cdouble> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        cdouble acc(0.0, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(j) *
                               static_cast<double>(t) / static_cast<double>(n);
            acc += x[t] * cdouble(std::cos(ang), std::sin(ang));
        }
        out[j] = acc;
    }
    return out;
}

}  // namespace

TEST_CASE("dft of a delta is flat") {
    const std::vector<double> x{1.0, 0.0, 0.0, 0.0};
    for (const auto& v : dft(std::span<const double>(x))) {
        CHECK_THAT(v.real(), Catch::Matchers::WithinAbs(1.0, 1e-12));
        CHECK_THAT(v.imag(), Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("dft of a constant is DC only") {
    const std::vector<double> x{1.0, 1.0, 1.0, 1.0};
    const auto spectrum = dft(std::span<const double>(x));
    CHECK_THAT(spectrum[0].real(), Catch::Matchers::WithinAbs(4.0, 1e-12));
    for (std::size_t j = 1; j < 4; ++j)
        CHECK_THAT(std::abs(spectrum[j]), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("idft inverts dft for random length-8 input") {
    Rng rng(3);
    std::vector<double> x(8);
    for (auto& v : x) v = rng.uniform(-5.0, 5.0);
    const auto back = idft(dft(std::span<const double>(x)));
    for (std::size_t t = 0; t < x.size(); ++t) {
        REQUIRE_THAT(back[t].real(), Catch::Matchers::WithinAbs(x[t], 1e-9));
        REQUIRE_THAT(back[t].imag(), Catch::Matchers::WithinAbs(0.0, 1e-9));
    }
}

TEST_CASE("dft matches the direct summation oracle up to n=64") {
    Rng rng(17);
    // Mix of power-of-two and Bluestein sizes.
    for (std::size_t n : {1u, 2u, 3u, 5u, 7u, 12u, 13u, 24u, 30u, 31u, 32u, 45u, 60u, 64u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.uniform(-3.0, 3.0);
        const auto fast = dft(std::span<const double>(x));
        const auto slow = dft_direct(x);
        for (std::size_t j = 0; j < n; ++j)
            REQUIRE_THAT(std::abs(fast[j] - slow[j]), Catch::Matchers::WithinAbs(0.0, 1e-9));
        const auto back = idft(fast);
        for (std::size_t t = 0; t < n; ++t)
            REQUIRE_THAT(back[t].real(), Catch::Matchers::WithinAbs(x[t], 1e-9));
    }
}

TEST_CASE("dominant_period finds sinusoid periods") {
    std::vector<double> x(240);
    for (std::size_t t = 0; t < x.size(); ++t)
        x[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 24.0);
    CHECK(dominant_period(x) == std::optional<std::size_t>(24));

    std::vector<double> y(64);
    for (std::size_t t = 0; t < y.size(); ++t)
        y[t] = std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / 8.0);
    CHECK(dominant_period(y) == std::optional<std::size_t>(8));
}

TEST_CASE("dominant_period signals no seasonality on constant input") {
    const std::vector<double> x(32, 3.5);
    CHECK_FALSE(dominant_period(x).has_value());
}

TEST_CASE("dominant_period ties break toward the smaller period") {
    // Bins 3 and 4 carry equal energy; the tie goes to bin 4, period 6.
    std::vector<double> x(24);
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double arg = 2.0 * std::numbers::pi * static_cast<double>(t) / 24.0;
        x[t] = std::sin(3.0 * arg) + std::sin(4.0 * arg);
    }
    CHECK(dominant_period(x) == std::optional<std::size_t>(6));
}

TEST_CASE("dominant_period is invariant to amplitude scaling and mean shifts") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t period = 2 + rng.below(14);
        const std::size_t length = period * (4 + rng.below(5));
        std::vector<double> x(length), scaled(length);
        const double amp = rng.uniform(0.1, 50.0);
        const double shift = rng.uniform(-100.0, 100.0);
        for (std::size_t t = 0; t < length; ++t) {
            x[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                            static_cast<double>(period));
            scaled[t] = amp * x[t] + shift;
        }
        REQUIRE(dominant_period(x) == dominant_period(scaled));
    }
}

TEST_CASE("shared_period combines by lcm") {
    const std::vector<std::size_t> p1{6, 4};
    const auto a = shared_period(p1, 48);
    CHECK(a.shared_period == 12);
    CHECK_FALSE(a.capped);

    const std::vector<std::size_t> p2{24};
    CHECK(shared_period(p2, 336).shared_period == 24);
}

TEST_CASE("shared_period caps an overflowing lcm") {
    const std::vector<std::size_t> p{7, 13, 11};
    const auto profile = shared_period(p, 40);  // lcm 1001 > 20
    CHECK(profile.capped);
    CHECK(profile.shared_period == 13);
}

TEST_CASE("shared_period rejects an empty list") {
    REQUIRE_THROWS_AS(shared_period(std::vector<std::size_t>{}, 48), ArgumentError);
}

namespace {

MultichannelSeries from_columns(const std::vector<std::vector<double>>& cols) {
    MultichannelSeries s;
    s.values = Matrix(cols[0].size(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        s.channel_names.push_back("c" + std::to_string(c));
        for (std::size_t t = 0; t < cols[c].size(); ++t) s.values(t, c) = cols[c][t];
    }
    return s;
}

}  // namespace

TEST_CASE("pca_redundancy on rank-1 data") {
    Rng rng(9);
    std::vector<double> base(50);
    for (auto& v : base) v = rng.uniform(-1.0, 1.0);
    std::vector<std::vector<double>> cols;
    for (double scale : {1.0, -2.0, 0.5, 3.0}) {
        std::vector<double> col(base.size());
        for (std::size_t t = 0; t < base.size(); ++t) col[t] = scale * base[t];
        cols.push_back(col);
    }
    const auto report = pca_redundancy(from_columns(cols), 0.95, 50);
    CHECK(report.pcs_at_threshold == 1);
    CHECK_THAT(report.pc1_var, Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("pca_redundancy recovers a known spectrum after rotation") {
    // Sample columns with exact covariance diag(4, 1, 0), then rotate; the
    // eigenvalues {4, 1, 0} give pc1 = 0.8 exactly.
    const std::vector<double> v1{2, -2, 2, -2};
    const std::vector<double> v2{1, 1, -1, -1};
    const std::vector<double> v3{0, 0, 0, 0};
    const double r3[3][3] = {{0.6, 0.8, 0.0}, {-0.8, 0.6, 0.0}, {0.0, 0.0, 1.0}};
    std::vector<std::vector<double>> cols(3, std::vector<double>(4, 0.0));
    for (std::size_t t = 0; t < 4; ++t) {
        const double f[3] = {v1[t], v2[t], v3[t]};
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t r = 0; r < 3; ++r) cols[c][t] += r3[r][c] * f[r];
    }
    const auto report = pca_redundancy(from_columns(cols), 0.95, 50);
    CHECK_THAT(report.pc1_var, Catch::Matchers::WithinAbs(0.8, 1e-9));
    CHECK_THAT(report.pc2_var, Catch::Matchers::WithinAbs(0.2, 1e-9));
    CHECK(report.pcs_at_threshold == 2);
}

TEST_CASE("pca_redundancy variance fractions are a distribution") {
    Rng rng(21);
    std::vector<std::vector<double>> cols(6, std::vector<double>(40));
    for (auto& col : cols)
        for (auto& v : col) v = rng.normal();
    const auto report = pca_redundancy(from_columns(cols), 0.95, 3);
    double sum = 0.0;
    double prev = 1.0;
    for (double f : report.variance_fractions) {
        REQUIRE(f >= -1e-10);
        REQUIRE(f <= prev + 1e-12);  // sorted descending
        prev = f;
        sum += f;
    }
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
    CHECK(report.pc2_var <= report.pc1_var);
}

TEST_CASE("pearson matches the direct formula") {
    const std::vector<double> x{1, 2, 3, 4};
    const std::vector<double> y{2, 4, 6, 8.1};
    const auto r = pearson(x, y);
    REQUIRE(r.has_value());
    CHECK_THAT(*r, Catch::Matchers::WithinAbs(0.9999272083175665, 1e-12));
}

TEST_CASE("pearson self and sign-flip correlations") {
    Rng rng(4);
    std::vector<double> x(20), neg(20);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.uniform(-1.0, 1.0);
        neg[i] = -x[i];
    }
    CHECK_THAT(*pearson(x, x), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(*pearson(x, neg), Catch::Matchers::WithinAbs(-1.0, 1e-12));
}

TEST_CASE("pearson is undefined on constant input and rejects length mismatch") {
    const std::vector<double> c{3, 3, 3};
    const std::vector<double> x{1, 2, 3};
    CHECK_FALSE(pearson(c, x).has_value());
    CHECK_FALSE(pearson(x, c).has_value());
    const std::vector<double> shorter{1, 2};
    REQUIRE_THROWS_AS(pearson(x, shorter), ArgumentError);
}

TEST_CASE("predictability_score is exactly 1 on periodic input") {
    Rng rng(8);
    for (std::size_t tau : {3u, 8u, 24u}) {
        std::vector<double> block(tau);
        for (auto& v : block) v = rng.uniform(-1.0, 1.0);
        std::vector<double> y(4 * tau);
        for (std::size_t t = 0; t < y.size(); ++t) y[t] = block[t % tau];
        const auto r = predictability_score(y, tau);
        REQUIRE(r.has_value());
        CHECK_THAT(*r, Catch::Matchers::WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("predictability_score is -1 on an anti-periodic signal") {
    const std::size_t tau = 6;
    Rng rng(13);
    std::vector<double> y(2 * tau);
    for (std::size_t t = 0; t < tau; ++t) {
        y[t] = rng.uniform(-1.0, 1.0);
        y[t + tau] = -y[t];
    }
    // Remove block means so the negated block is an exact mirror around them.
    double mean = 0.0;
    for (std::size_t t = 0; t < tau; ++t) mean += y[t];
    mean /= static_cast<double>(tau);
    for (std::size_t t = 0; t < tau; ++t) {
        y[t] -= mean;
        y[t + tau] += mean;
    }
    const auto r = predictability_score(y, tau);
    REQUIRE(r.has_value());
    CHECK_THAT(*r, Catch::Matchers::WithinAbs(-1.0, 1e-9));
}

TEST_CASE("predictability_score of white noise stays near zero") {
    // Monte-Carlo over the disjoint block pairs of one long draw: the mean
    // correlation concentrates near 0 even though single pairs scatter.
    const std::size_t tau = 16;
    const std::size_t length = 4096;
    Rng rng(2038);
    std::vector<double> y(length);
    for (auto& v : y) v = rng.normal();

    const auto first = predictability_score(y, tau);
    REQUIRE(first.has_value());
    CHECK(std::abs(*first) < 0.1);

    double mean_r = 0.0;
    std::size_t pairs = 0;
    for (std::size_t start = 0; start + 2 * tau <= length; start += 2 * tau) {
        const auto r = predictability_score(std::span<const double>(y).subspan(start), tau);
        REQUIRE(r.has_value());
        mean_r += *r;
        ++pairs;
    }
    mean_r /= static_cast<double>(pairs);
    CHECK(std::abs(mean_r) < 0.1);
}

TEST_CASE("predictability_score is undefined for constant blocks") {
    const std::vector<double> y(12, 1.0);
    CHECK_FALSE(predictability_score(y, 4).has_value());
}
