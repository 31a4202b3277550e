#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>

#include "cdpi_table.hpp"
#include "pcdf/bench.hpp"
#include "pcdf/rng.hpp"

using namespace pcdf;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t t = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (double v : row) m(t, c++) = v;
        ++t;
    }
    return m;
}

}  // namespace

TEST_CASE("mse basics") {
    const auto x = from_rows({{0, 1}, {2, 3}});
    CHECK(mse(x, x) == 0.0);

    auto plus_one = x;
    for (auto& v : plus_one.storage()) v += 1.0;
    CHECK(mse(plus_one, x) == 1.0);

    const auto y = from_rows({{1, 1}, {2, 5}});
    CHECK_THAT(mse(x, y), Catch::Matchers::WithinAbs(1.25, 1e-12));

    const auto wrong = from_rows({{1, 2, 3}});
    REQUIRE_THROWS_AS(mse(x, wrong), ArgumentError);
}

TEST_CASE("time_inference bounds a no-op closure") {
    const auto t = time_inference([] {}, 5, 1);
    CHECK(t.median_s < 1e-3);
    CHECK(t.min_s <= t.median_s);
    CHECK(t.median_s <= t.max_s);
    CHECK(t.repetitions == 5);
}

TEST_CASE("time_inference medians a 10ms busy-wait into [9, 50] ms") {
    auto busy = [] {
        const auto t0 = std::chrono::steady_clock::now();
        while (std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() <
               0.010) {
        }
    };
    const auto t = time_inference(busy, 5, 1);
    CHECK(t.median_s >= 0.009);
    CHECK(t.median_s <= 0.050);
}

TEST_CASE("time_inference median is the middle order statistic") {
    // Workload grows per call: with 0 warmups the five timed runs take
    // roughly 10, 20, 30, 40, 50 ms, so the median must land near 30 ms.
    int call = 0;
    auto stepped = [&call] {
        ++call;
        const double target = 0.010 * call;
        const auto t0 = std::chrono::steady_clock::now();
        while (std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() <
               target) {
        }
    };
    const auto t = time_inference(stepped, 5, 0);
    // Wide bounds: scheduler preemption can stretch any single sample.
    CHECK(t.median_s >= 0.018);
    CHECK(t.median_s <= 0.047);
    CHECK(t.min_s < 0.018);
    CHECK(t.max_s > 0.043);
}

TEST_CASE("cdpi reproduces published index rows") {
    CHECK_THAT(cdpi(0.17001, 0.00270), Catch::Matchers::WithinAbs(0.000459, 5e-7));
    CHECK_THAT(cdpi(0.17185, 0.00198), Catch::Matchers::WithinAbs(0.000340, 5e-7));
    CHECK(cdpi(0.0, 123.0) == 0.0);
}

TEST_CASE("cdpi cross-table consistency holds for every transcribed row") {
    for (const auto& row : pcdf_tests::k_cdpi_rows) {
        INFO(row.label);
        REQUIRE_THAT(cdpi(row.mse, row.runtime_s),
                     Catch::Matchers::WithinAbs(row.cdpi, 1e-6));
    }
}

TEST_CASE("run report enforces the cdpi identity") {
    TimingResult timing;
    timing.median_s = 0.25;
    timing.min_s = 0.2;
    timing.max_s = 0.3;
    const auto report = RunReport::make(0.5, timing, "abc", 100, "sparse");
    CHECK(report.cdpi == report.mse * report.runtime_s);
}

TEST_CASE("superiority threshold matches the worked example") {
    const auto r = superiority_threshold(2, 10, 24);
    CHECK_THAT(r.threshold, Catch::Matchers::WithinAbs(1.05494, 1e-4));
    CHECK(r.holds_for_c == 2);
}

TEST_CASE("superiority threshold rejects the infeasible regime") {
    REQUIRE_THROWS_AS(superiority_threshold(1, 1, 10), ArgumentError);
}

TEST_CASE("superiority threshold approaches 1 as the product grows") {
    double prev = superiority_threshold(2, 4, 4).threshold;
    for (std::size_t e : {8u, 16u, 64u, 256u, 4096u}) {
        const double cur = superiority_threshold(2, e, 4).threshold;
        REQUIRE(cur < prev);
        prev = cur;
    }
    CHECK(prev > 1.0);
    CHECK(prev < 1.001);
}

TEST_CASE("superiority threshold decreases strictly in D, E and tau") {
    const double base = superiority_threshold(2, 10, 24).threshold;
    CHECK(superiority_threshold(3, 10, 24).threshold < base);
    CHECK(superiority_threshold(2, 11, 24).threshold < base);
    CHECK(superiority_threshold(2, 10, 25).threshold < base);
}

TEST_CASE("ib bound matches the closed form") {
    CHECK_THAT(ib_bound(10, 100, 0.001), Catch::Matchers::WithinAbs(0.34657359, 1e-6));
}

TEST_CASE("ib bound decreases in every argument and vanishes with huge noise") {
    const double base = ib_bound(10, 100, 0.001);
    CHECK(ib_bound(20, 100, 0.001) < base);
    CHECK(ib_bound(10, 200, 0.001) < base);
    CHECK(ib_bound(10, 100, 0.002) < base);
    CHECK(base > 0.0);
    CHECK(ib_bound(10, 100, 1e12) < 1e-12);
}

TEST_CASE("seasonal persistence repeats the last block per channel") {
    const auto history = from_rows({{1, 10}, {2, 20}, {3, 30}, {4, 40}});
    const auto forecast = seasonal_persistence_forecast(history, 2, 4);
    CHECK(forecast(0, 0) == 3);
    CHECK(forecast(1, 0) == 4);
    CHECK(forecast(2, 0) == 3);
    CHECK(forecast(0, 1) == 30);
    CHECK(forecast(3, 1) == 40);
}
