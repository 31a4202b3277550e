#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcdf/errors.hpp"
#include "pcdf/pipeline.hpp"
#include "pcdf/series.hpp"

namespace pcdf {

/// Mean of squared element-wise differences.
inline double mse(const Matrix& predicted, const Matrix& actual) {
    if (!predicted.same_shape(actual)) throw ArgumentError("mse: shape mismatch");
    if (predicted.rows() * predicted.cols() == 0) throw ArgumentError("mse: empty matrices");
    double acc = 0.0;
    for (std::size_t t = 0; t < predicted.rows(); ++t)
        for (std::size_t c = 0; c < predicted.cols(); ++c) {
            const double d = predicted(t, c) - actual(t, c);
            acc += d * d;
        }
    return acc / static_cast<double>(predicted.rows() * predicted.cols());
}

struct TimingResult {
    double median_s = 0.0;
    double min_s = 0.0;
    double max_s = 0.0;
    std::size_t repetitions = 0;
};

/// Wall-clock timing on the monotonic clock: `warmup` discarded runs, then
/// the median (and min/max) of `repetitions` timed runs.
inline TimingResult time_inference(const std::function<void()>& fn, std::size_t repetitions,
                                   std::size_t warmup = 3) {
    if (repetitions < 1) throw ArgumentError("time_inference: repetitions must be >= 1");
    using clock = std::chrono::steady_clock;
    for (std::size_t i = 0; i < warmup; ++i) fn();
    std::vector<double> samples(repetitions);
    for (std::size_t i = 0; i < repetitions; ++i) {
        const auto t0 = clock::now();
        fn();
        const auto t1 = clock::now();
        samples[i] = std::chrono::duration<double>(t1 - t0).count();
    }
    std::sort(samples.begin(), samples.end());
    TimingResult out;
    out.repetitions = repetitions;
    out.min_s = samples.front();
    out.max_s = samples.back();
    const std::size_t mid = repetitions / 2;
    out.median_s = repetitions % 2 == 1 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
    return out;
}

/// Accuracy-latency production index: the raw product, no normalization.
inline double cdpi(double mse_value, double runtime_s) {
    if (mse_value < 0.0 || runtime_s < 0.0) throw ArgumentError("cdpi: inputs must be >= 0");
    return mse_value * runtime_s;
}

/// One evaluation record. cdpi is always mse * runtime_s.
struct RunReport {
    double mse = 0.0;
    double runtime_s = 0.0;
    double runtime_min_s = 0.0;
    double runtime_max_s = 0.0;
    double cdpi = 0.0;
    std::string config_fingerprint;
    std::size_t payload_bytes = 0;
    std::string mode;

    static RunReport make(double mse_value, const TimingResult& timing,
                          const std::string& fingerprint, std::size_t payload_bytes,
                          const std::string& mode) {
        RunReport r;
        r.mse = mse_value;
        r.runtime_s = timing.median_s;
        r.runtime_min_s = timing.min_s;
        r.runtime_max_s = timing.max_s;
        r.cdpi = pcdf::cdpi(mse_value, timing.median_s);
        r.config_fingerprint = fingerprint;
        r.payload_bytes = payload_bytes;
        r.mode = mode;
        return r;
    }
};

/// Channel-count threshold of the complexity comparison: the compressed
/// pipeline wins once C > DE / (DE - 1 - 1/tau).
struct SuperiorityResult {
    std::size_t depth = 0;        // D
    std::size_t epochs = 0;       // E
    std::size_t tau = 0;
    double threshold = 0.0;
    std::size_t holds_for_c = 0;  // smallest integer C strictly above threshold
};

inline SuperiorityResult superiority_threshold(std::size_t depth, std::size_t epochs,
                                               std::size_t tau) {
    if (depth < 1 || epochs < 1 || tau < 1)
        throw ArgumentError("superiority_threshold: D, E, tau must be >= 1");
    const double de = static_cast<double>(depth) * static_cast<double>(epochs);
    const double denom = de - 1.0 - 1.0 / static_cast<double>(tau);
    if (denom <= 0.0)
        throw ArgumentError(
            "superiority_threshold: infeasible regime, DE must exceed 1 + 1/tau");
    SuperiorityResult out;
    out.depth = depth;
    out.epochs = epochs;
    out.tau = tau;
    out.threshold = de / denom;
    out.holds_for_c = static_cast<std::size_t>(std::floor(out.threshold)) + 1;
    return out;
}

/// Cap on predictive-information loss under compression, in nats:
/// 0.5 * ln(1 + 1/(C*L*sigma^2)).
inline double ib_bound(std::size_t channels, std::size_t length, double sigma_sq) {
    if (channels < 1 || length < 1) throw ArgumentError("ib_bound: C and L must be >= 1");
    if (sigma_sq <= 0.0) throw ArgumentError("ib_bound: sigma^2 must be positive");
    return 0.5 * std::log1p(1.0 / (static_cast<double>(channels) * static_cast<double>(length) *
                                   sigma_sq));
}

/// Per-channel seasonal persistence: repeat each channel's last tau-block.
/// The reference baseline for the end-to-end benefit check.
inline Matrix seasonal_persistence_forecast(const Matrix& history, std::size_t tau,
                                            std::size_t horizon) {
    if (tau < 1 || tau > history.rows())
        throw ArgumentError("seasonal_persistence_forecast: bad tau");
    Matrix out(horizon, history.cols());
    for (std::size_t t = 0; t < horizon; ++t)
        for (std::size_t c = 0; c < history.cols(); ++c)
            out(t, c) = history(history.rows() - tau + (t % tau), c);
    return out;
}

inline double seasonal_persistence_mse(std::span<const WindowPair> windows, std::size_t tau) {
    if (windows.empty()) throw ArgumentError("seasonal_persistence_mse: no windows");
    double acc = 0.0;
    for (const auto& w : windows)
        acc += mse(seasonal_persistence_forecast(w.history, tau, w.future.rows()), w.future);
    return acc / static_cast<double>(windows.size());
}

}  // namespace pcdf
