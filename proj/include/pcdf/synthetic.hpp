#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "pcdf/rng.hpp"
#include "pcdf/series.hpp"

namespace pcdf {

/// Seeded generators for test and demo data.

/// Channels tiled from random tau-length blocks: every channel is exactly
/// tau-periodic and zero-mean within each block.
inline MultichannelSeries synth_periodic(std::size_t length, std::size_t channels,
                                         std::size_t tau, std::uint64_t seed,
                                         double noise_std = 0.0) {
    Rng rng(seed);
    MultichannelSeries s;
    s.source_id = "synthetic-periodic";
    s.values = Matrix(length, channels);
    for (std::size_t c = 0; c < channels; ++c) {
        s.channel_names.push_back("ch" + std::to_string(c));
        std::vector<double> block(tau);
        double mean = 0.0;
        for (auto& v : block) {
            v = rng.uniform(-1.0, 1.0);
            mean += v;
        }
        mean /= static_cast<double>(tau);
        for (auto& v : block) v -= mean;
        for (std::size_t t = 0; t < length; ++t)
            s.values(t, c) = block[t % tau] + (noise_std > 0.0 ? noise_std * rng.normal() : 0.0);
    }
    return s;
}

/// One latent seasonal signal mixed into every channel with per-channel gain
/// and offset, plus i.i.d. noise. Redundant by construction (rank ~1 plus
/// noise), which is the regime the pipeline targets. positive_gains keeps the
/// channel sum strongly aligned with the latent signal.
inline MultichannelSeries synth_seasonal_mix(std::size_t length, std::size_t channels,
                                             std::size_t tau, std::uint64_t seed,
                                             double noise_std = 0.05,
                                             bool positive_gains = false) {
    Rng rng(seed);
    MultichannelSeries s;
    s.source_id = "synthetic-seasonal-mix";
    s.values = Matrix(length, channels);
    std::vector<double> latent(tau);
    for (std::size_t t = 0; t < tau; ++t) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) /
                             static_cast<double>(tau);
        latent[t] = std::sin(phase) + 0.4 * std::sin(2.0 * phase + 0.7) +
                    0.3 * rng.uniform(-1.0, 1.0);
    }
    std::vector<double> gain(channels), offset(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        gain[c] = rng.uniform(0.5, 1.5) * (positive_gains ? 1.0 : rng.sign());
        offset[c] = 0.1 * rng.normal();
        s.channel_names.push_back("ch" + std::to_string(c));
    }
    for (std::size_t t = 0; t < length; ++t)
        for (std::size_t c = 0; c < channels; ++c)
            s.values(t, c) = gain[c] * latent[t % tau] + offset[c] + noise_std * rng.normal();
    return s;
}

/// Channels spanning exactly `rank` independent factors (no noise); the
/// channel covariance has exactly `rank` nonzero eigenvalues.
inline MultichannelSeries synth_low_rank(std::size_t length, std::size_t channels,
                                         std::size_t rank, std::uint64_t seed) {
    Rng rng(seed);
    MultichannelSeries s;
    s.source_id = "synthetic-rank" + std::to_string(rank);
    s.values = Matrix(length, channels);
    Matrix factors(length, rank);
    for (std::size_t r = 0; r < rank; ++r) {
        // Distinct frequencies keep the factors linearly independent, and a
        // decaying amplitude keeps eigenvalue fractions well separated.
        const double freq = 2.0 * std::numbers::pi * static_cast<double>(r + 2) /
                            static_cast<double>(length);
        const double amp = 1.0 / static_cast<double>(r + 1);
        for (std::size_t t = 0; t < length; ++t)
            factors(t, r) = amp * std::sin(freq * static_cast<double>(t) + 0.3 * static_cast<double>(r));
    }
    Matrix mix(rank, channels);
    for (std::size_t r = 0; r < rank; ++r)
        for (std::size_t c = 0; c < channels; ++c) mix(r, c) = rng.uniform(-1.0, 1.0);
    for (std::size_t t = 0; t < length; ++t)
        for (std::size_t c = 0; c < channels; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rank; ++r) acc += factors(t, r) * mix(r, c);
            s.values(t, c) = acc;
        }
    for (std::size_t c = 0; c < channels; ++c) s.channel_names.push_back("ch" + std::to_string(c));
    return s;
}

/// Bank of sinusoids sharing one period tau (integer cycles per channel).
inline MultichannelSeries synth_sinusoid_bank(std::size_t length, std::size_t channels,
                                              std::size_t tau, std::uint64_t seed) {
    Rng rng(seed);
    MultichannelSeries s;
    s.source_id = "synthetic-sinusoid-bank";
    s.values = Matrix(length, channels);
    for (std::size_t c = 0; c < channels; ++c) {
        s.channel_names.push_back("ch" + std::to_string(c));
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double amp = rng.uniform(0.5, 2.0);
        for (std::size_t t = 0; t < length; ++t)
            s.values(t, c) = amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                                                static_cast<double>(tau) +
                                            phase);
    }
    return s;
}

inline void write_csv(const MultichannelSeries& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV: " + path);
    for (std::size_t c = 0; c < s.channels(); ++c) {
        if (c > 0) out << ',';
        out << s.channel_names[c];
    }
    out << '\n';
    out.precision(17);
    for (std::size_t t = 0; t < s.length(); ++t) {
        for (std::size_t c = 0; c < s.channels(); ++c) {
            if (c > 0) out << ',';
            out << s.values(t, c);
        }
        out << '\n';
    }
}

}  // namespace pcdf
