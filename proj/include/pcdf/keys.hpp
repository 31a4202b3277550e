#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pcdf/errors.hpp"
#include "pcdf/rng.hpp"
#include "pcdf/spectral.hpp"

namespace pcdf {

enum class KeyKind { seasonal_orthogonal, random_normal, random_bernoulli, delta };

inline const char* to_string(KeyKind kind) {
    switch (kind) {
        case KeyKind::seasonal_orthogonal: return "seasonal-orthogonal";
        case KeyKind::random_normal: return "random-normal";
        case KeyKind::random_bernoulli: return "random-bernoulli";
        case KeyKind::delta: return "delta";
    }
    return "unknown";
}

inline KeyKind key_kind_from_string(const std::string& s) {
    if (s == "seasonal-orthogonal" || s == "orthogonal") return KeyKind::seasonal_orthogonal;
    if (s == "random-normal") return KeyKind::random_normal;
    if (s == "random-bernoulli") return KeyKind::random_bernoulli;
    if (s == "delta") return KeyKind::delta;
    throw ArgumentError("unknown key kind: " + s);
}

/// A length-tau encoding key plus its periodic extension. For the
/// seasonal-orthogonal kind the tau x tau circulant of `base` is orthogonal
/// (unit-modulus spectrum), which makes segment-wise decoding exact.
/// Orthogonality lives at segment scale; periodicity at sequence scale comes
/// from tiling, since a tau-periodic length-L circulant with tau < L has rank
/// tau and cannot itself be orthogonal.
struct CircularKey {
    std::vector<double> base;  // length tau
    KeyKind kind = KeyKind::delta;
    double sum_sq = 0.0;  // sum of base[t]^2, as actually computed
    std::uint64_t seed = 0;

    std::size_t tau() const noexcept { return base.size(); }
};

/// Periodic extension k_t = base[t mod tau] of length `length`.
inline std::vector<double> tile_key(std::span<const double> base, std::size_t length) {
    const std::size_t tau = base.size();
    if (tau < 1) throw ArgumentError("tile_key: empty base");
    if (length < tau) throw ArgumentError("tile_key: length must be >= tau");
    std::vector<double> tiled(length);
    for (std::size_t t = 0; t < length; ++t) tiled[t] = base[t % tau];
    return tiled;
}

inline double sum_of_squares(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

/// Builds a key whose circulant is orthogonal: draw random phases, pin the
/// self-conjugate bins to +-1, mirror for Hermitian symmetry, and inverse-
/// transform. Unit-modulus spectrum gives sum_sq == 1 by Parseval.
inline CircularKey make_orthogonal_key(std::size_t tau, std::uint64_t seed) {
    if (tau < 1) throw ArgumentError("make_orthogonal_key: tau must be >= 1");
    Rng rng(seed);
    std::vector<cdouble> spectrum(tau);
    spectrum[0] = cdouble(rng.sign(), 0.0);
    const std::size_t half_open = (tau - 1) / 2;  // free phase bins 1..half_open
    for (std::size_t j = 1; j <= half_open; ++j) {
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        spectrum[j] = cdouble(std::cos(theta), std::sin(theta));
        spectrum[tau - j] = std::conj(spectrum[j]);
    }
    if (tau % 2 == 0 && tau >= 2) spectrum[tau / 2] = cdouble(rng.sign(), 0.0);

    const auto time_domain = idft(spectrum);
    CircularKey key;
    key.kind = KeyKind::seasonal_orthogonal;
    key.seed = seed;
    key.base.resize(tau);
    for (std::size_t t = 0; t < tau; ++t) {
        if (std::abs(time_domain[t].imag()) > 1e-10)
            throw NumericError("make_orthogonal_key: construction left imaginary residue");
        key.base[t] = time_domain[t].real();
    }
    key.sum_sq = sum_of_squares(key.base);
    return key;
}

enum class RandomKeyDist { normal, bernoulli };

/// Baseline binding keys: i.i.d. N(0, 1/tau) entries, or +-1/sqrt(tau).
/// sum_sq is recorded as computed, not assumed to be 1.
inline CircularKey make_random_key(std::size_t tau, RandomKeyDist dist, std::uint64_t seed) {
    if (tau < 1) throw ArgumentError("make_random_key: tau must be >= 1");
    Rng rng(seed);
    CircularKey key;
    key.seed = seed;
    key.base.resize(tau);
    const double scale = 1.0 / std::sqrt(static_cast<double>(tau));
    if (dist == RandomKeyDist::normal) {
        key.kind = KeyKind::random_normal;
        for (auto& v : key.base) v = rng.normal() * scale;
    } else {
        key.kind = KeyKind::random_bernoulli;
        for (auto& v : key.base) v = rng.sign() * scale;
    }
    key.sum_sq = sum_of_squares(key.base);
    return key;
}

/// Identity element: base [1, 0, ..., 0], circulant = I.
inline CircularKey make_delta_key(std::size_t tau) {
    if (tau < 1) throw ArgumentError("make_delta_key: tau must be >= 1");
    CircularKey key;
    key.kind = KeyKind::delta;
    key.base.assign(tau, 0.0);
    key.base[0] = 1.0;
    key.sum_sq = 1.0;
    return key;
}

inline CircularKey make_key(KeyKind kind, std::size_t tau, std::uint64_t seed) {
    switch (kind) {
        case KeyKind::seasonal_orthogonal: return make_orthogonal_key(tau, seed);
        case KeyKind::random_normal: return make_random_key(tau, RandomKeyDist::normal, seed);
        case KeyKind::random_bernoulli:
            return make_random_key(tau, RandomKeyDist::bernoulli, seed);
        case KeyKind::delta: return make_delta_key(tau);
    }
    throw ArgumentError("make_key: unknown kind");
}

}  // namespace pcdf
