#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "pcdf/errors.hpp"
#include "pcdf/series.hpp"

namespace pcdf {

using cdouble = std::complex<double>;

namespace detail {

/// In-place iterative radix-2 Cooley-Tukey. n must be a power of two.
/// sign = -1 forward, +1 inverse (no normalization).
inline void fft_pow2(std::vector<cdouble>& a, int sign) {
    const std::size_t n = a.size();
    if (n < 2) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = static_cast<double>(sign) * 2.0 * std::numbers::pi /
                           static_cast<double>(len);
        const cdouble wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cdouble u = a[i + k];
                const cdouble v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Bluestein chirp-z transform for arbitrary n. The chirp exponent t^2 is
/// reduced mod 2n before the trig call to keep phases accurate for large t.
inline std::vector<cdouble> dft_bluestein(const std::vector<cdouble>& x, int sign) {
    const std::size_t n = x.size();
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<cdouble> chirp(n);
    for (std::size_t t = 0; t < n; ++t) {
        const auto q = static_cast<double>((static_cast<unsigned long long>(t) * t) % (2 * n));
        const double ang = static_cast<double>(sign) * std::numbers::pi * q /
                           static_cast<double>(n);
        chirp[t] = cdouble(std::cos(ang), std::sin(ang));
    }
    std::vector<cdouble> a(m, cdouble(0.0, 0.0));
    std::vector<cdouble> b(m, cdouble(0.0, 0.0));
    for (std::size_t t = 0; t < n; ++t) a[t] = x[t] * chirp[t];
    b[0] = std::conj(chirp[0]);
    for (std::size_t t = 1; t < n; ++t) b[t] = b[m - t] = std::conj(chirp[t]);
    fft_pow2(a, -1);
    fft_pow2(b, -1);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, +1);
    std::vector<cdouble> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = a[j] * chirp[j] / static_cast<double>(m);
    return out;
}

inline std::vector<cdouble> transform(std::vector<cdouble> x, int sign) {
    const std::size_t n = x.size();
    if (n == 0) throw ArgumentError("dft: empty input");
    if ((n & (n - 1)) == 0) {
        fft_pow2(x, sign);
        return x;
    }
    return dft_bluestein(x, sign);
}

}  // namespace detail

/// Forward transform: X_j = sum_t x_t exp(-2*pi*i*j*t/n). No normalization.
inline std::vector<cdouble> dft(std::span<const cdouble> x) {
    return detail::transform(std::vector<cdouble>(x.begin(), x.end()), -1);
}

inline std::vector<cdouble> dft(std::span<const double> x) {
    std::vector<cdouble> cx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) cx[i] = cdouble(x[i], 0.0);
    return detail::transform(std::move(cx), -1);
}

/// Inverse transform with the 1/n factor: idft(dft(x)) == x.
inline std::vector<cdouble> idft(std::span<const cdouble> spectrum) {
    auto out = detail::transform(std::vector<cdouble>(spectrum.begin(), spectrum.end()), +1);
    const double inv = 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v *= inv;
    return out;
}

/// Dominant seasonal period of x: round(L / j*) where j* maximizes |X_j| over
/// bins 1..L/2 (DC excluded; a mean offset is not seasonality). Ties go to the
/// larger bin, i.e. the smaller period. Returns nullopt when the non-DC
/// spectrum carries no energy, so the caller can substitute a default.
inline std::optional<std::size_t> dominant_period(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 4) throw ArgumentError("dominant_period: need at least 4 samples");
    const auto spectrum = dft(x);
    const std::size_t half = n / 2;
    std::size_t best_bin = 0;
    double best_mag = 0.0;
    for (std::size_t j = 1; j <= half; ++j) {
        const double mag = std::abs(spectrum[j]);
        if (mag >= best_mag) {  // >= breaks ties toward larger j
            best_mag = mag;
            best_bin = j;
        }
    }
    if (best_mag < 1e-12) return std::nullopt;
    auto period = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) / static_cast<double>(best_bin)));
    period = std::clamp<std::size_t>(period, 2, std::max<std::size_t>(2, half));
    return period;
}

/// Shared seasonal period for a channel set: lcm of the per-channel periods.
/// capped flags the case where the lcm exceeds L/2; the fallback then picks
/// the candidate period dividing the most channels, largest first.
struct SeasonalProfile {
    std::vector<std::size_t> per_channel_period;
    std::size_t shared_period = 0;
    bool capped = false;
};

inline SeasonalProfile shared_period(std::span<const std::size_t> periods, std::size_t length) {
    if (periods.empty()) throw ArgumentError("shared_period: empty period list");
    for (std::size_t p : periods)
        if (p < 2) throw ArgumentError("shared_period: periods must be >= 2");
    const std::size_t cap = length / 2;

    SeasonalProfile profile;
    profile.per_channel_period.assign(periods.begin(), periods.end());

    std::size_t l = 1;
    bool overflow = false;
    for (std::size_t p : periods) {
        l = std::lcm(l, p);
        if (l > cap) {
            overflow = true;
            break;
        }
    }
    if (!overflow) {
        profile.shared_period = l;
        return profile;
    }

    profile.capped = true;
    std::size_t best = 0, best_count = 0;
    for (std::size_t candidate : periods) {
        if (candidate > cap) continue;
        std::size_t count = 0;
        for (std::size_t p : periods)
            if (candidate % p == 0) ++count;
        if (count > best_count || (count == best_count && candidate > best)) {
            best_count = count;
            best = candidate;
        }
    }
    if (best == 0)
        throw ArgumentError("shared_period: no candidate period fits within half the window");
    profile.shared_period = best;
    return profile;
}

namespace detail {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
/// Adequate for the channel-covariance sizes seen here (C up to a few hundred).
inline std::vector<double> symmetric_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    double frob = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) frob += a[p][q] * a[p][q];
    for (std::size_t sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off <= 1e-26 * std::max(frob, 1e-300)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p];
                    const double akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k];
                    const double aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

}  // namespace detail

/// Channel-redundancy summary from PCA on the C x C channel covariance
/// (channels as variables, timestamps as samples).
struct RedundancyReport {
    std::size_t pcs_at_threshold = 0;
    double threshold = 0.95;
    double top_k_var = 0.0;
    double pc1_var = 0.0;
    double pc2_var = 0.0;
    std::size_t k = 50;
    bool rank_deficient = false;           // fewer samples than channels
    std::vector<double> variance_fractions;  // sorted descending, sums to 1
};

inline RedundancyReport pca_redundancy(const MultichannelSeries& series, double threshold = 0.95,
                                       std::size_t k = 50) {
    const std::size_t c = series.channels();
    const std::size_t n = series.length();
    if (c < 2) throw ArgumentError("pca_redundancy: need at least 2 channels");
    if (threshold <= 0.0 || threshold > 1.0)
        throw ArgumentError("pca_redundancy: threshold must be in (0, 1]");
    if (k < 1) throw ArgumentError("pca_redundancy: k must be >= 1");

    std::vector<double> mean(c, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < c; ++j) mean[j] += series.values(t, j);
    for (double& m : mean) m /= static_cast<double>(n);

    std::vector<std::vector<double>> cov(c, std::vector<double>(c, 0.0));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t i = 0; i < c; ++i) {
            const double di = series.values(t, i) - mean[i];
            for (std::size_t j = i; j < c; ++j)
                cov[i][j] += di * (series.values(t, j) - mean[j]);
        }
    }
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = i; j < c; ++j) {
            cov[i][j] /= static_cast<double>(n);
            cov[j][i] = cov[i][j];
        }

    auto eig = detail::symmetric_eigenvalues(std::move(cov));
    const double scale = std::max(1.0, eig.empty() ? 1.0 : std::abs(eig.front()));
    double total = 0.0;
    for (double& v : eig) {
        if (v < -1e-10 * scale)
            throw NumericError("pca_redundancy: eigensolve produced a negative eigenvalue");
        if (v < 0.0) v = 0.0;  // rounding residue within tolerance
        total += v;
    }

    RedundancyReport report;
    report.threshold = threshold;
    report.k = k;
    report.rank_deficient = n < c;
    report.variance_fractions.resize(c, 0.0);
    if (total > 0.0)
        for (std::size_t i = 0; i < c; ++i) report.variance_fractions[i] = eig[i] / total;

    report.pc1_var = report.variance_fractions[0];
    report.pc2_var = c > 1 ? report.variance_fractions[1] : 0.0;
    double cum = 0.0;
    report.pcs_at_threshold = c;
    bool reached = false;
    for (std::size_t i = 0; i < c; ++i) {
        cum += report.variance_fractions[i];
        if (i < std::min(k, c)) report.top_k_var = cum;
        if (!reached && cum >= threshold) {
            report.pcs_at_threshold = i + 1;
            reached = true;
        }
    }
    return report;
}

/// Pearson correlation. Returns nullopt when either input is constant
/// (the coefficient is undefined there).
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ArgumentError("pearson: length mismatch");
    if (x.size() < 2) throw ArgumentError("pearson: need at least 2 samples");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

/// Block predictability: correlation between the first two tau-length blocks
/// of y. Equals 1 exactly on tau-periodic non-constant signals.
inline std::optional<double> predictability_score(std::span<const double> y, std::size_t tau) {
    if (tau < 1) throw ArgumentError("predictability_score: tau must be >= 1");
    if (y.size() < 2 * tau)
        throw ArgumentError("predictability_score: need at least 2*tau samples");
    return pearson(y.subspan(0, tau), y.subspan(tau, tau));
}

}  // namespace pcdf
