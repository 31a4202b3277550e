#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <vector>

#include "pcdf/errors.hpp"
#include "pcdf/keys.hpp"
#include "pcdf/params.hpp"
#include "pcdf/rng.hpp"
#include "pcdf/series.hpp"

namespace pcdf {

enum class CompressionMode { dense, sparse };

inline const char* to_string(CompressionMode mode) {
    return mode == CompressionMode::dense ? "dense" : "sparse";
}

inline CompressionMode compression_mode_from_string(const std::string& s) {
    if (s == "dense") return CompressionMode::dense;
    if (s == "sparse") return CompressionMode::sparse;
    throw ArgumentError("unknown compression mode: " + s);
}

/// Single-channel compressed representation. Dense mode keeps length L;
/// sparse mode keeps floor(L/tau)*tau (the tail shorter than tau is dropped).
struct CompressedSeries {
    std::vector<double> y;
    CompressionMode mode = CompressionMode::dense;
    std::size_t tau = 0;
    std::optional<NormStats> norm;
};

/// Circular convolution y_t = sum_z x_z * k_{(t-z) mod n}.
inline std::vector<double> encode_channel(std::span<const double> x, std::span<const double> key) {
    const std::size_t n = x.size();
    if (key.size() != n) throw ArgumentError("encode_channel: key length must match input length");
    std::vector<double> y(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t z = 0; z <= t; ++z) acc += x[z] * key[t - z];
        for (std::size_t z = t + 1; z < n; ++z) acc += x[z] * key[n + t - z];
        y[t] = acc;
    }
    return y;
}

/// Circular correlation x_t = sum_z y_z * k_{(z-t) mod n} (the adjoint of
/// encode_channel with the same key).
inline std::vector<double> correlate_channel(std::span<const double> y,
                                             std::span<const double> key) {
    const std::size_t n = y.size();
    if (key.size() != n)
        throw ArgumentError("correlate_channel: key length must match input length");
    std::vector<double> x(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t z = 0; z < t; ++z) acc += y[z] * key[n + z - t];
        for (std::size_t z = t; z < n; ++z) acc += y[z] * key[z - t];
        x[t] = acc;
    }
    return x;
}

namespace detail {

inline const CircularKey& key_for_channel(std::span<const CircularKey> keys, std::size_t channel) {
    return keys.size() == 1 ? keys[0] : keys[channel];
}

inline void check_keys(std::span<const CircularKey> keys, std::size_t channels) {
    if (keys.empty()) throw ArgumentError("compress: no keys supplied");
    if (keys.size() != 1 && keys.size() != channels)
        throw ArgumentError("compress: need one shared key or one key per channel");
    const std::size_t tau = keys[0].tau();
    for (const auto& k : keys)
        if (k.tau() != tau) throw ArgumentError("compress: keys must share one tau");
}

}  // namespace detail

/// Whole-window encoding: each channel is circularly convolved with the
/// length-L tiling of its key, then channels are summed in order.
inline CompressedSeries compress_dense(const Matrix& history,
                                       std::span<const CircularKey> keys) {
    detail::check_keys(keys, history.cols());
    const std::size_t length = history.rows();
    const std::size_t tau = keys[0].tau();
    if (length < tau) throw ArgumentError("compress_dense: window shorter than tau");

    CompressedSeries out;
    out.mode = CompressionMode::dense;
    out.tau = tau;
    out.y.assign(length, 0.0);
    for (std::size_t c = 0; c < history.cols(); ++c) {
        const auto tiled = tile_key(detail::key_for_channel(keys, c).base, length);
        const auto encoded = encode_channel(history.col(c), tiled);
        for (std::size_t t = 0; t < length; ++t) out.y[t] += encoded[t];
    }
    return out;
}

inline CompressedSeries compress_dense(const Matrix& history, const CircularKey& key) {
    return compress_dense(history, std::span<const CircularKey>(&key, 1));
}

/// Segment-wise encoding: each full length-tau fragment is encoded with the
/// length-tau base key, fragments are concatenated in time order, channels
/// summed. The tail shorter than tau is omitted.
inline CompressedSeries compress_sparse(const Matrix& history,
                                        std::span<const CircularKey> keys) {
    detail::check_keys(keys, history.cols());
    const std::size_t length = history.rows();
    const std::size_t tau = keys[0].tau();
    if (tau > length) throw ArgumentError("compress_sparse: tau exceeds window length");
    const std::size_t segments = length / tau;

    CompressedSeries out;
    out.mode = CompressionMode::sparse;
    out.tau = tau;
    out.y.assign(segments * tau, 0.0);
    std::vector<double> fragment(tau);
    for (std::size_t c = 0; c < history.cols(); ++c) {
        const auto& base = detail::key_for_channel(keys, c).base;
        for (std::size_t j = 0; j < segments; ++j) {
            for (std::size_t t = 0; t < tau; ++t) fragment[t] = history(j * tau + t, c);
            const auto encoded = encode_channel(fragment, base);
            for (std::size_t t = 0; t < tau; ++t) out.y[j * tau + t] += encoded[t];
        }
    }
    return out;
}

inline CompressedSeries compress_sparse(const Matrix& history, const CircularKey& key) {
    return compress_sparse(history, std::span<const CircularKey>(&key, 1));
}

inline CompressedSeries compress(const Matrix& history, std::span<const CircularKey> keys,
                                 CompressionMode mode) {
    return mode == CompressionMode::dense ? compress_dense(history, keys)
                                          : compress_sparse(history, keys);
}

/// Inverse binding by circular correlation. Sparse mode treats each length-tau
/// block independently (the orthogonal-circulant transpose); dense mode
/// correlates against the key tiling of the full output length.
inline std::vector<double> decode(std::span<const double> y_hat, const CircularKey& key,
                                  CompressionMode mode) {
    const std::size_t h = y_hat.size();
    const std::size_t tau = key.tau();
    if (mode == CompressionMode::sparse) {
        if (tau == 0 || h % tau != 0)
            throw ArgumentError(
                "decode: sparse mode needs the horizon to be a multiple of tau; adjust H so that "
                "H mod tau == 0");
        std::vector<double> out(h);
        std::vector<double> block(tau);
        for (std::size_t j = 0; j < h / tau; ++j) {
            std::copy_n(y_hat.begin() + static_cast<std::ptrdiff_t>(j * tau), tau, block.begin());
            const auto decoded = correlate_channel(block, key.base);
            std::copy(decoded.begin(), decoded.end(),
                      out.begin() + static_cast<std::ptrdiff_t>(j * tau));
        }
        return out;
    }
    // Dense: tile (or truncate) the base to the decode length.
    std::vector<double> tiled(h);
    for (std::size_t t = 0; t < h; ++t) tiled[t] = key.base[t % tau];
    return correlate_channel(y_hat, tiled);
}

/// Empirical interference residue: what decode(compress(X)) leaves on top of
/// sum_sq * (channel sum). Zero for the sparse path with orthogonal keys.
inline std::vector<double> interference_estimate(const Matrix& history, const CircularKey& key,
                                                 CompressionMode mode = CompressionMode::dense) {
    const auto compressed = compress(history, std::span<const CircularKey>(&key, 1), mode);
    const auto decoded = decode(compressed.y, key, mode);
    std::vector<double> eta(decoded.size());
    for (std::size_t t = 0; t < decoded.size(); ++t) {
        double row_sum = 0.0;
        for (std::size_t c = 0; c < history.cols(); ++c) row_sum += history(t, c);
        eta[t] = decoded[t] - key.sum_sq * row_sum;
    }
    return eta;
}

// ---------------------------------------------------------------------------
// Reconstruction head: X_hat = Dense(Z + Residual(Z)), Z = Copy(x~)/sum_sq.
// Residual is two 1-D convolutions along time with a ReLU between them,
// kernel width 3, same-length zero padding; Dense is a per-timestep C->C
// affine map.
// ---------------------------------------------------------------------------

struct ReconstructionHead {
    std::size_t channels = 0;      // C
    std::size_t hidden = 0;        // F = max(C, 8) by default
    std::size_t kernel = 3;        // w_k
    ParamVec params;               // conv1_w [F x C*k], conv1_b, conv2_w [C x F*k], conv2_b,
                                   // dense_w [C x C], dense_b

    static ReconstructionHead make(std::size_t channels, std::size_t hidden = 0,
                                   std::size_t kernel = 3) {
        if (channels < 1) throw ArgumentError("ReconstructionHead: channels must be >= 1");
        if (kernel % 2 == 0) throw ArgumentError("ReconstructionHead: kernel width must be odd");
        ReconstructionHead head;
        head.channels = channels;
        head.hidden = hidden == 0 ? std::max<std::size_t>(channels, 8) : hidden;
        head.kernel = kernel;
        head.params.add_group("conv1_w", head.hidden, channels * kernel);
        head.params.add_group("conv1_b", head.hidden, 1);
        head.params.add_group("conv2_w", channels, head.hidden * kernel);
        head.params.add_group("conv2_b", channels, 1);
        head.params.add_group("dense_w", channels, channels);
        head.params.add_group("dense_b", channels, 1);
        return head;
    }

    /// Start near the broadcast average: Dense = I/C, residual branch small.
    /// No group starts at an exact zero norm: scale-invariant clipping bounds
    /// steps by ||w||, so an all-zero group could never begin to move.
    void init_training(Rng& rng) {
        auto w1 = params.group("conv1_w");
        const double scale1 = 1.0 / std::sqrt(static_cast<double>(channels * kernel));
        for (auto& v : w1) v = rng.normal() * scale1;
        for (auto& v : params.group("conv1_b")) v = 1e-3 * rng.normal();
        const double scale2 = 0.01 / std::sqrt(static_cast<double>(hidden * kernel));
        for (auto& v : params.group("conv2_w")) v = rng.normal() * scale2;
        for (auto& v : params.group("conv2_b")) v = 1e-3 * rng.normal();
        auto dw = params.group("dense_w");
        std::fill(dw.begin(), dw.end(), 0.0);
        for (std::size_t c = 0; c < channels; ++c)
            dw[c * channels + c] = 1.0 / static_cast<double>(channels);
        for (auto& v : params.group("dense_b")) v = 1e-3 * rng.normal();
    }

    /// Fully random parameters; used by gradient checks.
    void init_random(Rng& rng, double scale = 0.3) {
        for (auto& v : params.values) v = rng.normal() * scale;
    }
};

namespace detail {

/// weights laid out [out][in][k]; same-length zero-padded conv along time.
inline Matrix conv1d(const Matrix& input, std::span<const double> weights,
                     std::span<const double> bias, std::size_t out_ch, std::size_t kernel) {
    const std::size_t steps = input.rows();
    const std::size_t in_ch = input.cols();
    const auto radius = static_cast<std::ptrdiff_t>(kernel / 2);
    Matrix out(steps, out_ch);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t f = 0; f < out_ch; ++f) {
            double acc = bias[f];
            for (std::size_t c = 0; c < in_ch; ++c) {
                for (std::size_t d = 0; d < kernel; ++d) {
                    const auto src = static_cast<std::ptrdiff_t>(t) +
                                     static_cast<std::ptrdiff_t>(d) - radius;
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
                    acc += weights[(f * in_ch + c) * kernel + d] *
                           input(static_cast<std::size_t>(src), c);
                }
            }
            out(t, f) = acc;
        }
    }
    return out;
}

}  // namespace detail

/// Forward pass of the head, keeping the residual-branch output (the loss
/// regulation term needs it).
struct ReconstructOutputs {
    Matrix z;             // broadcast input, H x C
    Matrix residual_out;  // residual branch output, H x C
    Matrix x_hat;         // final reconstruction, H x C
};

inline ReconstructOutputs reconstruct_full(const Matrix& z, const ReconstructionHead& head) {
    if (z.cols() != head.channels)
        throw ArgumentError("reconstruct: channel count does not match head");
    if (!head.params.all_finite()) throw NumericError("reconstruct: non-finite head parameters");

    ReconstructOutputs out;
    out.z = z;
    Matrix hidden = detail::conv1d(z, head.params.group("conv1_w"), head.params.group("conv1_b"),
                                   head.hidden, head.kernel);
    for (auto& v : hidden.storage()) v = v > 0.0 ? v : 0.0;  // ReLU
    out.residual_out = detail::conv1d(hidden, head.params.group("conv2_w"),
                                      head.params.group("conv2_b"), head.channels, head.kernel);

    const auto dense_w = head.params.group("dense_w");
    const auto dense_b = head.params.group("dense_b");
    const std::size_t c_n = head.channels;
    out.x_hat = Matrix(z.rows(), c_n);
    for (std::size_t t = 0; t < z.rows(); ++t) {
        for (std::size_t i = 0; i < c_n; ++i) {
            double acc = dense_b[i];
            for (std::size_t j = 0; j < c_n; ++j)
                acc += dense_w[i * c_n + j] * (z(t, j) + out.residual_out(t, j));
            out.x_hat(t, i) = acc;
        }
    }
    return out;
}

/// Broadcasts the decoded single channel across C channels, scaled by 1/sum_sq.
inline Matrix broadcast_decoded(std::span<const double> x_tilde, std::size_t channels,
                                double sum_sq) {
    if (sum_sq <= 0.0) throw ArgumentError("broadcast_decoded: sum_sq must be positive");
    Matrix z(x_tilde.size(), channels);
    for (std::size_t t = 0; t < x_tilde.size(); ++t)
        for (std::size_t c = 0; c < channels; ++c) z(t, c) = x_tilde[t] / sum_sq;
    return z;
}

/// Reconstruction entry point: scaled broadcast through the head.
inline Matrix reconstruct(std::span<const double> x_tilde, const ReconstructionHead& head,
                          std::size_t channels, double sum_sq) {
    return reconstruct_full(broadcast_decoded(x_tilde, channels, sum_sq), head).x_hat;
}

// ---------------------------------------------------------------------------
// Payload serialization: the simulated edge->cloud wire format. Flat little-
// endian doubles behind a small fixed header.
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> serialize_payload(const CompressedSeries& series) {
    const std::uint32_t n = static_cast<std::uint32_t>(series.y.size());
    std::vector<std::uint8_t> bytes;
    bytes.reserve(2 + 4 + 4 + 17 + 8 * n);
    bytes.push_back(static_cast<std::uint8_t>('P'));
    bytes.push_back(series.mode == CompressionMode::dense ? 0 : 1);
    auto push_u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    auto push_f64 = [&](double v) {
        std::uint64_t u = 0;
        std::memcpy(&u, &v, 8);
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    };
    push_u32(static_cast<std::uint32_t>(series.tau));
    push_u32(n);
    const NormStats stats = series.norm.value_or(NormStats{});
    bytes.push_back(series.norm.has_value() ? 1 : 0);
    push_f64(stats.mean);
    push_f64(stats.std);
    bytes.push_back(stats.flagged ? 1 : 0);
    for (double v : series.y) push_f64(v);
    return bytes;
}

inline CompressedSeries deserialize_payload(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 28 || bytes[0] != static_cast<std::uint8_t>('P'))
        throw DataError("payload: bad magic or truncated header");
    std::size_t pos = 1;
    auto read_u8 = [&]() { return bytes[pos++]; };
    auto read_u32 = [&]() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    };
    auto read_f64 = [&]() {
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
        double v = 0.0;
        std::memcpy(&v, &u, 8);
        return v;
    };
    CompressedSeries series;
    series.mode = read_u8() == 0 ? CompressionMode::dense : CompressionMode::sparse;
    series.tau = read_u32();
    const std::uint32_t n = read_u32();
    const bool has_norm = read_u8() != 0;
    NormStats stats;
    stats.mean = read_f64();
    stats.std = read_f64();
    stats.flagged = read_u8() != 0;
    if (has_norm) series.norm = stats;
    if (bytes.size() != pos + 8u * n) throw DataError("payload: length mismatch");
    series.y.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) series.y[i] = read_f64();
    return series;
}

}  // namespace pcdf
