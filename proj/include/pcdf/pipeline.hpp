#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcdf/codec.hpp"
#include "pcdf/errors.hpp"
#include "pcdf/keys.hpp"
#include "pcdf/predictors.hpp"
#include "pcdf/series.hpp"

namespace pcdf {

/// Pipeline variants. The first is the full framework; the rest are the
/// ablation configurations (random binding key, bare decoder, trained linear
/// encoder and/or decoder in place of the key machinery).
enum class Variant { comp_decomp, rand_decomp, comp_decode, encode_decomp, encode_decode };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::comp_decomp: return "comp-decomp";
        case Variant::rand_decomp: return "rand-decomp";
        case Variant::comp_decode: return "comp-decode";
        case Variant::encode_decomp: return "encode-decomp";
        case Variant::encode_decode: return "encode-decode";
    }
    return "unknown";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "comp-decomp") return Variant::comp_decomp;
    if (s == "rand-decomp") return Variant::rand_decomp;
    if (s == "comp-decode") return Variant::comp_decode;
    if (s == "encode-decomp") return Variant::encode_decomp;
    if (s == "encode-decode") return Variant::encode_decode;
    throw ArgumentError("unknown ablation variant: " + s);
}

inline bool variant_uses_keys(Variant v) {
    return v == Variant::comp_decomp || v == Variant::rand_decomp || v == Variant::comp_decode;
}
inline bool variant_uses_head(Variant v) {
    return v == Variant::comp_decomp || v == Variant::rand_decomp || v == Variant::encode_decomp;
}

enum class NormSource { window, train };

/// Full model state for one compression-prediction-decompression pipeline.
/// Keys are construction-time constants, never trained; theta is the
/// predictor, the head, and (in ablation variants) the linear coders.
struct PipelineModel {
    Variant variant = Variant::comp_decomp;
    CompressionMode mode = CompressionMode::sparse;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::size_t channels = 0;
    std::size_t tau = 1;

    std::vector<CircularKey> keys;  // one shared, or one per channel; empty for encode_*
    PredictorParams predictor;
    ReconstructionHead head;  // meaningful when variant_uses_head()
    ParamVec encoder;         // groups enc_w [C], enc_b [1]
    ParamVec decoder;         // groups dec_w [C], dec_b [C]

    NormSource norm_source = NormSource::window;
    std::optional<NormStats> train_stats;  // required when norm_source == train

    std::size_t compressed_len() const {
        if (!variant_uses_keys(variant) || mode == CompressionMode::dense) return lookback;
        return (lookback / tau) * tau;
    }
    std::size_t horizon_compressed_len() const { return horizon; }
};

struct PipelineInit {
    Variant variant = Variant::comp_decomp;
    CompressionMode mode = CompressionMode::sparse;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::size_t channels = 0;
    std::size_t tau = 1;
    KeyKind key_kind = KeyKind::seasonal_orthogonal;
    std::uint64_t key_seed = 1;
    bool per_channel_keys = false;
    PredictorKind predictor = PredictorKind::linear;
    std::size_t hidden_width = 64;
    std::uint64_t init_seed = 1;
    NormSource norm_source = NormSource::window;
};

inline PipelineModel make_pipeline(const PipelineInit& init) {
    if (init.lookback < 1 || init.horizon < 1 || init.channels < 1 || init.tau < 1)
        throw ArgumentError("make_pipeline: all dimensions must be >= 1");

    PipelineModel m;
    m.variant = init.variant;
    m.mode = init.mode;
    m.lookback = init.lookback;
    m.horizon = init.horizon;
    m.channels = init.channels;
    m.tau = init.tau;
    m.norm_source = init.norm_source;

    if (variant_uses_keys(init.variant)) {
        if (m.mode == CompressionMode::sparse) {
            if (m.tau > m.lookback)
                throw ConfigError("sparse mode: tau exceeds the lookback window");
            if (m.horizon % m.tau != 0)
                throw ConfigError("sparse mode: horizon must be a multiple of tau (H=" +
                                  std::to_string(m.horizon) + ", tau=" + std::to_string(m.tau) +
                                  ")");
        }
        KeyKind kind = init.key_kind;
        if (init.variant == Variant::rand_decomp) kind = KeyKind::random_normal;
        const std::size_t n_keys = init.per_channel_keys ? init.channels : 1;
        for (std::size_t i = 0; i < n_keys; ++i)
            m.keys.push_back(make_key(kind, m.tau, init.key_seed + i));
    } else {
        m.encoder.add_group("enc_w", init.channels, 1);
        m.encoder.add_group("enc_b", 1, 1);
        if (init.variant == Variant::encode_decode) {
            m.decoder.add_group("dec_w", init.channels, 1);
            m.decoder.add_group("dec_b", init.channels, 1);
        }
    }

    Rng rng(init.init_seed);
    m.predictor = PredictorParams::make(init.predictor, m.compressed_len(),
                                        m.horizon_compressed_len(), init.hidden_width, m.tau);
    m.predictor.init_random(rng);
    if (variant_uses_head(init.variant)) {
        m.head = ReconstructionHead::make(init.channels);
        m.head.init_training(rng);
    }
    if (!variant_uses_keys(init.variant)) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(init.channels));
        for (auto& v : m.encoder.group("enc_w")) v = rng.normal() * scale;
        m.encoder.group("enc_b")[0] = 1e-3 * rng.normal();
        if (init.variant == Variant::encode_decode) {
            for (auto& v : m.decoder.group("dec_w")) v = 1.0 + 0.1 * rng.normal();
            for (auto& v : m.decoder.group("dec_b")) v = 1e-3 * rng.normal();
        }
    }
    return m;
}

/// Gradient of the composite loss with respect to every trainable block.
struct PipelineGrad {
    ParamVec predictor;
    ParamVec head;
    ParamVec encoder;
    ParamVec decoder;
};

namespace detail {

inline ParamVec zeros_like(const ParamVec& p) {
    ParamVec z;
    z.groups = p.groups;
    z.values.assign(p.values.size(), 0.0);
    return z;
}

/// Windows shorter than tau cannot use the public compress_dense; the phi
/// terms may need to encode a short future block, so tiling here truncates.
inline std::vector<double> encode_window(const Matrix& block, std::span<const CircularKey> keys,
                                         CompressionMode mode) {
    const std::size_t len = block.rows();
    const std::size_t tau = keys[0].tau();
    if (mode == CompressionMode::sparse) {
        return compress_sparse(block, keys).y;
    }
    std::vector<double> y(len, 0.0);
    for (std::size_t c = 0; c < block.cols(); ++c) {
        const auto& base = key_for_channel(keys, c).base;
        std::vector<double> tiled(len);
        for (std::size_t t = 0; t < len; ++t) tiled[t] = base[t % tau];
        const auto enc = encode_channel(block.col(c), tiled);
        for (std::size_t t = 0; t < len; ++t) y[t] += enc[t];
    }
    return y;
}

inline std::vector<double> apply_linear_encoder(const Matrix& block, const ParamVec& encoder) {
    const auto w = encoder.group("enc_w");
    const double b = encoder.group("enc_b")[0];
    std::vector<double> y(block.rows());
    for (std::size_t t = 0; t < block.rows(); ++t) {
        double acc = b;
        for (std::size_t c = 0; c < block.cols(); ++c) acc += w[c] * block(t, c);
        y[t] = acc;
    }
    return y;
}

/// out(t,f) = bias[f] + sum_{c,d} w[(f*in+c)*k + d] * in(t+d-r, c), zero padded.
inline void conv1d_backward(const Matrix& input, std::span<const double> weights,
                            const Matrix& d_out, std::size_t kernel, std::span<double> g_w,
                            std::span<double> g_b, Matrix& d_input) {
    const std::size_t steps = input.rows();
    const std::size_t in_ch = input.cols();
    const std::size_t out_ch = d_out.cols();
    const auto radius = static_cast<std::ptrdiff_t>(kernel / 2);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t f = 0; f < out_ch; ++f) {
            const double g = d_out(t, f);
            if (g == 0.0) continue;
            g_b[f] += g;
            for (std::size_t c = 0; c < in_ch; ++c) {
                for (std::size_t d = 0; d < kernel; ++d) {
                    const auto src = static_cast<std::ptrdiff_t>(t) +
                                     static_cast<std::ptrdiff_t>(d) - radius;
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps)) continue;
                    const std::size_t s = static_cast<std::size_t>(src);
                    g_w[(f * in_ch + c) * kernel + d] += g * input(s, c);
                    d_input(s, c) += g * weights[(f * in_ch + c) * kernel + d];
                }
            }
        }
    }
}

struct HeadTrace {
    Matrix hidden_pre;
    Matrix hidden_post;
    Matrix residual_out;
    Matrix u;  // z + residual_out
};

inline HeadTrace head_forward(const Matrix& z, const ReconstructionHead& head, Matrix& x_hat) {
    HeadTrace trace;
    trace.hidden_pre = conv1d(z, head.params.group("conv1_w"), head.params.group("conv1_b"),
                              head.hidden, head.kernel);
    trace.hidden_post = trace.hidden_pre;
    for (auto& v : trace.hidden_post.storage()) v = v > 0.0 ? v : 0.0;
    trace.residual_out = conv1d(trace.hidden_post, head.params.group("conv2_w"),
                                head.params.group("conv2_b"), head.channels, head.kernel);
    trace.u = z;
    for (std::size_t i = 0; i < trace.u.storage().size(); ++i)
        trace.u.storage()[i] += trace.residual_out.storage()[i];

    const auto dense_w = head.params.group("dense_w");
    const auto dense_b = head.params.group("dense_b");
    const std::size_t c_n = head.channels;
    x_hat = Matrix(z.rows(), c_n);
    for (std::size_t t = 0; t < z.rows(); ++t)
        for (std::size_t i = 0; i < c_n; ++i) {
            double acc = dense_b[i];
            for (std::size_t j = 0; j < c_n; ++j) acc += dense_w[i * c_n + j] * trace.u(t, j);
            x_hat(t, i) = acc;
        }
    return trace;
}

}  // namespace detail

/// Every intermediate of one window's forward pass; the backward pass and the
/// loss both read from here.
struct PipelineTrace {
    std::vector<double> y_raw;     // compressed/encoded history
    NormStats stats;
    std::vector<double> y_norm;    // predictor input
    PredictTrace predict;
    std::vector<double> y_hat;     // denormalized prediction
    std::vector<double> x_tilde;   // decoded single channel (broadcast variants)
    Matrix z;                      // head input (H x C)
    detail::HeadTrace head;
    Matrix residual_out;           // zero matrix for head-less variants
    Matrix x_hat;
    std::vector<double> y_fut_raw;  // compressed/encoded future (phi term)
    std::vector<double> z_fut;      // normalized future compression
    double phi_y = 0.0;
    double phi_y_hat = 0.0;
    LossBreakdown loss;
};

inline PipelineTrace pipeline_forward(const PipelineModel& model, const WindowPair& window,
                                      double alpha, double beta) {
    if (window.history.rows() != model.lookback || window.history.cols() != model.channels)
        throw ArgumentError("pipeline_forward: history shape mismatch");
    if (window.future.rows() != model.horizon || window.future.cols() != model.channels)
        throw ArgumentError("pipeline_forward: future shape mismatch");

    PipelineTrace tr;
    const bool keyed = variant_uses_keys(model.variant);

    tr.y_raw = keyed ? detail::encode_window(window.history, model.keys, model.mode)
                     : detail::apply_linear_encoder(window.history, model.encoder);

    if (model.norm_source == NormSource::train) {
        if (!model.train_stats)
            throw ArgumentError("pipeline_forward: norm_source=train without train_stats");
        tr.stats = *model.train_stats;
        tr.y_norm.resize(tr.y_raw.size());
        for (std::size_t i = 0; i < tr.y_raw.size(); ++i)
            tr.y_norm[i] = (tr.y_raw[i] - tr.stats.mean) / tr.stats.std;
    } else {
        tr.y_norm = normalize(tr.y_raw, tr.stats);
    }

    tr.predict = predict_traced(model.predictor, tr.y_norm);
    tr.y_hat = denormalize(tr.predict.output, tr.stats);

    const std::size_t h = model.horizon;
    const std::size_t c_n = model.channels;
    switch (model.variant) {
        case Variant::comp_decomp:
        case Variant::rand_decomp:
        case Variant::comp_decode: {
            if (model.keys.size() == 1) {
                tr.x_tilde = decode(tr.y_hat, model.keys[0], model.mode);
                tr.z = broadcast_decoded(tr.x_tilde, c_n, model.keys[0].sum_sq);
            } else {
                tr.z = Matrix(h, c_n);
                for (std::size_t c = 0; c < c_n; ++c) {
                    const auto xc = decode(tr.y_hat, model.keys[c], model.mode);
                    for (std::size_t t = 0; t < h; ++t)
                        tr.z(t, c) = xc[t] / model.keys[c].sum_sq;
                }
            }
            break;
        }
        case Variant::encode_decomp: {
            tr.x_tilde = tr.y_hat;
            tr.z = broadcast_decoded(tr.x_tilde, c_n, 1.0);
            break;
        }
        case Variant::encode_decode: {
            const auto dw = model.decoder.group("dec_w");
            const auto db = model.decoder.group("dec_b");
            tr.x_hat = Matrix(h, c_n);
            for (std::size_t t = 0; t < h; ++t)
                for (std::size_t c = 0; c < c_n; ++c)
                    tr.x_hat(t, c) = dw[c] * tr.y_hat[t] + db[c];
            break;
        }
    }

    if (variant_uses_head(model.variant)) {
        tr.head = detail::head_forward(tr.z, model.head, tr.x_hat);
        tr.residual_out = tr.head.residual_out;
    } else {
        if (model.variant == Variant::comp_decode) tr.x_hat = tr.z;
        tr.residual_out = Matrix(h, c_n, 0.0);
    }

    tr.y_fut_raw = keyed ? detail::encode_window(window.future, model.keys, model.mode)
                         : detail::apply_linear_encoder(window.future, model.encoder);
    tr.z_fut.resize(tr.y_fut_raw.size());
    double phi_y = 0.0;
    for (std::size_t i = 0; i < tr.y_fut_raw.size(); ++i) {
        tr.z_fut[i] = (tr.y_fut_raw[i] - tr.stats.mean) / tr.stats.std;
        phi_y += tr.z_fut[i];
    }
    tr.phi_y = tr.z_fut.empty() ? 0.0 : phi_y / static_cast<double>(tr.z_fut.size());
    double phi_y_hat = 0.0;
    for (double v : tr.predict.output) phi_y_hat += v;
    tr.phi_y_hat = phi_y_hat / static_cast<double>(tr.predict.output.size());

    tr.loss = loss(tr.x_hat, window.future, tr.residual_out, tr.phi_y, tr.phi_y_hat, alpha, beta);
    return tr;
}

/// Prediction-only forward: the H x C reconstruction for a history block.
inline Matrix pipeline_predict(const PipelineModel& model, const Matrix& history) {
    WindowPair w;
    w.history = history;
    w.future = Matrix(model.horizon, model.channels, 0.0);
    return pipeline_forward(model, w, 0.0, 0.0).x_hat;
}

/// Reverse-mode gradient of the composite loss for one window. Keys and
/// compression are fixed linear maps, so their adjoints are exact; ReLU and
/// |.| take subgradient 0 at 0.
inline PipelineGrad pipeline_grad(const PipelineModel& model, const WindowPair& window,
                                  double alpha, double beta, const PipelineTrace& tr) {
    PipelineGrad grad;
    grad.predictor = detail::zeros_like(model.predictor.params);
    grad.head = detail::zeros_like(model.head.params);
    grad.encoder = detail::zeros_like(model.encoder);
    grad.decoder = detail::zeros_like(model.decoder);

    const std::size_t h = model.horizon;
    const std::size_t c_n = model.channels;
    const auto count = static_cast<double>(h * c_n);
    const bool keyed = variant_uses_keys(model.variant);

    // Loss-level adjoints.
    double abs_residual = 0.0, sum_pred = 0.0;
    for (std::size_t t = 0; t < h; ++t)
        for (std::size_t c = 0; c < c_n; ++c) {
            abs_residual += std::abs(tr.residual_out(t, c));
            sum_pred += tr.x_hat(t, c);
        }
    const double reg_diff = abs_residual - sum_pred;
    const double lat_diff = tr.phi_y - tr.phi_y_hat;

    Matrix d_x_hat(h, c_n);
    for (std::size_t t = 0; t < h; ++t)
        for (std::size_t c = 0; c < c_n; ++c)
            d_x_hat(t, c) = 2.0 * (tr.x_hat(t, c) - window.future(t, c)) / count -
                            alpha * 2.0 * reg_diff;

    Matrix d_residual_direct(h, c_n, 0.0);
    if (variant_uses_head(model.variant)) {
        for (std::size_t t = 0; t < h; ++t)
            for (std::size_t c = 0; c < c_n; ++c) {
                const double r = tr.residual_out(t, c);
                const double s = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
                d_residual_direct(t, c) = alpha * 2.0 * reg_diff * s;
            }
    }

    // Decompression backward -> d_y_hat.
    std::vector<double> d_y_hat(tr.y_hat.size(), 0.0);
    Matrix d_z(h, c_n, 0.0);

    if (variant_uses_head(model.variant)) {
        const auto dense_w = model.head.params.group("dense_w");
        auto g_dense_w = grad.head.group("dense_w");
        auto g_dense_b = grad.head.group("dense_b");
        Matrix d_u(h, c_n, 0.0);
        for (std::size_t t = 0; t < h; ++t)
            for (std::size_t i = 0; i < c_n; ++i) {
                const double g = d_x_hat(t, i);
                g_dense_b[i] += g;
                for (std::size_t j = 0; j < c_n; ++j) {
                    g_dense_w[i * c_n + j] += g * tr.head.u(t, j);
                    d_u(t, j) += g * dense_w[i * c_n + j];
                }
            }
        Matrix d_res = d_u;
        for (std::size_t i = 0; i < d_res.storage().size(); ++i)
            d_res.storage()[i] += d_residual_direct.storage()[i];
        d_z = d_u;

        Matrix d_hidden_post(h, model.head.hidden, 0.0);
        detail::conv1d_backward(tr.head.hidden_post, model.head.params.group("conv2_w"), d_res,
                                model.head.kernel, grad.head.group("conv2_w"),
                                grad.head.group("conv2_b"), d_hidden_post);
        Matrix d_hidden_pre = d_hidden_post;
        for (std::size_t i = 0; i < d_hidden_pre.storage().size(); ++i)
            if (tr.head.hidden_pre.storage()[i] <= 0.0) d_hidden_pre.storage()[i] = 0.0;
        detail::conv1d_backward(tr.z, model.head.params.group("conv1_w"), d_hidden_pre,
                                model.head.kernel, grad.head.group("conv1_w"),
                                grad.head.group("conv1_b"), d_z);
    } else if (model.variant == Variant::comp_decode) {
        d_z = d_x_hat;
    }

    switch (model.variant) {
        case Variant::comp_decomp:
        case Variant::rand_decomp:
        case Variant::comp_decode: {
            if (model.keys.size() == 1) {
                const auto& key = model.keys[0];
                std::vector<double> d_x_tilde(h, 0.0);
                for (std::size_t t = 0; t < h; ++t) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < c_n; ++c) acc += d_z(t, c);
                    d_x_tilde[t] = acc / key.sum_sq;
                }
                // Adjoint of circular correlation is circular convolution.
                if (model.mode == CompressionMode::sparse) {
                    const std::size_t tau = key.tau();
                    std::vector<double> block(tau);
                    for (std::size_t j = 0; j < h / tau; ++j) {
                        std::copy_n(d_x_tilde.begin() + static_cast<std::ptrdiff_t>(j * tau), tau,
                                    block.begin());
                        const auto back = encode_channel(block, key.base);
                        for (std::size_t t = 0; t < tau; ++t) d_y_hat[j * tau + t] += back[t];
                    }
                } else {
                    std::vector<double> tiled(h);
                    for (std::size_t t = 0; t < h; ++t) tiled[t] = key.base[t % key.tau()];
                    const auto back = encode_channel(d_x_tilde, tiled);
                    for (std::size_t t = 0; t < h; ++t) d_y_hat[t] += back[t];
                }
            } else {
                for (std::size_t c = 0; c < c_n; ++c) {
                    const auto& key = model.keys[c];
                    std::vector<double> d_xc(h);
                    for (std::size_t t = 0; t < h; ++t) d_xc[t] = d_z(t, c) / key.sum_sq;
                    if (model.mode == CompressionMode::sparse) {
                        const std::size_t tau = key.tau();
                        std::vector<double> block(tau);
                        for (std::size_t j = 0; j < h / tau; ++j) {
                            std::copy_n(d_xc.begin() + static_cast<std::ptrdiff_t>(j * tau), tau,
                                        block.begin());
                            const auto back = encode_channel(block, key.base);
                            for (std::size_t t = 0; t < tau; ++t) d_y_hat[j * tau + t] += back[t];
                        }
                    } else {
                        std::vector<double> tiled(h);
                        for (std::size_t t = 0; t < h; ++t) tiled[t] = key.base[t % key.tau()];
                        const auto back = encode_channel(d_xc, tiled);
                        for (std::size_t t = 0; t < h; ++t) d_y_hat[t] += back[t];
                    }
                }
            }
            break;
        }
        case Variant::encode_decomp: {
            for (std::size_t t = 0; t < h; ++t) {
                double acc = 0.0;
                for (std::size_t c = 0; c < c_n; ++c) acc += d_z(t, c);
                d_y_hat[t] += acc;
            }
            break;
        }
        case Variant::encode_decode: {
            const auto dw = model.decoder.group("dec_w");
            auto g_dw = grad.decoder.group("dec_w");
            auto g_db = grad.decoder.group("dec_b");
            for (std::size_t t = 0; t < h; ++t)
                for (std::size_t c = 0; c < c_n; ++c) {
                    const double g = d_x_hat(t, c);
                    g_dw[c] += g * tr.y_hat[t];
                    g_db[c] += g;
                    d_y_hat[t] += g * dw[c];
                }
            break;
        }
    }

    // Latent term adjoints.
    const auto out_n = static_cast<double>(tr.predict.output.size());
    std::vector<double> d_p_out(tr.predict.output.size(), 0.0);
    for (std::size_t i = 0; i < d_p_out.size(); ++i)
        d_p_out[i] = -beta * 2.0 * lat_diff / out_n;

    // Stats adjoints are only needed when the encoder is trainable (the stats
    // then depend on theta through the window's encoded history).
    const bool stats_trainable = !keyed && model.norm_source == NormSource::window;
    double d_mean = 0.0, d_std = 0.0;

    // denormalize: y_hat = p_out*std + mean
    for (std::size_t i = 0; i < d_y_hat.size(); ++i) {
        d_p_out[i] += d_y_hat[i] * tr.stats.std;
        if (stats_trainable) {
            d_mean += d_y_hat[i];
            d_std += d_y_hat[i] * tr.predict.output[i];
        }
    }

    // phi_Y = mean(z_fut), z_fut = (y_fut - mean)/std
    const auto fut_n = static_cast<double>(tr.z_fut.size());
    std::vector<double> d_y_fut(tr.z_fut.size(), 0.0);
    if (beta != 0.0) {
        const double d_phi_y = beta * 2.0 * lat_diff;
        for (std::size_t i = 0; i < tr.z_fut.size(); ++i) {
            const double d_zf = d_phi_y / fut_n;
            d_y_fut[i] = d_zf / tr.stats.std;
            if (stats_trainable) {
                d_mean += d_zf * (-1.0 / tr.stats.std);
                d_std += d_zf * (-tr.z_fut[i] / tr.stats.std);
            }
        }
    }

    // Predictor backward.
    auto d_y_norm = predict_backward(model.predictor, tr.y_norm, tr.predict, d_p_out,
                                     grad.predictor);

    if (!keyed) {
        // Normalization backward (window stats): y_norm = (y_raw - mu)/sigma.
        std::vector<double> d_y_raw(tr.y_raw.size(), 0.0);
        const auto n = static_cast<double>(tr.y_raw.size());
        if (stats_trainable) {
            for (std::size_t i = 0; i < d_y_norm.size(); ++i) {
                d_mean += d_y_norm[i] * (-1.0 / tr.stats.std);
                d_std += d_y_norm[i] * (-tr.y_norm[i] / tr.stats.std);
            }
            for (std::size_t i = 0; i < d_y_raw.size(); ++i) {
                double g = d_y_norm[i] / tr.stats.std + d_mean / n;
                if (!tr.stats.flagged) g += d_std * tr.y_norm[i] / n;  // d sigma / d y_i
                d_y_raw[i] = g;
            }
        } else {
            for (std::size_t i = 0; i < d_y_raw.size(); ++i)
                d_y_raw[i] = d_y_norm[i] / tr.stats.std;
        }

        auto g_w = grad.encoder.group("enc_w");
        auto g_b = grad.encoder.group("enc_b");
        for (std::size_t t = 0; t < model.lookback; ++t) {
            const double g = d_y_raw[t];
            if (g == 0.0) continue;
            g_b[0] += g;
            for (std::size_t c = 0; c < c_n; ++c) g_w[c] += g * window.history(t, c);
        }
        for (std::size_t t = 0; t < d_y_fut.size(); ++t) {
            const double g = d_y_fut[t];
            if (g == 0.0) continue;
            g_b[0] += g;
            for (std::size_t c = 0; c < c_n; ++c) g_w[c] += g * window.future(t, c);
        }
    }
    return grad;
}

inline PipelineGrad pipeline_grad(const PipelineModel& model, const WindowPair& window,
                                  double alpha, double beta) {
    const auto tr = pipeline_forward(model, window, alpha, beta);
    if (!std::isfinite(tr.loss.total)) {
        std::string term = !std::isfinite(tr.loss.prediction) ? "prediction"
                           : !std::isfinite(tr.loss.regulation) ? "regulation"
                                                                : "latent";
        throw NumericError("pipeline_grad: non-finite " + term + " loss term");
    }
    return pipeline_grad(model, window, alpha, beta, tr);
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 100;
    double lr = 1e-3;
    double alpha = 0.1;
    double beta = 0.1;
    double clip_alpha = 1.0;
    std::uint64_t seed = 1;
    std::size_t batch = 32;

    void validate() const {
        if (lr <= 0.0) throw ConfigError("train: lr must be positive");
        if (alpha < 0.0 || beta < 0.0) throw ConfigError("train: alpha/beta must be >= 0");
        if (clip_alpha <= 0.0) throw ConfigError("train: clip_alpha must be positive");
        if (batch < 1) throw ConfigError("train: batch must be >= 1");
    }
};

struct TrainResult {
    std::vector<LossBreakdown> history;  // per-epoch mean over windows
};

/// Thrown when the loss goes non-finite; carries the last finite history.
class TrainDivergence : public NumericError {
public:
    TrainDivergence(std::size_t epoch, std::vector<LossBreakdown> history)
        : NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch)),
          epoch_(epoch),
          history_(std::move(history)) {}
    std::size_t epoch() const noexcept { return epoch_; }
    const std::vector<LossBreakdown>& history() const noexcept { return history_; }

private:
    std::size_t epoch_;
    std::vector<LossBreakdown> history_;
};

namespace detail {

inline std::vector<ParamVec*> trainable_blocks(PipelineModel& model) {
    std::vector<ParamVec*> blocks;
    if (!variant_uses_keys(model.variant)) blocks.push_back(&model.encoder);
    if (model.predictor.params.size() > 0) blocks.push_back(&model.predictor.params);
    if (variant_uses_head(model.variant)) blocks.push_back(&model.head.params);
    if (model.variant == Variant::encode_decode) blocks.push_back(&model.decoder);
    return blocks;
}

inline std::vector<ParamVec*> grad_blocks(PipelineModel& model, PipelineGrad& grad) {
    std::vector<ParamVec*> blocks;
    if (!variant_uses_keys(model.variant)) blocks.push_back(&grad.encoder);
    if (model.predictor.params.size() > 0) blocks.push_back(&grad.predictor);
    if (variant_uses_head(model.variant)) blocks.push_back(&grad.head);
    if (model.variant == Variant::encode_decode) blocks.push_back(&grad.decoder);
    return blocks;
}

}  // namespace detail

/// Mini-batch gradient descent with per-group scale-invariant clipping.
/// Window order is reshuffled each epoch from the config seed; accumulation
/// order within a batch is fixed, so runs are bit-reproducible.
inline TrainResult train(PipelineModel& model, std::span<const WindowPair> data,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw ArgumentError("train: no training windows");
    if (model.norm_source == NormSource::train && !model.train_stats) {
        // Global stats over the training split's compressed windows.
        if (!variant_uses_keys(model.variant))
            throw ConfigError("norm_source=train requires a fixed-key variant");
        std::vector<double> all;
        for (const auto& w : data) {
            const auto y = detail::encode_window(w.history, model.keys, model.mode);
            all.insert(all.end(), y.begin(), y.end());
        }
        NormStats stats;
        normalize(all, stats);
        model.train_stats = stats;
    }

    TrainResult result;
    Rng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        LossBreakdown epoch_loss;
        epoch_loss.alpha = cfg.alpha;
        epoch_loss.beta = cfg.beta;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch);
            PipelineGrad batch_grad;
            batch_grad.predictor = detail::zeros_like(model.predictor.params);
            batch_grad.head = detail::zeros_like(model.head.params);
            batch_grad.encoder = detail::zeros_like(model.encoder);
            batch_grad.decoder = detail::zeros_like(model.decoder);

            for (std::size_t i = start; i < stop; ++i) {
                const auto& window = data[order[i]];
                const auto tr = pipeline_forward(model, window, cfg.alpha, cfg.beta);
                if (!std::isfinite(tr.loss.total))
                    throw TrainDivergence(epoch, std::move(result.history));
                epoch_loss.prediction += tr.loss.prediction;
                epoch_loss.regulation += tr.loss.regulation;
                epoch_loss.latent += tr.loss.latent;
                epoch_loss.total += tr.loss.total;
                const auto g = pipeline_grad(model, window, cfg.alpha, cfg.beta, tr);
                auto add = [](ParamVec& acc, const ParamVec& inc) {
                    for (std::size_t k = 0; k < acc.values.size(); ++k)
                        acc.values[k] += inc.values[k];
                };
                add(batch_grad.predictor, g.predictor);
                add(batch_grad.head, g.head);
                add(batch_grad.encoder, g.encoder);
                add(batch_grad.decoder, g.decoder);
            }

            const double inv = 1.0 / static_cast<double>(stop - start);
            auto model_blocks = detail::trainable_blocks(model);
            auto gradient_blocks = detail::grad_blocks(model, batch_grad);
            for (std::size_t b = 0; b < model_blocks.size(); ++b) {
                ParamVec& params = *model_blocks[b];
                ParamVec& grads = *gradient_blocks[b];
                for (auto& v : grads.values) v *= inv;
                for (std::size_t gi = 0; gi < params.groups.size(); ++gi) {
                    clip_gradient_inplace(grads.group(gi), params.group(gi), cfg.clip_alpha);
                    auto p = params.group(gi);
                    auto g = grads.group(gi);
                    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.lr * g[k];
                }
                if (!params.all_finite()) throw TrainDivergence(epoch, std::move(result.history));
            }
        }

        const double inv_n = 1.0 / static_cast<double>(order.size());
        epoch_loss.prediction *= inv_n;
        epoch_loss.regulation *= inv_n;
        epoch_loss.latent *= inv_n;
        epoch_loss.total *= inv_n;
        result.history.push_back(epoch_loss);
    }
    return result;
}

/// Mean prediction MSE of the model over a window set (evaluation path).
inline double evaluate_mse(const PipelineModel& model, std::span<const WindowPair> windows) {
    if (windows.empty()) throw ArgumentError("evaluate_mse: no windows");
    double total = 0.0;
    for (const auto& w : windows) {
        const auto x_hat = pipeline_predict(model, w.history);
        double sq = 0.0;
        for (std::size_t t = 0; t < x_hat.rows(); ++t)
            for (std::size_t c = 0; c < x_hat.cols(); ++c) {
                const double d = x_hat(t, c) - w.future(t, c);
                sq += d * d;
            }
        total += sq / static_cast<double>(x_hat.rows() * x_hat.cols());
    }
    return total / static_cast<double>(windows.size());
}

}  // namespace pcdf
