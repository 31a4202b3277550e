#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pcdf/errors.hpp"

namespace pcdf {

/// Minimal dense row-major matrix of doubles. Rows are timestamps, columns
/// are channels throughout this library.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> col(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    /// Contiguous sub-block of whole rows [r0, r0+n).
    Matrix rows_slice(std::size_t r0, std::size_t n) const {
        Matrix out(n, cols_);
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(r0 * cols_), n * cols_,
                    out.data_.begin());
        return out;
    }

    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Raw multichannel input: L_total timestamps by C named channels.
struct MultichannelSeries {
    Matrix values;
    std::vector<std::string> channel_names;
    std::string source_id;

    std::size_t length() const noexcept { return values.rows(); }
    std::size_t channels() const noexcept { return values.cols(); }
};

/// One supervised example: `history` is the lookback block ending at t_index,
/// `future` is the horizon block starting there. The two are contiguous,
/// non-overlapping slices of the parent series.
struct WindowPair {
    Matrix history;  // L x C
    Matrix future;   // H x C
    std::size_t t_index = 0;
};

enum class IngestionPolicy { reject, forward_fill };

/// Mean/std recorded by normalize() so the transform can be inverted exactly.
/// `flagged` marks near-constant inputs whose std was floored.
struct NormStats {
    double mean = 0.0;
    double std = 1.0;
    bool flagged = false;

    static constexpr double k_eps_std = 1e-8;
    static constexpr const char* k_applied_to = "compressed-series";
};

namespace detail {

inline bool parse_double(std::string_view field, double& out) {
    const char* first = field.data();
    const char* last = field.data() + field.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r'))
        --last;
    if (first == last) return false;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace detail

/// Loads a CSV whose first row names the channels and whose remaining rows
/// each hold one timestamp of C numeric fields. Under the reject policy any
/// non-finite field is an error; under forward_fill it is replaced by the
/// last finite value seen in the same channel.
inline MultichannelSeries load_csv(const std::string& path,
                                   IngestionPolicy policy = IngestionPolicy::reject) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path);

    std::string line;
    if (!std::getline(in, line) || detail::trim(line).empty())
        throw DataError(path + ": empty file or missing header row");

    MultichannelSeries series;
    series.source_id = path;
    for (std::string_view field : detail::split_fields(line))
        series.channel_names.push_back(detail::trim(field));
    const std::size_t c = series.channel_names.size();
    if (c < 1) throw DataError(path + ": header names no channels");

    std::vector<double> flat;
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++data_row;
        const auto fields = detail::split_fields(line);
        if (fields.size() != c) {
            std::ostringstream msg;
            msg << path << ": row " << data_row << " has " << fields.size() << " fields, expected "
                << c;
            throw DataError(msg.str());
        }
        for (std::size_t j = 0; j < c; ++j) {
            double v = 0.0;
            if (!detail::parse_double(fields[j], v)) {
                std::ostringstream msg;
                msg << path << ": row " << data_row << ", channel '" << series.channel_names[j]
                    << "': unparseable field '" << detail::trim(fields[j]) << "'";
                throw DataError(msg.str());
            }
            if (!std::isfinite(v)) {
                if (policy == IngestionPolicy::reject) {
                    std::ostringstream msg;
                    msg << path << ": row " << data_row << ", channel '"
                        << series.channel_names[j] << "': non-finite value";
                    throw DataError(msg.str());
                }
                // forward_fill: take the previous row's value in this channel,
                // which sits exactly c entries back from the write position.
                if (flat.size() < c) {
                    std::ostringstream msg;
                    msg << path << ": row " << data_row << ", channel '"
                        << series.channel_names[j]
                        << "': non-finite value with nothing to forward-fill from";
                    throw DataError(msg.str());
                }
                v = flat[flat.size() - c];
            }
            flat.push_back(v);
        }
    }
    if (data_row < 2) throw DataError(path + ": need at least 2 data rows, got " +
                                      std::to_string(data_row));

    series.values = Matrix(data_row, c);
    series.values.storage() = std::move(flat);
    return series;
}

/// Sliding lookback/horizon windows at t = L, L+stride, ...
/// Emits floor((L_total - L - H) / stride) + 1 pairs.
inline std::vector<WindowPair> make_windows(const MultichannelSeries& series, std::size_t lookback,
                                            std::size_t horizon, std::size_t stride = 1) {
    if (stride < 1) throw ArgumentError("make_windows: stride must be >= 1");
    if (lookback < 1 || horizon < 1)
        throw ArgumentError("make_windows: lookback and horizon must be >= 1");
    const std::size_t total = series.length();
    if (lookback + horizon > total) {
        std::ostringstream msg;
        msg << "insufficient data: lookback " << lookback << " + horizon " << horizon
            << " exceeds series length " << total;
        throw DataError(msg.str());
    }
    std::vector<WindowPair> out;
    for (std::size_t t = lookback; t + horizon <= total; t += stride) {
        WindowPair w;
        w.history = series.values.rows_slice(t - lookback, lookback);
        w.future = series.values.rows_slice(t, horizon);
        w.t_index = t;
        out.push_back(std::move(w));
    }
    return out;
}

/// Z-scores y with its own population mean/std. A (near-)constant input gets
/// its std floored to NormStats::k_eps_std and is flagged; the stored stats
/// always invert the transform exactly.
inline std::vector<double> normalize(std::span<const double> y, NormStats& stats) {
    if (y.empty()) throw ArgumentError("normalize: empty input");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(y.size());
    double sd = std::sqrt(var);
    stats.flagged = sd < NormStats::k_eps_std;
    stats.std = stats.flagged ? NormStats::k_eps_std : sd;
    stats.mean = mean;
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - stats.mean) / stats.std;
    return out;
}

inline std::vector<double> denormalize(std::span<const double> y, const NormStats& stats) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * stats.std + stats.mean;
    return out;
}

/// Time-ordered train/validation/test split of whole rows. Ratios must be
/// positive for train and test and sum to 1.
struct SeriesSplit {
    MultichannelSeries train;
    MultichannelSeries val;
    MultichannelSeries test;
};

inline SeriesSplit split_series(const MultichannelSeries& series, double train_ratio = 0.7,
                                double val_ratio = 0.1, double test_ratio = 0.2) {
    const double sum = train_ratio + val_ratio + test_ratio;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1, got " + std::to_string(sum));
    if (train_ratio <= 0.0 || test_ratio <= 0.0 || val_ratio < 0.0)
        throw ConfigError("split ratios: train and test must be positive, val non-negative");
    const std::size_t total = series.length();
    const auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(total)));
    const auto n_val = static_cast<std::size_t>(std::floor(val_ratio * static_cast<double>(total)));
    const std::size_t n_test = total - n_train - n_val;

    auto piece = [&](std::size_t r0, std::size_t n, const char* tag) {
        MultichannelSeries s;
        s.values = series.values.rows_slice(r0, n);
        s.channel_names = series.channel_names;
        s.source_id = series.source_id + "#" + tag;
        return s;
    };
    SeriesSplit out;
    out.train = piece(0, n_train, "train");
    out.val = piece(n_train, n_val, "val");
    out.test = piece(n_train + n_val, n_test, "test");
    return out;
}

}  // namespace pcdf
