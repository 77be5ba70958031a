#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctxparrot {

/// Raised for bad arguments and violated preconditions (CLI exit code 2).
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces non-finite values (CLI exit code 3).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string &msg) {
    if (!cond) throw InvalidArgument(msg);
}

/// Dense row-major matrix of doubles. Rows are samples, columns are
/// coordinates.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    void append_row(std::span<const double> values) {
        if (rows_ == 0 && cols_ == 0) cols_ = values.size();
        require(values.size() == cols_, "Matrix::append_row: width mismatch");
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    /// Rows [first, first + count) as a new matrix.
    Matrix slice_rows(std::size_t first, std::size_t count) const {
        require(first + count <= rows_, "Matrix::slice_rows: out of range");
        Matrix out(count, cols_);
        std::copy(data_.begin() + first * cols_, data_.begin() + (first + count) * cols_,
                  out.data_.begin());
        return out;
    }

    static Matrix from_columns(const std::vector<std::vector<double>> &cols) {
        if (cols.empty()) return {};
        Matrix out(cols.front().size(), cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) {
            require(cols[c].size() == out.rows(), "Matrix::from_columns: ragged columns");
            for (std::size_t r = 0; r < out.rows(); ++r) out(r, c) = cols[c][r];
        }
        return out;
    }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    bool operator==(const Matrix &) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(std::span<const double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

/// SplitMix64 finalizer; used to derive independent per-cell seeds from a
/// master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <class... Ts>
std::uint64_t derive_seed(std::uint64_t master, Ts... parts) {
    std::uint64_t h = mix_seed(master);
    ((h = mix_seed(h ^ static_cast<std::uint64_t>(parts))), ...);
    return h;
}

/// FNV-1a over a string, for stable name-keyed seeds and config hashes.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace ctxparrot
