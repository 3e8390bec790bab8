#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mwpam {

class InvalidIndexSet : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense order-K real tensor, row-major (last mode varies fastest).
/// Entries are validated to be finite at construction and the storage is
/// immutable afterwards, so concurrent reads are safe.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::size_t> dims, std::vector<double> values)
        : dims_(std::move(dims)), values_(std::move(values))
    {
        if (dims_.empty()) {
            throw ShapeMismatch("Tensor: rank must be at least 1");
        }
        std::size_t n = 1;
        for (std::size_t d : dims_) {
            if (d == 0) {
                throw ShapeMismatch("Tensor: every dimension must be at least 1");
            }
            n *= d;
        }
        if (values_.size() != n) {
            throw ShapeMismatch("Tensor: expected " + std::to_string(n) + " values, got " +
                                std::to_string(values_.size()));
        }
        for (double v : values_) {
            if (!std::isfinite(v)) {
                throw ShapeMismatch("Tensor: entries must be finite");
            }
        }
    }

    static Tensor zeros(std::vector<std::size_t> dims)
    {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return Tensor(std::move(dims), std::vector<double>(n, 0.0));
    }

    std::size_t rank() const { return dims_.size(); }
    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }

    double operator[](std::size_t flat) const { return values_[flat]; }

    /// Row-major strides: stride of the last mode is 1.
    std::vector<std::size_t> strides() const
    {
        std::vector<std::size_t> s(dims_.size(), 1);
        for (std::size_t k = dims_.size(); k-- > 1;) {
            s[k - 1] = s[k] * dims_[k];
        }
        return s;
    }

    std::size_t flat_index(std::span<const std::size_t> idx) const
    {
        std::size_t off = 0;
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            off = off * dims_[k] + idx[k];
        }
        return off;
    }

    double at(std::span<const std::size_t> idx) const { return values_[flat_index(idx)]; }

private:
    std::vector<std::size_t> dims_;
    std::vector<double> values_;
};

/// Ordered set of distinct indices along one mode. Extraction is
/// order-sensitive: the result follows the order given here.
struct IndexSet {
    std::size_t mode = 0;
    std::vector<std::size_t> indices;

    static IndexSet full(std::size_t mode, std::size_t dim)
    {
        IndexSet s;
        s.mode = mode;
        s.indices.resize(dim);
        std::iota(s.indices.begin(), s.indices.end(), std::size_t{0});
        return s;
    }

    static IndexSet single(std::size_t mode, std::size_t index)
    {
        return IndexSet{mode, {index}};
    }
};

namespace detail {

inline void check_index_set(const IndexSet& set, std::size_t mode, std::size_t dim)
{
    if (set.mode != mode) {
        throw InvalidIndexSet("subtensor: index set for mode " + std::to_string(set.mode) +
                              " given at position " + std::to_string(mode));
    }
    if (set.indices.empty()) {
        throw InvalidIndexSet("subtensor: empty index set for mode " + std::to_string(mode));
    }
    std::vector<bool> seen(dim, false);
    for (std::size_t i : set.indices) {
        if (i >= dim) {
            throw InvalidIndexSet("subtensor: index " + std::to_string(i) +
                                  " out of range for mode " + std::to_string(mode) +
                                  " of size " + std::to_string(dim));
        }
        if (seen[i]) {
            throw InvalidIndexSet("subtensor: duplicate index " + std::to_string(i) +
                                  " in mode " + std::to_string(mode));
        }
        seen[i] = true;
    }
}

/// Advances a row-major multi-index; returns false once it wraps around.
inline bool next_multi_index(std::vector<std::size_t>& idx, std::span<const std::size_t> dims)
{
    for (std::size_t k = idx.size(); k-- > 0;) {
        if (++idx[k] < dims[k]) return true;
        idx[k] = 0;
    }
    return false;
}

} // namespace detail

/// Extracts the sub-tensor addressed by one index set per mode.
inline Tensor subtensor(const Tensor& t, std::span<const IndexSet> sets)
{
    const std::size_t rank = t.rank();
    if (sets.size() != rank) {
        throw InvalidIndexSet("subtensor: expected one index set per mode");
    }
    std::vector<std::size_t> out_dims(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        detail::check_index_set(sets[k], k, t.dims()[k]);
        out_dims[k] = sets[k].indices.size();
    }

    std::size_t n = 1;
    for (std::size_t d : out_dims) n *= d;
    std::vector<double> out(n);

    const std::vector<std::size_t> strides = t.strides();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t pos = 0;
    do {
        std::size_t off = 0;
        for (std::size_t k = 0; k < rank; ++k) {
            off += sets[k].indices[idx[k]] * strides[k];
        }
        out[pos++] = t[off];
    } while (detail::next_multi_index(idx, out_dims));

    return Tensor(std::move(out_dims), std::move(out));
}

inline Tensor subtensor(const Tensor& t, const std::vector<IndexSet>& sets)
{
    return subtensor(t, std::span<const IndexSet>(sets));
}

/// Order-k slice: index `index` fixed on mode `mode`, all other modes full.
/// The sliced mode is kept with size 1, so slices of equal shape compare
/// directly with dissim().
inline Tensor mode_slice(const Tensor& t, std::size_t mode, std::size_t index)
{
    if (mode >= t.rank()) {
        throw InvalidIndexSet("mode_slice: mode " + std::to_string(mode) + " out of range");
    }
    if (index >= t.dims()[mode]) {
        throw InvalidIndexSet("mode_slice: index " + std::to_string(index) +
                              " out of range for mode " + std::to_string(mode));
    }
    std::vector<IndexSet> sets;
    sets.reserve(t.rank());
    for (std::size_t k = 0; k < t.rank(); ++k) {
        sets.push_back(k == mode ? IndexSet::single(k, index) : IndexSet::full(k, t.dims()[k]));
    }
    return subtensor(t, sets);
}

/// Frobenius dissimilarity d(a, b) = sqrt(sum of squared entry differences).
/// Accumulates in flat row-major order so repeated calls are bit-identical.
inline double dissim(const Tensor& a, const Tensor& b)
{
    if (a.dims() != b.dims()) {
        throw ShapeMismatch("dissim: tensors have different shapes");
    }
    const std::vector<double>& av = a.values();
    const std::vector<double>& bv = b.values();
    double acc = 0.0;
    for (std::size_t e = 0; e < av.size(); ++e) {
        const double diff = av[e] - bv[e];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

/// Replaces every occurrence of value `a` with `b`; order and length preserved.
template <typename T>
std::vector<T> replace(std::vector<T> v, T a, T b)
{
    std::replace(v.begin(), v.end(), a, b);
    return v;
}

} // namespace mwpam
