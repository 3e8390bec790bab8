#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwpam/tensor.hpp"

namespace mwpam {

class InvalidClusterSpec : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidMedoids : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptyCluster : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Number of clusters per mode.
struct ClusterSpec {
    std::vector<std::size_t> counts;

    void validate_for(const std::vector<std::size_t>& dims) const
    {
        if (counts.size() != dims.size()) {
            throw InvalidClusterSpec("cluster spec: expected " + std::to_string(dims.size()) +
                                     " counts, got " + std::to_string(counts.size()));
        }
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (counts[k] < 1 || counts[k] > dims[k]) {
                throw InvalidClusterSpec("cluster spec: count " + std::to_string(counts[k]) +
                                         " invalid for mode " + std::to_string(k) + " of size " +
                                         std::to_string(dims[k]));
            }
        }
    }

    bool is_identity(const std::vector<std::size_t>& dims) const { return counts == dims; }
};

/// One entry of the iteration trace. `swap` records an accepted medoid swap
/// (swapped_out/swapped_in are tensor indices, objective_after the medoid
/// objective after the swap). `reseed` records an empty-cluster repair in the
/// TBM refinement (swapped_out is the emptied cluster label, swapped_in the
/// index re-seeded into it, objective_after the centroid objective).
struct TraceRecord {
    enum class Kind { swap, reseed };
    Kind kind = Kind::swap;
    std::size_t pass = 0;
    std::size_t mode = 0;
    std::size_t swapped_out = 0;
    std::size_t swapped_in = 0;
    double objective_after = 0.0;
};

/// Per-mode medoid and membership lists plus the final dissimilarity between
/// the data tensor and its medoid tensor. Immutable once returned by a fit.
struct Clustering {
    std::vector<std::vector<std::size_t>> medoids;      // medoids[k][j]: index of cluster j's medoid
    std::vector<std::vector<std::size_t>> memberships;  // memberships[k][i]: cluster label of index i
    double objective = 0.0;
    std::vector<TraceRecord> trace;

    std::size_t rank() const { return medoids.size(); }
};

/// Checks the structural invariants: sizes, ranges, distinct medoids, and
/// medoid-in-cluster (memberships[k][medoids[k][j]] == j).
inline void validate_clustering(const Clustering& cl, const std::vector<std::size_t>& dims)
{
    const std::size_t rank = dims.size();
    if (cl.medoids.size() != rank || cl.memberships.size() != rank) {
        throw InvalidMedoids("clustering: expected " + std::to_string(rank) + " modes");
    }
    for (std::size_t k = 0; k < rank; ++k) {
        const auto& r = cl.medoids[k];
        const auto& m = cl.memberships[k];
        const std::size_t ck = r.size();
        if (ck < 1 || ck > dims[k]) {
            throw InvalidMedoids("clustering: mode " + std::to_string(k) + " has " +
                                 std::to_string(ck) + " medoids for dimension " +
                                 std::to_string(dims[k]));
        }
        if (m.size() != dims[k]) {
            throw InvalidMedoids("clustering: mode " + std::to_string(k) + " has " +
                                 std::to_string(m.size()) + " memberships, expected " +
                                 std::to_string(dims[k]));
        }
        std::vector<bool> seen(dims[k], false);
        for (std::size_t j = 0; j < ck; ++j) {
            if (r[j] >= dims[k]) {
                throw InvalidMedoids("clustering: medoid " + std::to_string(r[j]) +
                                     " out of range in mode " + std::to_string(k));
            }
            if (seen[r[j]]) {
                throw InvalidMedoids("clustering: duplicate medoid " + std::to_string(r[j]) +
                                     " in mode " + std::to_string(k));
            }
            seen[r[j]] = true;
        }
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i] >= ck) {
                throw InvalidMedoids("clustering: label " + std::to_string(m[i]) +
                                     " out of range in mode " + std::to_string(k));
            }
        }
        for (std::size_t j = 0; j < ck; ++j) {
            if (m[r[j]] != j) {
                throw InvalidMedoids("clustering: medoid " + std::to_string(r[j]) +
                                     " of cluster " + std::to_string(j) + " in mode " +
                                     std::to_string(k) + " is labeled " + std::to_string(m[r[j]]));
            }
        }
    }
}

inline void validate_clustering(const Clustering& cl, const std::vector<std::size_t>& dims,
                                const ClusterSpec& c)
{
    c.validate_for(dims);
    validate_clustering(cl, dims);
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (cl.medoids[k].size() != c.counts[k]) {
            throw InvalidMedoids("clustering: mode " + std::to_string(k) + " has " +
                                 std::to_string(cl.medoids[k].size()) + " medoids, spec asks " +
                                 std::to_string(c.counts[k]));
        }
    }
}

} // namespace mwpam
