#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <thread>
#include <utility>
#include <vector>

#include "mwpam/clustering.hpp"
#include "mwpam/tensor.hpp"

namespace mwpam {

struct PamOptions {
    std::size_t threads = 0;  // 0: use all hardware threads
};

namespace detail {

inline std::size_t resolve_threads(std::size_t requested)
{
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs fn(begin, end) over [0, n) split into contiguous chunks, one thread
/// per chunk. Results must be written to disjoint slots so the outcome does
/// not depend on scheduling.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t threads, Fn&& fn)
{
    if (n == 0) return;
    const std::size_t workers = std::min(threads, n);
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(begin + chunk, n);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (std::thread& t : pool) t.join();
}

/// Representative index of every position: rep[k][i] = medoids[k][memberships[k][i]].
inline std::vector<std::vector<std::size_t>> representative_indices(const Clustering& cl)
{
    std::vector<std::vector<std::size_t>> rep(cl.rank());
    for (std::size_t k = 0; k < cl.rank(); ++k) {
        rep[k].resize(cl.memberships[k].size());
        for (std::size_t i = 0; i < rep[k].size(); ++i) {
            rep[k][i] = cl.medoids[k][cl.memberships[k][i]];
        }
    }
    return rep;
}

/// d(Y, Yhat) where yhat[i1..iK] = y[rep[0][i1], ..., rep[K-1][iK]], without
/// materializing Yhat. Accumulates in flat row-major order, so the result is
/// bit-identical to dissim(y, medoid_tensor(y, cl)).
inline double gathered_objective(const Tensor& y, const std::vector<const std::vector<std::size_t>*>& rep)
{
    const auto& dims = y.dims();
    const std::size_t rank = dims.size();
    const std::vector<std::size_t> strides = y.strides();
    const std::vector<double>& v = y.values();

    std::vector<std::vector<std::size_t>> offsets(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        offsets[k].resize(dims[k]);
        for (std::size_t i = 0; i < dims[k]; ++i) {
            offsets[k][i] = (*rep[k])[i] * strides[k];
        }
    }

    const std::size_t last = rank - 1;
    const std::vector<std::size_t>& off_last = offsets[last];
    std::vector<std::size_t> prefix(rank > 1 ? rank - 1 : 0, 0);
    std::span<const std::size_t> prefix_dims(dims.data(), rank > 1 ? rank - 1 : 0);

    double acc = 0.0;
    std::size_t e = 0;
    do {
        std::size_t base = 0;
        for (std::size_t k = 0; k + 1 < rank; ++k) {
            base += offsets[k][prefix[k]];
        }
        for (std::size_t i = 0; i < dims[last]; ++i, ++e) {
            const double diff = v[e] - v[base + off_last[i]];
            acc += diff * diff;
        }
    } while (next_multi_index(prefix, prefix_dims));
    return std::sqrt(acc);
}

inline double clustering_objective(const Tensor& y, const Clustering& cl)
{
    const auto rep = representative_indices(cl);
    std::vector<const std::vector<std::size_t>*> ptrs(rep.size());
    for (std::size_t k = 0; k < rep.size(); ++k) ptrs[k] = &rep[k];
    return gathered_objective(y, ptrs);
}

/// Pairwise distances between the raw mode-k slices: a d_k x d_k matrix with
/// entry [i*d_k + j] = d(Z^(i), Z^(j)).
inline std::vector<double> slice_distance_matrix(const Tensor& y, std::size_t mode)
{
    const auto& dims = y.dims();
    const std::size_t dk = dims[mode];
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < mode; ++k) outer *= dims[k];
    for (std::size_t k = mode + 1; k < dims.size(); ++k) inner *= dims[k];

    const std::vector<double>& v = y.values();
    std::vector<double> dist(dk * dk, 0.0);
    for (std::size_t i = 0; i < dk; ++i) {
        for (std::size_t j = i + 1; j < dk; ++j) {
            double acc = 0.0;
            for (std::size_t o = 0; o < outer; ++o) {
                const double* a = v.data() + (o * dk + i) * inner;
                const double* b = v.data() + (o * dk + j) * inner;
                for (std::size_t t = 0; t < inner; ++t) {
                    const double diff = a[t] - b[t];
                    acc += diff * diff;
                }
            }
            dist[i * dk + j] = dist[j * dk + i] = std::sqrt(acc);
        }
    }
    return dist;
}

/// Contiguous copy of every raw mode-k slice, slice l at row l.
inline std::vector<double> flatten_mode_slices(const Tensor& y, std::size_t mode)
{
    const auto& dims = y.dims();
    const std::size_t dk = dims[mode];
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < mode; ++k) outer *= dims[k];
    for (std::size_t k = mode + 1; k < dims.size(); ++k) inner *= dims[k];

    const std::vector<double>& v = y.values();
    std::vector<double> rows(dk * outer * inner);
    for (std::size_t l = 0; l < dk; ++l) {
        double* row = rows.data() + l * outer * inner;
        for (std::size_t o = 0; o < outer; ++o) {
            const double* src = v.data() + (o * dk + l) * inner;
            std::copy(src, src + inner, row + o * inner);
        }
    }
    return rows;
}

/// Contiguous copy of every medoid-smoothed mode-k slice: row p holds the
/// slice whose mode-k coordinate stays p while every other coordinate is
/// replaced by its cluster's medoid (Z-hat in the swap membership rule).
inline std::vector<double> flatten_smoothed_slices(const Tensor& y, std::size_t mode,
                                                   const Clustering& state)
{
    const auto& dims = y.dims();
    const std::size_t rank = dims.size();
    const std::size_t dk = dims[mode];
    const std::vector<std::size_t> strides = y.strides();
    const std::vector<double>& v = y.values();

    std::vector<std::size_t> other_modes;
    for (std::size_t k = 0; k < rank; ++k) {
        if (k != mode) other_modes.push_back(k);
    }
    std::vector<std::size_t> other_dims(other_modes.size());
    std::vector<std::vector<std::size_t>> offsets(other_modes.size());
    std::size_t slice_size = 1;
    for (std::size_t t = 0; t < other_modes.size(); ++t) {
        const std::size_t k = other_modes[t];
        other_dims[t] = dims[k];
        slice_size *= dims[k];
        offsets[t].resize(dims[k]);
        for (std::size_t i = 0; i < dims[k]; ++i) {
            offsets[t][i] = state.medoids[k][state.memberships[k][i]] * strides[k];
        }
    }

    std::vector<double> rows(dk * slice_size);
    std::vector<std::size_t> idx(other_modes.size(), 0);
    std::size_t pos = 0;
    do {
        std::size_t base = 0;
        for (std::size_t t = 0; t < other_modes.size(); ++t) {
            base += offsets[t][idx[t]];
        }
        for (std::size_t p = 0; p < dk; ++p) {
            rows[p * slice_size + pos] = v[base + p * strides[mode]];
        }
        ++pos;
    } while (next_multi_index(idx, other_dims));
    return rows;
}

inline double row_distance(const double* a, const double* b, std::size_t n)
{
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double diff = a[t] - b[t];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

/// Distances between every raw slice l and every smoothed slice p of one
/// mode: entry [l*d_k + p] = d(Z^(l), Z-hat^(p)). These are the only
/// quantities the swap membership rule and candidate objectives need.
inline std::vector<double> smoothed_slice_distances(const Tensor& y, std::size_t mode,
                                                    const Clustering& state)
{
    const std::size_t dk = y.dims()[mode];
    const std::size_t slice_size = y.size() / dk;
    const std::vector<double> raw = flatten_mode_slices(y, mode);
    const std::vector<double> smoothed = flatten_smoothed_slices(y, mode, state);
    std::vector<double> dist(dk * dk);
    for (std::size_t l = 0; l < dk; ++l) {
        for (std::size_t p = 0; p < dk; ++p) {
            dist[l * dk + p] =
                row_distance(raw.data() + l * slice_size, smoothed.data() + p * slice_size, slice_size);
        }
    }
    return dist;
}

/// Membership of every mode-k index against the candidate medoid vector,
/// given the matrix of raw-to-smoothed slice distances. A medoid always
/// belongs to its own cluster; everything else goes to the closest smoothed
/// medoid slice, ties toward the smallest cluster label.
inline std::vector<std::size_t> memberships_from_distances(const std::vector<std::size_t>& medoids,
                                                           const std::vector<double>& dist,
                                                           std::size_t dk)
{
    const std::size_t ck = medoids.size();
    std::vector<std::size_t> m(dk);
    std::vector<std::size_t> own(dk, ck);
    for (std::size_t h = 0; h < ck; ++h) own[medoids[h]] = h;
    for (std::size_t l = 0; l < dk; ++l) {
        if (own[l] < ck) {
            m[l] = own[l];
            continue;
        }
        std::size_t best = 0;
        double best_dist = dist[l * dk + medoids[0]];
        for (std::size_t h = 1; h < ck; ++h) {
            const double d = dist[l * dk + medoids[h]];
            if (d < best_dist) {
                best_dist = d;
                best = h;
            }
        }
        m[l] = best;
    }
    return m;
}

} // namespace detail

/// Medoid tensor: every entry is copied from the entry of y at the cross-mode
/// medoid coordinates of its block.
inline Tensor medoid_tensor(const Tensor& y, const Clustering& cl)
{
    if (cl.rank() != y.rank()) {
        throw ShapeMismatch("medoid_tensor: clustering rank does not match tensor rank");
    }
    for (std::size_t k = 0; k < y.rank(); ++k) {
        if (cl.memberships[k].size() != y.dims()[k]) {
            throw ShapeMismatch("medoid_tensor: clustering does not match tensor dimensions");
        }
    }
    validate_clustering(cl, y.dims());

    const auto rep = detail::representative_indices(cl);
    const auto& dims = y.dims();
    const std::vector<std::size_t> strides = y.strides();
    std::vector<double> out(y.size());
    std::vector<std::size_t> idx(y.rank(), 0);
    std::size_t e = 0;
    do {
        std::size_t off = 0;
        for (std::size_t k = 0; k < y.rank(); ++k) {
            off += rep[k][idx[k]] * strides[k];
        }
        out[e++] = y[off];
    } while (detail::next_multi_index(idx, dims));
    return Tensor(dims, std::move(out));
}

/// Mode-k memberships induced by a candidate medoid vector, holding every
/// other mode's state fixed. A candidate medoid is assigned its own cluster;
/// any other index goes to the cluster whose smoothed medoid slice is closest
/// to its raw slice, ties toward the smallest cluster label.
inline std::vector<std::size_t> assign_membership(const Tensor& y, std::size_t mode,
                                                  const std::vector<std::size_t>& candidate_medoids,
                                                  const Clustering& state)
{
    if (mode >= y.rank()) {
        throw InvalidMedoids("assign_membership: mode out of range");
    }
    const std::size_t dk = y.dims()[mode];
    if (candidate_medoids.empty() || candidate_medoids.size() > dk) {
        throw InvalidMedoids("assign_membership: invalid number of medoids");
    }
    std::vector<bool> seen(dk, false);
    for (std::size_t r : candidate_medoids) {
        if (r >= dk) {
            throw InvalidMedoids("assign_membership: medoid " + std::to_string(r) + " out of range");
        }
        if (seen[r]) {
            throw InvalidMedoids("assign_membership: duplicate medoid " + std::to_string(r));
        }
        seen[r] = true;
    }
    for (std::size_t k = 0; k < y.rank(); ++k) {
        if (k != mode && state.memberships[k].size() != y.dims()[k]) {
            throw InvalidMedoids("assign_membership: state does not match tensor dimensions");
        }
    }
    const std::vector<double> dist = detail::smoothed_slice_distances(y, mode, state);
    return detail::memberships_from_distances(candidate_medoids, dist, dk);
}

/// BUILD initialization: per mode, the first medoid minimizes the total
/// distance to all slices; each following medoid greedily minimizes the sum
/// of distances from every slice to its nearest chosen medoid. Memberships
/// assign each index to the nearest medoid by raw slice distance.
inline Clustering build(const Tensor& y, const ClusterSpec& c)
{
    c.validate_for(y.dims());
    const std::size_t rank = y.rank();
    Clustering cl;
    cl.medoids.resize(rank);
    cl.memberships.resize(rank);

    for (std::size_t k = 0; k < rank; ++k) {
        const std::size_t dk = y.dims()[k];
        const std::size_t ck = c.counts[k];
        const std::vector<double> dist = detail::slice_distance_matrix(y, k);

        std::size_t first = 0;
        double first_sum = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < dk; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < dk; ++j) sum += dist[i * dk + j];
            if (sum < first_sum) {
                first_sum = sum;
                first = i;
            }
        }

        std::vector<std::size_t>& medoids = cl.medoids[k];
        medoids.push_back(first);
        std::vector<bool> chosen(dk, false);
        chosen[first] = true;
        std::vector<double> nearest(dk);
        for (std::size_t l = 0; l < dk; ++l) nearest[l] = dist[l * dk + first];

        while (medoids.size() < ck) {
            std::size_t best = dk;
            double best_sum = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < dk; ++j) {
                if (chosen[j]) continue;
                double sum = 0.0;
                for (std::size_t l = 0; l < dk; ++l) {
                    sum += std::min(nearest[l], dist[l * dk + j]);
                }
                if (sum < best_sum) {
                    best_sum = sum;
                    best = j;
                }
            }
            medoids.push_back(best);
            chosen[best] = true;
            for (std::size_t l = 0; l < dk; ++l) {
                nearest[l] = std::min(nearest[l], dist[l * dk + best]);
            }
        }

        // Nearest-medoid assignment by raw slice distance; a medoid keeps its
        // own cluster so the medoid-in-cluster invariant survives duplicate
        // slices (where the plain argmin could tie toward an earlier cluster).
        std::vector<std::size_t>& m = cl.memberships[k];
        m.resize(dk);
        std::vector<std::size_t> own(dk, ck);
        for (std::size_t j = 0; j < ck; ++j) own[medoids[j]] = j;
        for (std::size_t i = 0; i < dk; ++i) {
            if (own[i] < ck) {
                m[i] = own[i];
                continue;
            }
            std::size_t best = 0;
            double best_dist = dist[i * dk + medoids[0]];
            for (std::size_t j = 1; j < ck; ++j) {
                const double d = dist[i * dk + medoids[j]];
                if (d < best_dist) {
                    best_dist = d;
                    best = j;
                }
            }
            m[i] = best;
        }
    }

    cl.objective = detail::clustering_objective(y, cl);
    return cl;
}

/// SWAP refinement: repeated full passes over the modes; per mode every
/// (medoid, non-medoid) pair is scored by recomputing that mode's memberships
/// and the full medoid-tensor objective, and the best strictly improving pair
/// is adopted (at most one swap per mode per pass). Terminates once a full
/// pass leaves the objective unchanged.
inline Clustering swap(const Tensor& y, const ClusterSpec& c, Clustering init,
                       const PamOptions& opts = {})
{
    validate_clustering(init, y.dims(), c);
    const std::size_t rank = y.rank();
    const std::size_t threads = detail::resolve_threads(opts.threads);

    Clustering cur = std::move(init);
    cur.objective = detail::clustering_objective(y, cur);

    auto rep = detail::representative_indices(cur);
    std::vector<const std::vector<std::size_t>*> rep_ptrs(rank);
    for (std::size_t k = 0; k < rank; ++k) rep_ptrs[k] = &rep[k];

    std::size_t pass = 0;
    while (true) {
        ++pass;
        const double pass_start = cur.objective;

        for (std::size_t k = 0; k < rank; ++k) {
            const std::size_t dk = y.dims()[k];
            const std::size_t ck = c.counts[k];
            if (ck == dk) continue;  // no non-medoid indices to swap in

            std::vector<bool> is_medoid(dk, false);
            for (std::size_t r : cur.medoids[k]) is_medoid[r] = true;
            std::vector<std::size_t> medoid_values;   // ascending
            std::vector<std::size_t> non_medoids;     // ascending
            for (std::size_t i = 0; i < dk; ++i) {
                (is_medoid[i] ? medoid_values : non_medoids).push_back(i);
            }

            std::vector<std::pair<std::size_t, std::size_t>> pairs;
            pairs.reserve(medoid_values.size() * non_medoids.size());
            for (std::size_t i : medoid_values) {
                for (std::size_t j : non_medoids) pairs.emplace_back(i, j);
            }

            const std::vector<double> dist = detail::smoothed_slice_distances(y, k, cur);

            std::vector<double> scores(pairs.size());
            detail::parallel_chunks(pairs.size(), threads, [&](std::size_t begin, std::size_t end) {
                std::vector<const std::vector<std::size_t>*> local_rep = rep_ptrs;
                std::vector<std::size_t> rep_k(dk);
                for (std::size_t p = begin; p < end; ++p) {
                    const auto r_tilde = replace(cur.medoids[k], pairs[p].first, pairs[p].second);
                    const auto m_tilde = detail::memberships_from_distances(r_tilde, dist, dk);
                    for (std::size_t l = 0; l < dk; ++l) rep_k[l] = r_tilde[m_tilde[l]];
                    local_rep[k] = &rep_k;
                    scores[p] = detail::gathered_objective(y, local_rep);
                }
            });

            std::size_t best_pair = pairs.size();
            double best_score = std::numeric_limits<double>::infinity();
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                if (scores[p] < best_score) {
                    best_score = scores[p];
                    best_pair = p;
                }
            }

            if (best_pair < pairs.size() && best_score < cur.objective) {
                const auto [out_idx, in_idx] = pairs[best_pair];
                cur.medoids[k] = replace(cur.medoids[k], out_idx, in_idx);
                cur.memberships[k] = detail::memberships_from_distances(cur.medoids[k], dist, dk);
                for (std::size_t l = 0; l < dk; ++l) {
                    rep[k][l] = cur.medoids[k][cur.memberships[k][l]];
                }
                cur.objective = best_score;
                cur.trace.push_back({TraceRecord::Kind::swap, pass, k, out_idx, in_idx, best_score});
            }
        }

        if (cur.objective == pass_start) break;
    }
    return cur;
}

/// BUILD followed by SWAP. Deterministic for a fixed input.
inline Clustering fit(const Tensor& y, const ClusterSpec& c, const PamOptions& opts = {})
{
    return swap(y, c, build(y, c), opts);
}

} // namespace mwpam
