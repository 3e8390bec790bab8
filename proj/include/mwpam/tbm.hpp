#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "mwpam/clustering.hpp"
#include "mwpam/pam.hpp"
#include "mwpam/report.hpp"
#include "mwpam/synth.hpp"
#include "mwpam/tensor.hpp"

namespace mwpam {

struct TbmConfig {
    std::size_t max_iters = 50;        // refinement pass cap
    std::uint64_t seed = 0;
    std::size_t kmeans_restarts = 10;
    std::size_t kmeans_max_iters = 100;
};

namespace detail {

/// Lloyd k-means with k-means++ seeding on a row matrix. Every random draw
/// comes from the supplied engine; ties and empty-cluster repairs are
/// deterministic, so the result is a pure function of (rows, k, rng state).
class RowKMeans {
public:
    RowKMeans(const std::vector<double>& rows, std::size_t n, std::size_t dim)
        : rows_(rows), n_(n), dim_(dim)
    {
    }

    std::vector<std::size_t> run(std::size_t k, std::size_t max_iters, std::mt19937_64& rng,
                                 double& wcss_out) const
    {
        std::vector<std::size_t> seeds = seed_plusplus(k, rng);
        std::vector<double> centers(k * dim_);
        for (std::size_t h = 0; h < k; ++h) {
            const double* src = row(seeds[h]);
            std::copy(src, src + dim_, centers.data() + h * dim_);
        }

        std::vector<std::size_t> labels(n_, 0);
        for (std::size_t iter = 0; iter < max_iters; ++iter) {
            bool changed = assign(centers, k, labels);
            repair_empty(centers, k, labels);
            recompute_centers(labels, k, centers);
            if (!changed && iter > 0) break;
        }

        wcss_out = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            wcss_out += sq_distance(row(i), centers.data() + labels[i] * dim_);
        }
        return labels;
    }

private:
    const double* row(std::size_t i) const { return rows_.data() + i * dim_; }

    double sq_distance(const double* a, const double* b) const
    {
        double acc = 0.0;
        for (std::size_t t = 0; t < dim_; ++t) {
            const double diff = a[t] - b[t];
            acc += diff * diff;
        }
        return acc;
    }

    double uniform(std::mt19937_64& rng) const
    {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }

    std::vector<std::size_t> seed_plusplus(std::size_t k, std::mt19937_64& rng) const
    {
        std::vector<std::size_t> seeds;
        seeds.reserve(k);
        std::vector<bool> used(n_, false);
        const std::size_t first = static_cast<std::size_t>(rng() % n_);
        seeds.push_back(first);
        used[first] = true;

        std::vector<double> min_dist2(n_);
        for (std::size_t i = 0; i < n_; ++i) min_dist2[i] = sq_distance(row(i), row(first));

        while (seeds.size() < k) {
            double total = 0.0;
            for (std::size_t i = 0; i < n_; ++i) total += min_dist2[i];
            std::size_t pick = n_;
            if (total > 0.0) {
                const double u = uniform(rng) * total;
                double cum = 0.0;
                for (std::size_t i = 0; i < n_; ++i) {
                    cum += min_dist2[i];
                    if (u < cum) {
                        pick = i;
                        break;
                    }
                }
            }
            if (pick == n_ || used[pick]) {
                // All remaining mass sits on already-used points (duplicate
                // rows); take the smallest unused index.
                for (std::size_t i = 0; i < n_; ++i) {
                    if (!used[i]) {
                        pick = i;
                        break;
                    }
                }
            }
            used[pick] = true;
            seeds.push_back(pick);
            for (std::size_t i = 0; i < n_; ++i) {
                min_dist2[i] = std::min(min_dist2[i], sq_distance(row(i), row(pick)));
            }
        }
        return seeds;
    }

    bool assign(const std::vector<double>& centers, std::size_t k,
                std::vector<std::size_t>& labels) const
    {
        bool changed = false;
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t best = 0;
            double best_d = sq_distance(row(i), centers.data());
            for (std::size_t h = 1; h < k; ++h) {
                const double d = sq_distance(row(i), centers.data() + h * dim_);
                if (d < best_d) {
                    best_d = d;
                    best = h;
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }
        return changed;
    }

    void repair_empty(const std::vector<double>& centers, std::size_t k,
                      std::vector<std::size_t>& labels) const
    {
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t label : labels) sizes[label] += 1;
        for (std::size_t h = 0; h < k; ++h) {
            if (sizes[h] > 0) continue;
            std::size_t worst = n_;
            double worst_d = -1.0;
            for (std::size_t i = 0; i < n_; ++i) {
                if (sizes[labels[i]] < 2) continue;
                const double d = sq_distance(row(i), centers.data() + labels[i] * dim_);
                if (d > worst_d) {
                    worst_d = d;
                    worst = i;
                }
            }
            sizes[labels[worst]] -= 1;
            labels[worst] = h;
            sizes[h] = 1;
        }
    }

    void recompute_centers(const std::vector<std::size_t>& labels, std::size_t k,
                           std::vector<double>& centers) const
    {
        std::vector<std::size_t> sizes(k, 0);
        std::fill(centers.begin(), centers.end(), 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* src = row(i);
            double* dst = centers.data() + labels[i] * dim_;
            for (std::size_t t = 0; t < dim_; ++t) dst[t] += src[t];
            sizes[labels[i]] += 1;
        }
        for (std::size_t h = 0; h < k; ++h) {
            if (sizes[h] == 0) continue;
            double* dst = centers.data() + h * dim_;
            for (std::size_t t = 0; t < dim_; ++t) dst[t] /= static_cast<double>(sizes[h]);
        }
    }

    const std::vector<double>& rows_;
    std::size_t n_;
    std::size_t dim_;
};

/// Per-cluster candidate rows for the TBM reassignment of one mode: row h is
/// the centroid-smoothed slice a mode-k index would see if it belonged to
/// cluster h (block mean at (h, labels of the other coordinates)).
inline std::vector<double> centroid_candidate_rows(const Tensor& y, std::size_t mode,
                                                   const std::vector<std::vector<std::size_t>>& memberships,
                                                   const std::vector<std::size_t>& cluster_counts,
                                                   const std::vector<double>& block_means)
{
    const auto& dims = y.dims();
    const std::size_t rank = dims.size();
    const std::size_t ck = cluster_counts[mode];

    std::vector<std::size_t> other_modes;
    std::vector<std::size_t> other_dims;
    std::size_t slice_size = 1;
    for (std::size_t k = 0; k < rank; ++k) {
        if (k == mode) continue;
        other_modes.push_back(k);
        other_dims.push_back(dims[k]);
        slice_size *= dims[k];
    }

    std::vector<double> rows(ck * slice_size);
    std::vector<std::size_t> idx(other_modes.size(), 0);
    std::size_t pos = 0;
    do {
        for (std::size_t h = 0; h < ck; ++h) {
            std::size_t block = 0;
            std::size_t t = 0;
            for (std::size_t k = 0; k < rank; ++k) {
                const std::size_t label =
                    (k == mode) ? h : memberships[k][idx[t++]];
                block = block * cluster_counts[k] + label;
            }
            rows[h * slice_size + pos] = block_means[block];
        }
        ++pos;
    } while (next_multi_index(idx, std::span<const std::size_t>(other_dims)));
    return rows;
}

} // namespace detail

/// Medoid of every cluster as the member index whose raw slice is nearest to
/// the cluster's mean slice, ties toward the smallest index.
inline std::vector<std::vector<std::size_t>> nearest_to_centroid(
    const Tensor& y, const std::vector<std::vector<std::size_t>>& memberships)
{
    if (memberships.size() != y.rank()) {
        throw ShapeMismatch("nearest_to_centroid: memberships do not match tensor rank");
    }
    const std::size_t rank = y.rank();
    std::vector<std::vector<std::size_t>> medoids(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        const std::size_t dk = y.dims()[k];
        if (memberships[k].size() != dk) {
            throw ShapeMismatch("nearest_to_centroid: memberships do not match tensor dimensions");
        }
        const std::size_t ck = *std::max_element(memberships[k].begin(), memberships[k].end()) + 1;
        const std::size_t slice_size = y.size() / dk;
        const std::vector<double> rows = detail::flatten_mode_slices(y, k);

        std::vector<double> mean(ck * slice_size, 0.0);
        std::vector<std::size_t> sizes(ck, 0);
        for (std::size_t l = 0; l < dk; ++l) {
            const double* src = rows.data() + l * slice_size;
            double* dst = mean.data() + memberships[k][l] * slice_size;
            for (std::size_t t = 0; t < slice_size; ++t) dst[t] += src[t];
            sizes[memberships[k][l]] += 1;
        }
        for (std::size_t h = 0; h < ck; ++h) {
            if (sizes[h] == 0) {
                throw EmptyCluster("nearest_to_centroid: cluster " + std::to_string(h) +
                                   " of mode " + std::to_string(k) + " has no members");
            }
            double* dst = mean.data() + h * slice_size;
            for (std::size_t t = 0; t < slice_size; ++t) dst[t] /= static_cast<double>(sizes[h]);
        }

        medoids[k].assign(ck, dk);
        std::vector<double> best(ck, std::numeric_limits<double>::infinity());
        for (std::size_t l = 0; l < dk; ++l) {
            const std::size_t h = memberships[k][l];
            const double d = detail::row_distance(rows.data() + l * slice_size,
                                                  mean.data() + h * slice_size, slice_size);
            if (d < best[h]) {
                best[h] = d;
                medoids[k][h] = l;
            }
        }
    }
    return medoids;
}

/// Block-coordinate refinement of the memberships against the block-mean
/// tensor: per mode, every index moves to the cluster whose centroid-smoothed
/// slice is nearest to its raw slice (synchronous within the mode), and the
/// block means are recomputed after each mode. Stops at a fixed point or
/// after max_iters passes. An emptied cluster is re-seeded with the index
/// farthest from its own cluster's centroid; repairs are appended to `trace`.
inline std::size_t tbm_refine(const Tensor& y, const ClusterSpec& c,
                              std::vector<std::vector<std::size_t>>& memberships,
                              std::vector<TraceRecord>& trace, std::size_t max_iters = 50)
{
    c.validate_for(y.dims());
    const std::size_t rank = y.rank();
    const auto& counts = c.counts;

    std::vector<double> block_sum;
    std::vector<std::size_t> block_n;
    std::vector<double> block_mean;
    const auto refresh_means = [&] {
        detail::block_sums(y, memberships, counts, block_sum, block_n);
        block_mean.assign(block_sum.size(), 0.0);
        for (std::size_t b = 0; b < block_sum.size(); ++b) {
            if (block_n[b] > 0) block_mean[b] = block_sum[b] / static_cast<double>(block_n[b]);
        }
    };

    std::size_t pass = 0;
    for (; pass < max_iters; ++pass) {
        bool changed = false;
        for (std::size_t k = 0; k < rank; ++k) {
            refresh_means();
            const std::size_t dk = y.dims()[k];
            const std::size_t ck = counts[k];
            const std::size_t slice_size = y.size() / dk;
            const std::vector<double> rows = detail::flatten_mode_slices(y, k);
            const std::vector<double> cand =
                detail::centroid_candidate_rows(y, k, memberships, counts, block_mean);

            std::vector<std::size_t> next(dk);
            for (std::size_t l = 0; l < dk; ++l) {
                std::size_t best = 0;
                double best_d = detail::row_distance(rows.data() + l * slice_size, cand.data(),
                                                     slice_size);
                for (std::size_t h = 1; h < ck; ++h) {
                    const double d = detail::row_distance(rows.data() + l * slice_size,
                                                          cand.data() + h * slice_size, slice_size);
                    if (d < best_d) {
                        best_d = d;
                        best = h;
                    }
                }
                next[l] = best;
            }
            if (next != memberships[k]) changed = true;
            memberships[k] = std::move(next);

            // Re-seed emptied clusters with the member farthest from its own
            // cluster's centroid-smoothed slice.
            std::vector<std::size_t> sizes(ck, 0);
            for (std::size_t label : memberships[k]) sizes[label] += 1;
            for (std::size_t h = 0; h < ck; ++h) {
                if (sizes[h] > 0) continue;
                refresh_means();
                const std::vector<double> cur_cand =
                    detail::centroid_candidate_rows(y, k, memberships, counts, block_mean);
                std::size_t worst = dk;
                double worst_d = -1.0;
                for (std::size_t l = 0; l < dk; ++l) {
                    if (sizes[memberships[k][l]] < 2) continue;
                    const double d = detail::row_distance(
                        rows.data() + l * slice_size,
                        cur_cand.data() + memberships[k][l] * slice_size, slice_size);
                    if (d > worst_d) {
                        worst_d = d;
                        worst = l;
                    }
                }
                sizes[memberships[k][worst]] -= 1;
                memberships[k][worst] = h;
                sizes[h] = 1;
                changed = true;
                refresh_means();
                Tensor centroid = centroid_tensor(y, memberships);
                trace.push_back({TraceRecord::Kind::reseed, pass + 1, k, h, worst,
                                 dissim(y, centroid)});
            }
        }
        if (!changed) break;
    }
    return pass;
}

/// TBM baseline: per-mode k-means on the flattened mode slices initializes
/// the memberships, block-coordinate refinement polishes them, and medoids
/// are extracted post hoc as the nearest index to each cluster centroid.
inline Clustering tbm_fit(const Tensor& y, const ClusterSpec& c, const TbmConfig& cfg = {})
{
    c.validate_for(y.dims());
    const std::size_t rank = y.rank();

    Clustering cl;
    cl.memberships.resize(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        const std::size_t dk = y.dims()[k];
        const std::size_t ck = c.counts[k];
        const std::size_t slice_size = y.size() / dk;
        const std::vector<double> rows = detail::flatten_mode_slices(y, k);
        detail::RowKMeans kmeans(rows, dk, slice_size);

        std::mt19937_64 rng(detail::splitmix64(cfg.seed + 0x9E3779B97F4A7C15ULL * (k + 1)));
        std::vector<std::size_t> best_labels;
        double best_wcss = std::numeric_limits<double>::infinity();
        for (std::size_t restart = 0; restart < cfg.kmeans_restarts; ++restart) {
            double wcss = 0.0;
            std::vector<std::size_t> labels = kmeans.run(ck, cfg.kmeans_max_iters, rng, wcss);
            if (wcss < best_wcss) {
                best_wcss = wcss;
                best_labels = std::move(labels);
            }
        }
        cl.memberships[k] = std::move(best_labels);
    }

    tbm_refine(y, c, cl.memberships, cl.trace, cfg.max_iters);

    cl.medoids = nearest_to_centroid(y, cl.memberships);
    cl.objective = detail::clustering_objective(y, cl);
    return cl;
}

} // namespace mwpam
