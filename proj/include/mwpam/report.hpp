#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "mwpam/clustering.hpp"
#include "mwpam/pam.hpp"
#include "mwpam/tensor.hpp"

namespace mwpam {

/// One block of the estimated structure: the Cartesian product of one
/// cluster per mode, its block-wise mean (centroid score), the entry value at
/// the cross-mode medoid coordinates (medoid score), and the per-mode member
/// counts.
struct BlockSummary {
    std::vector<std::size_t> block_labels;
    double centroid_score = 0.0;
    double medoid_score = 0.0;
    std::vector<std::size_t> member_counts;
};

struct EvalReport {
    double rmse_m = 0.0;
    double rmse_c = 0.0;
    double objective = 0.0;
    std::vector<BlockSummary> blocks;                    // sorted by centroid score ascending
    std::vector<std::vector<std::size_t>> cluster_order; // per mode, labels by ascending mean score
};

namespace detail {

inline std::size_t block_count(const std::vector<std::vector<std::size_t>>& memberships,
                               std::vector<std::size_t>& counts_out)
{
    counts_out.clear();
    std::size_t blocks = 1;
    for (const auto& m : memberships) {
        const std::size_t ck = *std::max_element(m.begin(), m.end()) + 1;
        counts_out.push_back(ck);
        blocks *= ck;
    }
    return blocks;
}

/// Accumulates the sum and count of y over every block, indexed by the
/// mixed-radix block id of the per-mode labels.
inline void block_sums(const Tensor& y, const std::vector<std::vector<std::size_t>>& memberships,
                       const std::vector<std::size_t>& cluster_counts, std::vector<double>& sums,
                       std::vector<std::size_t>& counts)
{
    const std::size_t blocks =
        std::accumulate(cluster_counts.begin(), cluster_counts.end(), std::size_t{1},
                        [](std::size_t a, std::size_t b) { return a * b; });
    sums.assign(blocks, 0.0);
    counts.assign(blocks, 0);
    const auto& dims = y.dims();
    std::vector<std::size_t> idx(y.rank(), 0);
    std::size_t e = 0;
    do {
        std::size_t block = 0;
        for (std::size_t k = 0; k < y.rank(); ++k) {
            block = block * cluster_counts[k] + memberships[k][idx[k]];
        }
        sums[block] += y[e];
        counts[block] += 1;
        ++e;
    } while (next_multi_index(idx, dims));
}

} // namespace detail

/// Centroid tensor: every entry is the mean of y over its block.
inline Tensor centroid_tensor(const Tensor& y, const std::vector<std::vector<std::size_t>>& memberships)
{
    if (memberships.size() != y.rank()) {
        throw ShapeMismatch("centroid_tensor: memberships do not match tensor rank");
    }
    for (std::size_t k = 0; k < y.rank(); ++k) {
        if (memberships[k].size() != y.dims()[k]) {
            throw ShapeMismatch("centroid_tensor: memberships do not match tensor dimensions");
        }
    }
    std::vector<std::size_t> cluster_counts;
    detail::block_count(memberships, cluster_counts);
    std::vector<double> sums;
    std::vector<std::size_t> counts;
    detail::block_sums(y, memberships, cluster_counts, sums, counts);

    std::vector<double> means(sums.size(), 0.0);
    for (std::size_t b = 0; b < sums.size(); ++b) {
        if (counts[b] > 0) means[b] = sums[b] / static_cast<double>(counts[b]);
    }

    const auto& dims = y.dims();
    std::vector<double> out(y.size());
    std::vector<std::size_t> idx(y.rank(), 0);
    std::size_t e = 0;
    do {
        std::size_t block = 0;
        for (std::size_t k = 0; k < y.rank(); ++k) {
            block = block * cluster_counts[k] + memberships[k][idx[k]];
        }
        out[e++] = means[block];
    } while (detail::next_multi_index(idx, dims));
    return Tensor(dims, std::move(out));
}

/// Root mean squared error: dissim(y, yhat) / sqrt(number of entries).
inline double rmse(const Tensor& y, const Tensor& yhat)
{
    return dissim(y, yhat) / std::sqrt(static_cast<double>(y.size()));
}

/// Reconstruction metrics and block summaries for a clustering. Cluster
/// sorting by mean score affects only the reported order, never the labels.
inline EvalReport evaluate(const Tensor& y, const Clustering& cl)
{
    validate_clustering(cl, y.dims());
    EvalReport report;

    const Tensor med = medoid_tensor(y, cl);
    const double med_dissim = dissim(y, med);
    const double root_n = std::sqrt(static_cast<double>(y.size()));
    report.objective = med_dissim;
    report.rmse_m = med_dissim / root_n;
    report.rmse_c = rmse(y, centroid_tensor(y, cl.memberships));

    std::vector<std::size_t> cluster_counts(cl.rank());
    for (std::size_t k = 0; k < cl.rank(); ++k) cluster_counts[k] = cl.medoids[k].size();
    std::vector<double> sums;
    std::vector<std::size_t> counts;
    detail::block_sums(y, cl.memberships, cluster_counts, sums, counts);

    std::vector<std::vector<std::size_t>> member_counts(cl.rank());
    for (std::size_t k = 0; k < cl.rank(); ++k) {
        member_counts[k].assign(cluster_counts[k], 0);
        for (std::size_t label : cl.memberships[k]) member_counts[k][label] += 1;
    }

    std::vector<std::size_t> labels(cl.rank(), 0);
    std::span<const std::size_t> label_dims(cluster_counts.data(), cluster_counts.size());
    std::size_t block = 0;
    do {
        BlockSummary summary;
        summary.block_labels = labels;
        summary.centroid_score = sums[block] / static_cast<double>(counts[block]);
        std::vector<std::size_t> medoid_coords(cl.rank());
        summary.member_counts.resize(cl.rank());
        for (std::size_t k = 0; k < cl.rank(); ++k) {
            medoid_coords[k] = cl.medoids[k][labels[k]];
            summary.member_counts[k] = member_counts[k][labels[k]];
        }
        summary.medoid_score = y.at(medoid_coords);
        report.blocks.push_back(std::move(summary));
        ++block;
    } while (detail::next_multi_index(labels, label_dims));

    std::stable_sort(report.blocks.begin(), report.blocks.end(),
                     [](const BlockSummary& a, const BlockSummary& b) {
                         if (a.centroid_score != b.centroid_score) {
                             return a.centroid_score < b.centroid_score;
                         }
                         return a.block_labels < b.block_labels;
                     });

    // Mean score of a cluster: mean of y over all entries whose mode-k label
    // is that cluster, other modes unrestricted.
    report.cluster_order.resize(cl.rank());
    for (std::size_t k = 0; k < cl.rank(); ++k) {
        const std::size_t ck = cluster_counts[k];
        std::vector<double> mean_score(ck, 0.0);
        std::vector<double> cluster_sum(ck, 0.0);
        std::vector<std::size_t> cluster_n(ck, 0);
        const std::size_t dk = y.dims()[k];
        std::size_t outer = 1, inner = 1;
        for (std::size_t k2 = 0; k2 < k; ++k2) outer *= y.dims()[k2];
        for (std::size_t k2 = k + 1; k2 < y.rank(); ++k2) inner *= y.dims()[k2];
        const std::vector<double>& v = y.values();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < dk; ++i) {
                const std::size_t label = cl.memberships[k][i];
                const double* row = v.data() + (o * dk + i) * inner;
                for (std::size_t t = 0; t < inner; ++t) cluster_sum[label] += row[t];
                cluster_n[label] += inner;
            }
        }
        for (std::size_t j = 0; j < ck; ++j) {
            mean_score[j] = cluster_sum[j] / static_cast<double>(cluster_n[j]);
        }
        std::vector<std::size_t>& order = report.cluster_order[k];
        order.resize(ck);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (mean_score[a] != mean_score[b]) return mean_score[a] < mean_score[b];
            return a < b;
        });
    }
    return report;
}

/// Adjusted Rand index between two label vectors, from the pair-counting
/// contingency table. 1.0 iff the partitions are identical up to relabeling.
inline double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b)
{
    if (a.size() != b.size()) {
        throw std::invalid_argument("adjusted_rand_index: label vectors differ in length");
    }
    if (a.empty()) return 1.0;
    const std::size_t ka = *std::max_element(a.begin(), a.end()) + 1;
    const std::size_t kb = *std::max_element(b.begin(), b.end()) + 1;
    std::vector<std::size_t> table(ka * kb, 0);
    for (std::size_t i = 0; i < a.size(); ++i) table[a[i] * kb + b[i]] += 1;

    auto pairs = [](std::size_t n) {
        return n < 2 ? 0.0 : static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    };

    double sum_cells = 0.0;
    for (std::size_t n : table) sum_cells += pairs(n);
    double sum_rows = 0.0;
    for (std::size_t i = 0; i < ka; ++i) {
        std::size_t row = 0;
        for (std::size_t j = 0; j < kb; ++j) row += table[i * kb + j];
        sum_rows += pairs(row);
    }
    double sum_cols = 0.0;
    for (std::size_t j = 0; j < kb; ++j) {
        std::size_t col = 0;
        for (std::size_t i = 0; i < ka; ++i) col += table[i * kb + j];
        sum_cols += pairs(col);
    }
    const double total = pairs(a.size());
    const double expected = sum_rows * sum_cols / total;
    const double maximum = (sum_rows + sum_cols) / 2.0;
    if (maximum == expected) return 1.0;  // both partitions trivial
    return (sum_cells - expected) / (maximum - expected);
}

} // namespace mwpam
