#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "mwpam/clustering.hpp"
#include "mwpam/pam.hpp"
#include "mwpam/tensor.hpp"

namespace mwpam {

class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Planted-block generation parameters. block_means has shape
/// clusters.counts; entry (j_1..j_K) is the mean of the block made of the
/// j_k-th cluster of every mode.
struct SyntheticSpec {
    std::vector<std::size_t> dims;
    ClusterSpec clusters;
    Tensor block_means;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    enum class MembershipMode { balanced, random };
    MembershipMode membership_mode = MembershipMode::balanced;
};

struct PlantedTensor {
    Tensor tensor;
    std::vector<std::vector<std::size_t>> memberships;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Standard normal draws from mt19937_64 via Box-Muller. The generator and
/// the transform are both pinned here so fixtures do not depend on the
/// standard library's unspecified normal_distribution.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

    double next()
    {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
        cached_ = radius * std::sin(angle);
        have_cached_ = true;
        return radius * std::cos(angle);
    }

private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

/// Balanced contiguous labels: cluster j gets d/c indices plus one of the
/// first d%c remainders.
inline std::vector<std::size_t> balanced_labels(std::size_t d, std::size_t c)
{
    std::vector<std::size_t> labels;
    labels.reserve(d);
    const std::size_t base = d / c;
    const std::size_t rem = d % c;
    for (std::size_t j = 0; j < c; ++j) {
        const std::size_t size = base + (j < rem ? 1 : 0);
        labels.insert(labels.end(), size, j);
    }
    return labels;
}

/// Medoid-smoothed mode-k slice at index p: the slice whose mode-k
/// coordinate stays p while every other coordinate is replaced by its
/// cluster's medoid under `state`. Shape matches mode_slice output.
inline Tensor smoothed_slice(const Tensor& y, std::size_t mode, std::size_t p, const Clustering& state)
{
    const auto& dims = y.dims();
    const std::vector<std::size_t> strides = y.strides();
    std::vector<std::size_t> out_dims = dims;
    out_dims[mode] = 1;

    std::size_t n = 1;
    for (std::size_t d : out_dims) n *= d;
    std::vector<double> out(n);
    std::vector<std::size_t> idx(dims.size(), 0);
    std::size_t e = 0;
    do {
        std::size_t off = p * strides[mode];
        for (std::size_t k = 0; k < dims.size(); ++k) {
            if (k == mode) continue;
            off += state.medoids[k][state.memberships[k][idx[k]]] * strides[k];
        }
        out[e++] = y[off];
    } while (next_multi_index(idx, out_dims));
    return Tensor(std::move(out_dims), std::move(out));
}

/// Membership of every mode-k index per the swap rule, computed from
/// materialized slices: a medoid gets its own cluster, everything else the
/// closest smoothed medoid slice, ties toward the smallest cluster label.
inline std::vector<std::size_t> memberships_by_rule(const Tensor& y, std::size_t mode,
                                                    const std::vector<std::size_t>& medoids,
                                                    const Clustering& state)
{
    const std::size_t dk = y.dims()[mode];
    const std::size_t ck = medoids.size();
    std::vector<Tensor> smoothed;
    smoothed.reserve(ck);
    for (std::size_t h = 0; h < ck; ++h) {
        smoothed.push_back(smoothed_slice(y, mode, medoids[h], state));
    }
    std::vector<std::size_t> own(dk, ck);
    for (std::size_t h = 0; h < ck; ++h) own[medoids[h]] = h;

    std::vector<std::size_t> m(dk);
    for (std::size_t l = 0; l < dk; ++l) {
        if (own[l] < ck) {
            m[l] = own[l];
            continue;
        }
        const Tensor raw = mode_slice(y, mode, l);
        std::size_t best = 0;
        double best_dist = dissim(raw, smoothed[0]);
        for (std::size_t h = 1; h < ck; ++h) {
            const double d = dissim(raw, smoothed[h]);
            if (d < best_dist) {
                best_dist = d;
                best = h;
            }
        }
        m[l] = best;
    }
    return m;
}

inline std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b)
{
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
        return std::numeric_limits<std::uint64_t>::max();
    }
    return a * b;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k)
{
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        result = saturating_mul(result, n - k + i) / i;
    }
    return result;
}

inline bool next_combination(std::vector<std::size_t>& comb, std::size_t n)
{
    const std::size_t k = comb.size();
    for (std::size_t t = k; t-- > 0;) {
        if (comb[t] < n - (k - t)) {
            ++comb[t];
            for (std::size_t u = t + 1; u < k; ++u) comb[u] = comb[u - 1] + 1;
            return true;
        }
    }
    return false;
}

} // namespace detail

/// Generates a planted-block tensor: entry = block mean + N(0, sigma^2)
/// noise from a seeded mt19937_64 / Box-Muller stream, drawn in row-major
/// entry order. Returns the tensor and the planted per-mode labels.
inline PlantedTensor generate(const SyntheticSpec& spec)
{
    spec.clusters.validate_for(spec.dims);
    if (spec.block_means.dims() != spec.clusters.counts) {
        throw InvalidClusterSpec("generate: block_means shape does not match cluster counts");
    }
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
        throw InvalidClusterSpec("generate: noise_sigma must be finite and non-negative");
    }

    const std::size_t rank = spec.dims.size();
    std::vector<std::vector<std::size_t>> labels(rank);
    std::mt19937_64 label_rng(detail::splitmix64(spec.seed));
    for (std::size_t k = 0; k < rank; ++k) {
        labels[k] = detail::balanced_labels(spec.dims[k], spec.clusters.counts[k]);
        if (spec.membership_mode == SyntheticSpec::MembershipMode::random) {
            // Fisher-Yates on the balanced labels: random placement, still no
            // empty clusters.
            for (std::size_t i = labels[k].size(); i-- > 1;) {
                const std::size_t j = static_cast<std::size_t>(label_rng() % (i + 1));
                std::swap(labels[k][i], labels[k][j]);
            }
        }
    }

    detail::GaussianSampler noise(detail::splitmix64(spec.seed ^ 0x9E3779B97F4A7C15ULL));
    std::size_t n = 1;
    for (std::size_t d : spec.dims) n *= d;
    std::vector<double> values(n);
    std::vector<std::size_t> idx(rank, 0);
    std::vector<std::size_t> block_idx(rank, 0);
    std::size_t e = 0;
    do {
        for (std::size_t k = 0; k < rank; ++k) block_idx[k] = labels[k][idx[k]];
        double v = spec.block_means.at(block_idx);
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.next();
        values[e++] = v;
    } while (detail::next_multi_index(idx, spec.dims));

    return PlantedTensor{Tensor(spec.dims, std::move(values)), std::move(labels)};
}

/// Grid of evenly spaced block means, gap apart along every mode:
/// mean(j_1..j_K) = sum_k j_k * gap. Per-mode means are pairwise distinct.
inline Tensor spaced_block_means(const ClusterSpec& c, double gap)
{
    std::size_t n = 1;
    for (std::size_t ck : c.counts) n *= ck;
    std::vector<double> means(n);
    std::vector<std::size_t> idx(c.counts.size(), 0);
    std::size_t e = 0;
    do {
        double v = 0.0;
        for (std::size_t j : idx) v += static_cast<double>(j) * gap;
        means[e++] = v;
    } while (detail::next_multi_index(idx, c.counts));
    return Tensor(c.counts, std::move(means));
}

/// Exhaustive search over all per-mode medoid subsets. For each combination,
/// memberships follow the swap rule with coordinate-wise alternating
/// assignment (raw-slice nearest medoid to start, then per-mode passes to a
/// fixed point or a cap of 10), and the configuration is scored by the
/// medoid-tensor dissimilarity. Refuses when the number of combinations
/// exceeds the budget.
inline Clustering exhaustive_global_optimum(const Tensor& y, const ClusterSpec& c,
                                            std::uint64_t budget = 10'000'000)
{
    c.validate_for(y.dims());
    const std::size_t rank = y.rank();

    std::uint64_t combos = 1;
    for (std::size_t k = 0; k < rank; ++k) {
        combos = detail::saturating_mul(combos, detail::binomial(y.dims()[k], c.counts[k]));
    }
    if (combos > budget) {
        throw BudgetExceeded("exhaustive search needs " + std::to_string(combos) +
                             " medoid combinations, budget is " + std::to_string(budget));
    }

    // Raw slice distances per mode, for the initial nearest-medoid labels.
    std::vector<std::vector<double>> raw_dist(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        raw_dist[k] = detail::slice_distance_matrix(y, k);
    }

    std::vector<std::vector<std::size_t>> combs(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        combs[k].resize(c.counts[k]);
        std::iota(combs[k].begin(), combs[k].end(), std::size_t{0});
    }

    std::optional<Clustering> best;
    while (true) {
        Clustering cand;
        cand.medoids = combs;
        cand.memberships.resize(rank);
        for (std::size_t k = 0; k < rank; ++k) {
            const std::size_t dk = y.dims()[k];
            const std::size_t ck = c.counts[k];
            std::vector<std::size_t> own(dk, ck);
            for (std::size_t h = 0; h < ck; ++h) own[combs[k][h]] = h;
            auto& m = cand.memberships[k];
            m.resize(dk);
            for (std::size_t l = 0; l < dk; ++l) {
                if (own[l] < ck) {
                    m[l] = own[l];
                    continue;
                }
                std::size_t bh = 0;
                double bd = raw_dist[k][l * dk + combs[k][0]];
                for (std::size_t h = 1; h < ck; ++h) {
                    const double d = raw_dist[k][l * dk + combs[k][h]];
                    if (d < bd) {
                        bd = d;
                        bh = h;
                    }
                }
                m[l] = bh;
            }
        }

        for (std::size_t pass = 0; pass < 10; ++pass) {
            bool changed = false;
            for (std::size_t k = 0; k < rank; ++k) {
                auto m = detail::memberships_by_rule(y, k, cand.medoids[k], cand);
                if (m != cand.memberships[k]) {
                    cand.memberships[k] = std::move(m);
                    changed = true;
                }
            }
            if (!changed) break;
        }

        cand.objective = dissim(y, medoid_tensor(y, cand));
        if (!best || cand.objective < best->objective) {
            best = std::move(cand);
        }

        std::size_t k = rank;
        while (k-- > 0) {
            if (detail::next_combination(combs[k], y.dims()[k])) break;
            combs[k].resize(c.counts[k]);
            std::iota(combs[k].begin(), combs[k].end(), std::size_t{0});
            if (k == 0) return *best;
        }
    }
}

struct SwapViolation {
    std::size_t mode = 0;
    std::size_t swapped_out = 0;
    std::size_t swapped_in = 0;
    double objective = 0.0;
};

struct LocalOptimality {
    bool optimal = true;
    std::size_t violations = 0;
    double baseline = 0.0;               // recomputed objective of the input clustering
    std::optional<SwapViolation> worst;  // the largest-improvement violating swap
};

/// Exhaustive single-swap scan: true iff no (mode, medoid, non-medoid) swap,
/// scored exactly as the swap step scores candidates, yields an objective
/// strictly below the clustering's objective. The baseline is recomputed from
/// the medoid tensor rather than read from cl.objective, so a perturbed
/// clustering with a stale objective is still scanned honestly.
inline LocalOptimality verify_local_optimum(const Tensor& y, const ClusterSpec& c, const Clustering& cl)
{
    validate_clustering(cl, y.dims(), c);
    LocalOptimality result;
    result.baseline = dissim(y, medoid_tensor(y, cl));
    for (std::size_t k = 0; k < y.rank(); ++k) {
        const std::size_t dk = y.dims()[k];
        std::vector<bool> is_medoid(dk, false);
        for (std::size_t r : cl.medoids[k]) is_medoid[r] = true;
        for (std::size_t i = 0; i < dk; ++i) {
            if (!is_medoid[i]) continue;
            for (std::size_t j = 0; j < dk; ++j) {
                if (is_medoid[j]) continue;
                Clustering cand = cl;
                cand.medoids[k] = replace(cl.medoids[k], i, j);
                cand.memberships[k] = detail::memberships_by_rule(y, k, cand.medoids[k], cl);
                const double objective = dissim(y, medoid_tensor(y, cand));
                if (objective < result.baseline) {
                    result.optimal = false;
                    result.violations += 1;
                    if (!result.worst || objective < result.worst->objective) {
                        result.worst = SwapViolation{k, i, j, objective};
                    }
                }
            }
        }
    }
    return result;
}

} // namespace mwpam
