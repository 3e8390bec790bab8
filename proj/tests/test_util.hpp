#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mwpam/tensor.hpp"

namespace test_util {

/// Seeded tensor with entries uniform in [0, range).
inline mwpam::Tensor random_tensor(std::vector<std::size_t> dims, std::uint64_t seed,
                                   double range = 10.0)
{
    std::mt19937_64 rng(seed);
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    std::vector<double> values(n);
    for (double& v : values) {
        v = range * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }
    return mwpam::Tensor(std::move(dims), std::move(values));
}

inline std::vector<std::size_t> random_multi_index(const std::vector<std::size_t>& dims,
                                                   std::mt19937_64& rng)
{
    std::vector<std::size_t> idx(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) {
        idx[k] = static_cast<std::size_t>(rng() % dims[k]);
    }
    return idx;
}

} // namespace test_util
