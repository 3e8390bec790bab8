#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mwpam/tensor.hpp"
#include "test_util.hpp"

using namespace mwpam;

TEST_CASE("tensor construction validates shape and entries")
{
    REQUIRE_NOTHROW(Tensor({2, 3}, std::vector<double>(6, 1.0)));
    REQUIRE_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 1.0)), ShapeMismatch);
    REQUIRE_THROWS_AS(Tensor({}, {}), ShapeMismatch);
    REQUIRE_THROWS_AS(Tensor({2, 0}, {}), ShapeMismatch);
    REQUIRE_THROWS_AS(Tensor({2}, {1.0, std::numeric_limits<double>::quiet_NaN()}), ShapeMismatch);
    REQUIRE_THROWS_AS(Tensor({2}, {1.0, std::numeric_limits<double>::infinity()}), ShapeMismatch);
}

TEST_CASE("subtensor with full index sets is the identity")
{
    const Tensor t = test_util::random_tensor({3, 4, 2}, 11);
    std::vector<IndexSet> sets;
    for (std::size_t k = 0; k < t.rank(); ++k) {
        sets.push_back(IndexSet::full(k, t.dims()[k]));
    }
    const Tensor s = subtensor(t, sets);
    REQUIRE(s.dims() == t.dims());
    REQUIRE(s.values() == t.values());
}

TEST_CASE("subtensor with singleton sets extracts one entry")
{
    const Tensor t = test_util::random_tensor({3, 4, 2}, 12);
    const std::vector<IndexSet> sets = {IndexSet::single(0, 2), IndexSet::single(1, 1),
                                        IndexSet::single(2, 0)};
    const Tensor s = subtensor(t, sets);
    REQUIRE(s.dims() == std::vector<std::size_t>{1, 1, 1});
    const std::vector<std::size_t> idx = {2, 1, 0};
    REQUIRE(s[0] == t.at(idx));
}

TEST_CASE("subtensor matches direct elementwise indexing")
{
    const Tensor t = test_util::random_tensor({3, 3}, 13);
    const std::vector<IndexSet> sets = {IndexSet{0, {0, 2}}, IndexSet{1, {1}}};
    const Tensor s = subtensor(t, sets);
    REQUIRE(s.dims() == std::vector<std::size_t>{2, 1});
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 1; ++b) {
            const std::vector<std::size_t> src = {sets[0].indices[a], sets[1].indices[b]};
            const std::vector<std::size_t> dst = {a, b};
            REQUIRE(s.at(dst) == t.at(src));
        }
    }
}

TEST_CASE("subtensor preserves the order of the index sets")
{
    const Tensor t({2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor s = subtensor(t, {IndexSet{0, {1, 0}}, IndexSet{1, {0, 1}}});
    REQUIRE(s.values() == std::vector<double>{3.0, 4.0, 1.0, 2.0});
}

TEST_CASE("subtensor rejects invalid index sets")
{
    const Tensor t = test_util::random_tensor({3, 3}, 14);
    REQUIRE_THROWS_AS(subtensor(t, {IndexSet{0, {0, 3}}, IndexSet::full(1, 3)}), InvalidIndexSet);
    REQUIRE_THROWS_AS(subtensor(t, {IndexSet{0, {1, 1}}, IndexSet::full(1, 3)}), InvalidIndexSet);
    REQUIRE_THROWS_AS(subtensor(t, {IndexSet::full(0, 3)}), InvalidIndexSet);
    REQUIRE_THROWS_AS(subtensor(t, {IndexSet::full(1, 3), IndexSet::full(0, 3)}), InvalidIndexSet);
}

TEST_CASE("narrowing an already narrowed tensor is idempotent")
{
    const Tensor t = test_util::random_tensor({4, 3, 2}, 15);
    const std::vector<IndexSet> sets = {IndexSet{0, {3, 1}}, IndexSet{1, {0, 2}},
                                        IndexSet{2, {1}}};
    const Tensor narrowed = subtensor(t, sets);
    std::vector<IndexSet> full;
    for (std::size_t k = 0; k < narrowed.rank(); ++k) {
        full.push_back(IndexSet::full(k, narrowed.dims()[k]));
    }
    const Tensor again = subtensor(narrowed, full);
    REQUIRE(again.dims() == narrowed.dims());
    REQUIRE(again.values() == narrowed.values());
}

TEST_CASE("mode_slice keeps a size-1 axis")
{
    const Tensor t({2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor s = mode_slice(t, 0, 1);
    REQUIRE(s.dims() == std::vector<std::size_t>{1, 2});
    REQUIRE(s.values() == std::vector<double>{3.0, 4.0});
}

TEST_CASE("mode_slice of a size-1 mode returns the whole tensor")
{
    const Tensor t = test_util::random_tensor({1, 4}, 16);
    const Tensor s = mode_slice(t, 0, 0);
    REQUIRE(s.dims() == t.dims());
    REQUIRE(s.values() == t.values());
}

TEST_CASE("mode_slice agrees with the subtensor definition")
{
    const Tensor t = test_util::random_tensor({4, 4, 4}, 17);
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < 4; ++i) {
            std::vector<IndexSet> sets;
            for (std::size_t k2 = 0; k2 < 3; ++k2) {
                sets.push_back(k2 == k ? IndexSet::single(k2, i) : IndexSet::full(k2, 4));
            }
            const Tensor expected = subtensor(t, sets);
            const Tensor got = mode_slice(t, k, i);
            REQUIRE(got.dims() == expected.dims());
            REQUIRE(got.values() == expected.values());
        }
    }
    REQUIRE_THROWS_AS(mode_slice(t, 0, 4), InvalidIndexSet);
    REQUIRE_THROWS_AS(mode_slice(t, 3, 0), InvalidIndexSet);
}

TEST_CASE("dissim of a tensor with itself is zero")
{
    const Tensor t = test_util::random_tensor({3, 5}, 18);
    REQUIRE(dissim(t, t) == 0.0);
}

TEST_CASE("dissim of all-ones vs all-zeros 2x2x2 is sqrt(8)")
{
    const Tensor ones({2, 2, 2}, std::vector<double>(8, 1.0));
    const Tensor zeros = Tensor::zeros({2, 2, 2});
    REQUIRE_THAT(dissim(ones, zeros), Catch::Matchers::WithinULP(std::sqrt(8.0), 2));
}

TEST_CASE("dissim matches an independent elementwise accumulation")
{
    const Tensor a = test_util::random_tensor({4, 3, 2}, 19);
    const Tensor b = test_util::random_tensor({4, 3, 2}, 20);
    double sum = 0.0;
    for (std::size_t e = a.size(); e-- > 0;) {  // reversed order on purpose
        sum += (a[e] - b[e]) * (a[e] - b[e]);
    }
    REQUIRE_THAT(dissim(a, b), Catch::Matchers::WithinRel(std::sqrt(sum), 1e-12));
}

TEST_CASE("dissim is symmetric and satisfies the triangle inequality")
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor a = test_util::random_tensor({3, 3, 3}, rng());
        const Tensor b = test_util::random_tensor({3, 3, 3}, rng());
        const Tensor c = test_util::random_tensor({3, 3, 3}, rng());
        REQUIRE(dissim(a, b) == dissim(b, a));
        REQUIRE(dissim(a, c) <= dissim(a, b) + dissim(b, c) + 1e-9);
    }
}

TEST_CASE("dissim is bit-identical across repeated calls")
{
    const Tensor a = test_util::random_tensor({5, 5, 5}, 22);
    const Tensor b = test_util::random_tensor({5, 5, 5}, 23);
    const double first = dissim(a, b);
    for (int i = 0; i < 5; ++i) {
        REQUIRE(dissim(a, b) == first);
    }
}

TEST_CASE("dissim rejects shape mismatches")
{
    const Tensor a = test_util::random_tensor({2, 3}, 24);
    const Tensor b = test_util::random_tensor({3, 2}, 25);
    REQUIRE_THROWS_AS(dissim(a, b), ShapeMismatch);
}

TEST_CASE("replace substitutes every occurrence")
{
    const std::vector<int> v = {5, 2, 5, 3, 4};
    REQUIRE(replace(v, 5, 0) == std::vector<int>{0, 2, 0, 3, 4});
}

TEST_CASE("replace with an absent value is the identity")
{
    const std::vector<int> v = {1, 2, 3};
    REQUIRE(replace(v, 9, 0) == v);
}

TEST_CASE("replace with equal values is the identity")
{
    const std::vector<int> v = {1, 2, 1};
    REQUIRE(replace(v, 1, 1) == v);
}

TEST_CASE("replace is idempotent when the new value was absent")
{
    std::mt19937_64 rng(26);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> v(8);
        for (int& x : v) x = static_cast<int>(rng() % 5);
        const int a = static_cast<int>(rng() % 5);
        const int b = 7;  // never present
        const auto once = replace(v, a, b);
        REQUIRE(replace(once, a, b) == once);
    }
}
