#pragma once

#include <cstdint>
#include <vector>

#include "confclust/core.hpp"

namespace confclust {

/// A bijection on {0, ..., K-1}; map[k] is the image of k.
class Permutation {
public:
    Permutation() = default;
    explicit Permutation(std::vector<int> map);
    static Permutation identity(int K);

    int size() const noexcept { return static_cast<int>(map_.size()); }
    int operator()(int k) const { return map_[static_cast<std::size_t>(k)]; }
    const std::vector<int>& map() const noexcept { return map_; }
    Permutation inverse() const;
    Labeling apply(const Labeling& y) const;

    friend bool operator==(const Permutation&, const Permutation&) = default;
    friend auto operator<=>(const Permutation& a, const Permutation& b) { return a.map_ <=> b.map_; }

private:
    std::vector<int> map_;
};

/// Square matrix of exact integer costs; cost(k, j) is the price of sending k to j.
class CostMatrix {
public:
    explicit CostMatrix(int K) : K_(K), c_(static_cast<std::size_t>(K) * static_cast<std::size_t>(K), 0) {}
    CostMatrix(int K, std::vector<std::int64_t> row_major);

    int K() const noexcept { return K_; }
    std::int64_t& operator()(int k, int j) { return c_[static_cast<std::size_t>(k * K_ + j)]; }
    std::int64_t operator()(int k, int j) const { return c_[static_cast<std::size_t>(k * K_ + j)]; }
    std::int64_t cost(const Permutation& s) const;

private:
    int K_;
    std::vector<std::int64_t> c_;
};

/// cost(k, j) = #{i : clustered_i = k, predicted_i != j}.
CostMatrix build_confusion_cost(const Labeling& predicted, const Labeling& clustered, int K);

/// Minimum-cost assignment (Hungarian method); among optimal permutations the
/// lexicographically smallest map is returned.
Permutation solve_assignment(const CostMatrix& cost);

/// Exhaustive search with the same tie rule; K <= 8.
Permutation brute_force_assignment(const CostMatrix& cost);

/// Minimum-cost assignment for real-valued costs (no tie refinement). Row-major K x K.
Permutation solve_assignment_real(const Matrix& cost);

}  // namespace confclust
