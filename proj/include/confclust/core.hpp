#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "confclust/errors.hpp"

namespace confclust {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

//==============================================================================
// Random streams
//==============================================================================

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// A (seed, stream) pair. Every random draw in the library is a function of one
/// of these; child() derives statistically independent sub-streams by tag.
struct RandomSeed {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    constexpr RandomSeed child(std::uint64_t tag) const noexcept {
        return {seed, mix64(stream ^ mix64(tag + 0x632be59bd9b4e019ULL))};
    }

    friend constexpr bool operator==(const RandomSeed&, const RandomSeed&) = default;
};

/// Counter-based 64-bit generator: output i is mix64(key + i * golden).
/// Satisfies UniformRandomBitGenerator so it plugs into <random> distributions.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(RandomSeed s) noexcept : key_(mix64(s.seed) ^ mix64(~s.stream)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        counter_ += 0x9e3779b97f4a7c15ULL;
        return mix64(key_ + counter_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(*this); }

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(*this); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

//==============================================================================
// Domain types
//==============================================================================

/// A point on the probability simplex. Construction renormalizes when the entries
/// sum to within 1e-6 of one and rejects anything further off.
class ProbVector {
public:
    static constexpr double kSumTolerance = 1e-6;

    ProbVector() = default;
    explicit ProbVector(std::vector<double> entries);
    explicit ProbVector(std::span<const double> entries)
        : ProbVector(std::vector<double>(entries.begin(), entries.end())) {}
    ProbVector(std::initializer_list<double> entries) : ProbVector(std::vector<double>(entries)) {}

    static ProbVector uniform(int K);
    static ProbVector one_hot(int K, int label);
    /// Softmax of arbitrary finite scores, evaluated stably.
    static ProbVector softmax(std::span<const double> scores);
    /// Normalizes exp(log_weights), tolerating -inf entries (but not all of them).
    static ProbVector from_log_weights(std::span<const double> log_weights);

    int size() const noexcept { return static_cast<int>(p_.size()); }
    double operator[](int k) const { return p_[static_cast<std::size_t>(k)]; }
    std::span<const double> values() const noexcept { return p_; }
    /// Label of the largest entry; ties go to the smallest label.
    int argmax() const;

    friend bool operator==(const ProbVector&, const ProbVector&) = default;

private:
    std::vector<double> p_;
};

/// n observations in R^p, stored as an n x p matrix.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(Matrix rows);

    int n() const noexcept { return static_cast<int>(x_.rows()); }
    int p() const noexcept { return static_cast<int>(x_.cols()); }
    const Matrix& matrix() const noexcept { return x_; }
    Vector row(int i) const { return x_.row(i).transpose(); }
    Dataset subset(std::span<const int> indices) const;

private:
    Matrix x_;
};

/// Cluster labels in {0, ..., K-1}. (Files and printed output use 1-based labels.)
class Labeling {
public:
    Labeling() = default;
    Labeling(std::vector<int> labels, int K);

    int K() const noexcept { return K_; }
    int size() const noexcept { return static_cast<int>(labels_.size()); }
    int operator[](int i) const { return labels_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    Labeling subset(std::span<const int> indices) const;

    friend bool operator==(const Labeling&, const Labeling&) = default;

private:
    std::vector<int> labels_;
    int K_ = 0;
};

struct SplitIndices {
    std::vector<int> train;
    std::vector<int> calib;
};

struct SimplexRanks {
    std::vector<double> sorted;  ///< non-increasing
    std::vector<int> order;      ///< order[r] = label at position r
    std::vector<int> rank;       ///< rank[k] = position of label k in sorted (0 = largest)
};

//==============================================================================
// Operations
//==============================================================================

/// Uniformly random partition with round(train_fraction * n) training indices.
SplitIndices split_indices(int n, double train_fraction, RandomSeed seed);

/// Inverse-CDF draw on a single uniform variate from Rng(seed).
int sample_categorical(const ProbVector& p, RandomSeed seed);
int sample_categorical(const ProbVector& p, Rng& rng);

/// Descending order statistics; ties broken by ascending label index.
SimplexRanks simplex_ranks(const ProbVector& p);

/// log(sum(exp(v))) without overflow; -inf when every entry is -inf.
double log_sum_exp(std::span<const double> v);

}  // namespace confclust
