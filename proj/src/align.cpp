#include "confclust/align.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace confclust {

Permutation::Permutation(std::vector<int> map) : map_(std::move(map)) {
    std::vector<char> seen(map_.size(), 0);
    for (int v : map_) {
        if (v < 0 || v >= static_cast<int>(map_.size()) || seen[static_cast<std::size_t>(v)])
            throw InvalidArgument("Permutation: not a bijection");
        seen[static_cast<std::size_t>(v)] = 1;
    }
}

Permutation Permutation::identity(int K) {
    std::vector<int> m(static_cast<std::size_t>(K));
    std::iota(m.begin(), m.end(), 0);
    return Permutation(std::move(m));
}

Permutation Permutation::inverse() const {
    std::vector<int> inv(map_.size());
    for (std::size_t k = 0; k < map_.size(); ++k) inv[static_cast<std::size_t>(map_[k])] = static_cast<int>(k);
    return Permutation(std::move(inv));
}

Labeling Permutation::apply(const Labeling& y) const {
    if (y.K() != size()) throw InvalidArgument("Permutation::apply: K mismatch");
    std::vector<int> out(static_cast<std::size_t>(y.size()));
    for (int i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] = (*this)(y[i]);
    return Labeling(std::move(out), y.K());
}

CostMatrix::CostMatrix(int K, std::vector<std::int64_t> row_major) : K_(K), c_(std::move(row_major)) {
    if (c_.size() != static_cast<std::size_t>(K) * static_cast<std::size_t>(K))
        throw InvalidArgument("CostMatrix: not square");
}

std::int64_t CostMatrix::cost(const Permutation& s) const {
    if (s.size() != K_) throw InvalidArgument("CostMatrix::cost: size mismatch");
    std::int64_t total = 0;
    for (int k = 0; k < K_; ++k) total += (*this)(k, s(k));
    return total;
}

CostMatrix build_confusion_cost(const Labeling& predicted, const Labeling& clustered, int K) {
    if (predicted.size() != clustered.size()) throw InvalidArgument("build_confusion_cost: length mismatch");
    if (predicted.K() > K || clustered.K() > K) throw InvalidArgument("build_confusion_cost: labels exceed K");
    CostMatrix C(K);
    std::vector<std::int64_t> per_cluster(static_cast<std::size_t>(K), 0);
    for (int i = 0; i < clustered.size(); ++i) {
        ++per_cluster[static_cast<std::size_t>(clustered[i])];
        C(clustered[i], predicted[i]) -= 1;  // agreements, subtracted from the row total below
    }
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < K; ++j) C(k, j) += per_cluster[static_cast<std::size_t>(k)];
    return C;
}

namespace {

/// Shortest-augmenting-path Hungarian method with potentials, O(K^3). cost(r, c) on
/// an m x m problem; returns the column assigned to each row.
template <typename T, typename CostFn>
std::vector<int> hungarian(int m, CostFn cost) {
    const T inf = std::numeric_limits<T>::max() / 4;
    std::vector<T> u(static_cast<std::size_t>(m + 1), 0), v(static_cast<std::size_t>(m + 1), 0);
    std::vector<int> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
    for (int i = 1; i <= m; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<T> minv(static_cast<std::size_t>(m + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            T delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const T cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> assign(static_cast<std::size_t>(m), 0);
    for (int j = 1; j <= m; ++j) assign[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return assign;
}

/// Optimal cost of assigning `rows` to `cols` (equal sizes) under C.
std::int64_t restricted_optimum(const CostMatrix& C, const std::vector<int>& rows, const std::vector<int>& cols) {
    const int m = static_cast<int>(rows.size());
    if (m == 0) return 0;
    auto fn = [&](int r, int c) { return C(rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c)]); };
    const std::vector<int> a = hungarian<std::int64_t>(m, fn);
    std::int64_t total = 0;
    for (int r = 0; r < m; ++r) total += fn(r, a[static_cast<std::size_t>(r)]);
    return total;
}

}  // namespace

Permutation solve_assignment(const CostMatrix& C) {
    const int K = C.K();
    if (K == 0) return Permutation(std::vector<int>{});
    std::vector<int> all(static_cast<std::size_t>(K));
    std::iota(all.begin(), all.end(), 0);
    const std::int64_t best = restricted_optimum(C, all, all);

    // Fix rows in order to the smallest column that still admits an optimal completion.
    std::vector<int> map(static_cast<std::size_t>(K), -1);
    std::vector<int> free_cols = all;
    std::int64_t spent = 0;
    for (int k = 0; k < K; ++k) {
        std::vector<int> rest_rows(all.begin() + k + 1, all.end());
        for (std::size_t ci = 0; ci < free_cols.size(); ++ci) {
            const int j = free_cols[ci];
            std::vector<int> rest_cols = free_cols;
            rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(ci));
            if (spent + C(k, j) + restricted_optimum(C, rest_rows, rest_cols) == best) {
                map[static_cast<std::size_t>(k)] = j;
                spent += C(k, j);
                free_cols = std::move(rest_cols);
                break;
            }
        }
    }
    return Permutation(std::move(map));
}

Permutation brute_force_assignment(const CostMatrix& C) {
    const int K = C.K();
    if (K > 8) throw UnsupportedSize("brute_force_assignment: K > 8");
    std::vector<int> perm(static_cast<std::size_t>(K));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    std::int64_t best_cost = std::numeric_limits<std::int64_t>::max();
    do {
        std::int64_t c = 0;
        for (int k = 0; k < K; ++k) c += C(k, perm[static_cast<std::size_t>(k)]);
        if (c < best_cost) {  // strict: first hit in lexicographic order wins ties
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return Permutation(std::move(best));
}

Permutation solve_assignment_real(const Matrix& cost) {
    if (cost.rows() != cost.cols()) throw InvalidArgument("solve_assignment_real: not square");
    if (!cost.allFinite()) throw InvalidArgument("solve_assignment_real: non-finite cost");
    const int m = static_cast<int>(cost.rows());
    return Permutation(hungarian<double>(m, [&](int r, int c) { return cost(r, c); }));
}

}  // namespace confclust
