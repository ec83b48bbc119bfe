#pragma once

// Brute-force reference implementations written from the definitions, kept
// independent of the library code they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "decgnn/preprocess.hpp"

namespace oracle {

using decgnn::Matrix;

// Fraction of (positive, negative) pairs ordered correctly, ties count half.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j])
                wins += 1.0;
            else if (s[i] == s[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

inline double euclid(const Matrix& x, long i, long j) {
    double acc = 0.0;
    for (long c = 0; c < x.cols(); ++c) {
        const double d = x(i, c) - x(j, c);
        acc += d * d;
    }
    return std::sqrt(acc);
}

// s(i) = (b - a) / max(a, b); singletons and a = b = 0 contribute 0.
inline double silhouette(const Matrix& x, const std::vector<int>& label) {
    const long n = x.rows();
    double total = 0.0;
    for (long i = 0; i < n; ++i) {
        std::map<int, std::pair<double, int>> per;  // label -> (distance sum, count)
        for (long j = 0; j < n; ++j) {
            if (j == i) continue;
            auto& e = per[label[j]];
            e.first += euclid(x, i, j);
            e.second += 1;
        }
        auto own = per.find(label[i]);
        if (own == per.end()) continue;  // singleton
        const double a = own->second.first / own->second.second;
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [l, e] : per)
            if (l != label[i]) b = std::min(b, e.first / e.second);
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

// Fills every missing cell from the k closest rows observing that column.
// Distance: root mean squared difference over mutually observed numeric
// columns, +inf when none are shared; ties resolved by lower row index.
inline decgnn::FeatureTable knn_impute(const decgnn::FeatureTable& t, std::size_t k) {
    decgnn::FeatureTable out = t;
    const long n = static_cast<long>(t.rows());
    const long m = static_cast<long>(t.cols());
    for (long r = 0; r < n; ++r) {
        for (long c = 0; c < m; ++c) {
            if (t.observed(r, c)) continue;
            std::vector<std::pair<double, long>> cand;
            for (long o = 0; o < n; ++o) {
                if (o == r || !t.observed(o, c)) continue;
                double sq = 0.0;
                int shared = 0;
                for (long f = 0; f < m; ++f) {
                    if (t.columns[static_cast<std::size_t>(f)].kind != decgnn::FeatureKind::Numeric) continue;
                    if (!t.observed(r, f) || !t.observed(o, f)) continue;
                    const double d = t.values(r, f) - t.values(o, f);
                    sq += d * d;
                    ++shared;
                }
                cand.push_back({shared ? std::sqrt(sq / shared) : std::numeric_limits<double>::infinity(), o});
            }
            std::sort(cand.begin(), cand.end());
            cand.resize(std::min(k, cand.size()));
            double fill = 0.0;
            if (t.columns[static_cast<std::size_t>(c)].kind == decgnn::FeatureKind::Numeric) {
                for (const auto& [d, o] : cand) fill += t.values(o, c);
                fill /= static_cast<double>(cand.size());
            } else {
                std::map<double, int> votes;
                for (const auto& [d, o] : cand) ++votes[t.values(o, c)];
                int best = 0;
                for (const auto& [code, cnt] : votes)
                    if (cnt > best) best = cnt, fill = code;
            }
            out.values(r, c) = fill;
            out.observed(r, c) = true;
        }
    }
    return out;
}

// Adjusted Rand index from the contingency table.
inline double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, long> cont;
    std::map<int, long> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++cont[{a[i], b[i]}];
        ++ra[a[i]];
        ++rb[b[i]];
    }
    const auto c2 = [](long x) { return static_cast<double>(x) * (x - 1) / 2.0; };
    double sum_ij = 0, sum_a = 0, sum_b = 0;
    for (const auto& [k, v] : cont) sum_ij += c2(v);
    for (const auto& [k, v] : ra) sum_a += c2(v);
    for (const auto& [k, v] : rb) sum_b += c2(v);
    const double expected = sum_a * sum_b / c2(static_cast<long>(a.size()));
    const double max_index = (sum_a + sum_b) / 2.0;
    if (max_index == expected) return 1.0;
    return (sum_ij - expected) / (max_index - expected);
}

// Student-t soft assignment straight from the formula.
inline Matrix soft_assign(const Matrix& z, const Matrix& mu) {
    Matrix q(z.rows(), mu.rows());
    for (long i = 0; i < z.rows(); ++i) {
        double row = 0.0;
        for (long j = 0; j < mu.rows(); ++j) {
            double d2 = 0.0;
            for (long c = 0; c < z.cols(); ++c) d2 += (z(i, c) - mu(j, c)) * (z(i, c) - mu(j, c));
            q(i, j) = 1.0 / (1.0 + d2);
            row += q(i, j);
        }
        for (long j = 0; j < mu.rows(); ++j) q(i, j) /= row;
    }
    return q;
}

// Worst central-difference relative error |a - n| / max(|a|, |n|, floor).
inline double finite_difference_error(const std::function<double()>& loss, const std::vector<std::span<double>>& params,
                                      const std::vector<std::span<const double>>& analytic, double h = 1e-5,
                                      double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            const double saved = params[b][i];
            params[b][i] = saved + h;
            const double up = loss();
            params[b][i] = saved - h;
            const double down = loss();
            params[b][i] = saved;
            const double num = (up - down) / (2.0 * h);
            const double a = analytic[b][i];
            worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor}));
        }
    }
    return worst;
}

}  // namespace oracle
