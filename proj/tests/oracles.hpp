#pragma once

// Independent reference implementations used only by the tests. They favour
// obviousness over speed and share no code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace oracle {

using Tokens = std::vector<std::string>;

inline std::vector<Tokens> ngrams(const Tokens &t, std::size_t n) {
    std::vector<Tokens> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) out.emplace_back(t.begin() + i, t.begin() + i + n);
    return out;
}

inline int occurrences(const std::vector<Tokens> &grams, const Tokens &g) {
    return static_cast<int>(std::count(grams.begin(), grams.end(), g));
}

// Linear scans over n-gram lists, no maps.
inline double precision(const Tokens &cand, const std::vector<Tokens> &refs, std::size_t n) {
    const auto c = ngrams(cand, n);
    std::vector<Tokens> distinct;
    for (const auto &g : c) {
        if (std::find(distinct.begin(), distinct.end(), g) == distinct.end()) distinct.push_back(g);
    }
    int match = 0;
    for (const auto &g : distinct) {
        int best = 0;
        for (const auto &r : refs) best = std::max(best, occurrences(ngrams(r, n), g));
        match += std::min(occurrences(c, g), best);
    }
    const double total = static_cast<double>(c.size());
    return match == 0 ? 1.0 / (total + 1.0) : match / total;
}

struct Bleu {
    double b1, b2, avg;
};

inline Bleu bleu(const Tokens &cand, const std::vector<Tokens> &refs) {
    if (cand.empty()) return {0, 0, 0};
    const double c = static_cast<double>(cand.size());
    double r = -1;
    for (const auto &ref : refs) {
        const double len = static_cast<double>(ref.size());
        if (r < 0 || std::fabs(len - c) < std::fabs(r - c) || (std::fabs(len - c) == std::fabs(r - c) && len < r)) r = len;
    }
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    const double p1 = precision(cand, refs, 1), p2 = precision(cand, refs, 2);
    const double b1 = bp * p1, b2 = bp * std::sqrt(p1 * p2);
    return {b1, b2, std::sqrt(b1 * b2)};
}

inline Tokens split(const std::string &s) {
    Tokens out;
    std::string cur;
    for (char ch : s) {
        if (ch == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Multiset overlap through sorted merge.
inline double f1(const std::string &cand, const std::vector<std::string> &refs) {
    double best = 0;
    Tokens c = split(cand);
    std::sort(c.begin(), c.end());
    for (const auto &ref : refs) {
        Tokens r = split(ref);
        std::sort(r.begin(), r.end());
        if (c.empty() || r.empty()) {
            best = std::max(best, (c.empty() && r.empty()) ? 1.0 : 0.0);
            continue;
        }
        std::size_t i = 0, j = 0, common = 0;
        while (i < c.size() && j < r.size()) {
            if (c[i] == r[j]) {
                ++common, ++i, ++j;
            } else if (c[i] < r[j]) {
                ++i;
            } else {
                ++j;
            }
        }
        if (common == 0) continue;
        const double p = double(common) / c.size(), rc = double(common) / r.size();
        best = std::max(best, 2 * p * rc / (p + rc));
    }
    return best;
}

inline int em(const std::string &cand, const std::vector<std::string> &refs) {
    if (cand.empty()) return 0;
    for (const auto &r : refs) {
        if (r == cand) return 1;
    }
    return 0;
}

// Upper tail of the Student-t density by exp-sinh quadrature, which copes with
// the slowly decaying tails of small degrees of freedom.
inline double t_sf(double t, double dof) {
    const double logc = std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2) - 0.5 * std::log(dof * M_PI);
    auto pdf = [&](double x) { return std::exp(logc - (dof + 1) / 2 * std::log1p(x * x / dof)); };
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate(pdf, std::fabs(t), std::numeric_limits<double>::infinity(), 1e-15);
}

struct Welch {
    double t, dof;
};

inline Welch welch(const std::vector<double> &a, const std::vector<double> &b) {
    auto mean = [](const std::vector<double> &v) {
        double s = 0;
        for (double x : v) s += x;
        return s / v.size();
    };
    auto var = [&](const std::vector<double> &v) {
        const double m = mean(v);
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return s / (v.size() - 1);
    };
    const double va = var(a) / a.size(), vb = var(b) / b.size();
    const double t = (mean(a) - mean(b)) / std::sqrt(va + vb);
    const double dof = (va + vb) * (va + vb) / (va * va / (a.size() - 1) + vb * vb / (b.size() - 1));
    return {t, dof};
}

// Dense TF-IDF scores: x is cells x peaks (row-major vectors).
inline std::vector<std::size_t> tfidf(const std::vector<std::vector<int>> &x, std::size_t keep) {
    const std::size_t n = x.size(), m = x[0].size();
    std::vector<double> score(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
        int count = 0;
        for (std::size_t i = 0; i < n; ++i) count += x[i][j];
        const double idf = std::log(double(n) / (1.0 + count));
        for (std::size_t i = 0; i < n; ++i) {
            int total = 0;
            for (int v : x[i]) total += v;
            if (x[i][j]) score[j] += 1.0 / total * idf;
        }
    }
    std::vector<std::size_t> idx(m);
    for (std::size_t j = 0; j < m; ++j) idx[j] = j;
    // Selection sort with explicit tie rule, then ascending output.
    std::vector<std::size_t> chosen;
    std::vector<bool> used(m, false);
    for (std::size_t k = 0; k < keep; ++k) {
        std::size_t best = m;
        for (std::size_t j = 0; j < m; ++j) {
            if (used[j]) continue;
            if (best == m || score[j] > score[best] + 1e-12) best = j;
        }
        used[best] = true;
        chosen.push_back(best);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

} // namespace oracle
