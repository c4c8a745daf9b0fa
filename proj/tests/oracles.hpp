// Independent reference implementations used to check the production code.
// Everything here is written as plain scalar loops straight from the
// defining formulas, on purpose, and must stay decoupled from the library
// kernels it verifies.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "lrea/matrix.hpp"

namespace oracle {

inline lrea::Matrix matmul(const lrea::Matrix& a, const lrea::Matrix& b) {
    lrea::Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline double leaky(double x, double slope) { return x >= 0.0 ? x : slope * x; }

// Target-attention pooling: per-position score from the three-way input
// projection through the activation and output projection, then the
// score-weighted sum of sequence rows.
inline lrea::Matrix din_attention(const lrea::Matrix& seq, const lrea::Matrix& target,
                                  const lrea::Matrix& w1, const lrea::Matrix& w2,
                                  const lrea::Matrix& w3, const lrea::Matrix& w_o,
                                  double slope) {
    const int len = seq.rows, d = seq.cols, h = w1.cols;
    lrea::Matrix out(1, d);
    for (int i = 0; i < len; ++i) {
        double score = 0.0;
        for (int k = 0; k < h; ++k) {
            double pre = 0.0;
            for (int j = 0; j < d; ++j) {
                pre += target(0, j) * w1(j, k);
                pre += seq(i, j) * w2(j, k);
                pre += target(0, j) * seq(i, j) * w3(j, k);
            }
            score += leaky(pre, slope) * w_o(k, 0);
        }
        for (int j = 0; j < d; ++j) out(0, j) += seq(i, j) * score;
    }
    return out;
}

// Unabsorbed low-rank attention: the same score skeleton evaluated on the
// compressed sequence, decompressed inside the activation.
inline lrea::Matrix lrea_unabsorbed(const lrea::Matrix& seq, const lrea::Matrix& target,
                                    const lrea::Matrix& w_comp,
                                    const lrea::Matrix& w_decomp, const lrea::Matrix& w1,
                                    const lrea::Matrix& w2, const lrea::Matrix& w3,
                                    const lrea::Matrix& w_o, double slope) {
    const int len = seq.rows, d = seq.cols, h = w1.cols, r = w_comp.cols;

    // comp_t[q][j] = sum_i seq[i][j] * w_comp[i][q]
    lrea::Matrix comp_t(r, d);
    for (int q = 0; q < r; ++q)
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int i = 0; i < len; ++i) s += seq(i, j) * w_comp(i, q);
            comp_t(q, j) = s;
        }

    lrea::Matrix m(r, h);
    for (int q = 0; q < r; ++q)
        for (int k = 0; k < h; ++k) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) {
                s += target(0, j) * w1(j, k);
                s += comp_t(q, j) * w2(j, k);
                s += target(0, j) * comp_t(q, j) * w3(j, k);
            }
            m(q, k) = s;
        }

    lrea::Matrix out(1, d);
    for (int i = 0; i < len; ++i) {
        double score = 0.0;
        for (int k = 0; k < h; ++k) {
            double pre = 0.0;
            for (int q = 0; q < r; ++q) pre += w_decomp(q, i) * m(q, k);
            score += leaky(pre, slope) * w_o(k, 0);
        }
        for (int j = 0; j < d; ++j) out(0, j) += seq(i, j) * score;
    }
    return out;
}

// Exhaustive pairwise AUC with half credit for ties.
inline double auc_pairwise(const std::vector<double>& scores,
                           const std::vector<int>& labels) {
    double correct = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) correct += 1.0;
            else if (scores[i] == scores[j]) correct += 0.5;
        }
    }
    return correct / pairs;
}

inline double gauc_pairwise(const std::vector<double>& scores,
                            const std::vector<int>& labels,
                            const std::vector<std::int64_t>& groups) {
    std::map<std::int64_t, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < scores.size(); ++i) by_group[groups[i]].push_back(i);
    double weighted = 0.0, weight = 0.0;
    for (const auto& [g, idx] : by_group) {
        std::vector<double> s;
        std::vector<int> l;
        int pos = 0, neg = 0;
        for (std::size_t i : idx) {
            s.push_back(scores[i]);
            l.push_back(labels[i]);
            (labels[i] == 1 ? pos : neg) += 1;
        }
        if (pos == 0 || neg == 0) continue;
        weighted += static_cast<double>(idx.size()) * auc_pairwise(s, l);
        weight += static_cast<double>(idx.size());
    }
    return weighted / weight;
}

inline double mlp_forward(const std::vector<lrea::Matrix>& weights,
                          const std::vector<lrea::Matrix>& biases, std::vector<double> x,
                          double slope) {
    for (std::size_t layer = 0; layer < weights.size(); ++layer) {
        const lrea::Matrix& w = weights[layer];
        std::vector<double> y(w.cols);
        for (int j = 0; j < w.cols; ++j) {
            double s = biases[layer](0, j);
            for (int i = 0; i < w.rows; ++i) s += x[i] * w(i, j);
            y[j] = layer + 1 < weights.size() ? leaky(s, slope) : s;
        }
        x = std::move(y);
    }
    return x[0];
}

}  // namespace oracle
