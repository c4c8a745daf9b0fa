#include "lrea/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "lrea/errors.hpp"

namespace lrea {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw MetricError("auc: " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(labels.size()) + " labels");
    }
    if (scores.empty()) throw MetricError("auc: empty input");

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average rank within each tie run, ranks are 1-based
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }

    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] == 1) {
            pos += 1.0;
            rank_sum += rank[k];
        } else if (labels[k] != 0) {
            throw MetricError("auc: labels must be 0 or 1");
        }
    }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) {
        throw MetricError("auc: undefined for single-class labels");
    }
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double gauc(const std::vector<double>& scores, const std::vector<int>& labels,
            const std::vector<std::int64_t>& group_ids) {
    if (scores.size() != labels.size() || scores.size() != group_ids.size()) {
        throw MetricError("gauc: scores, labels and group ids must have equal length");
    }
    if (scores.empty()) throw MetricError("gauc: empty input");

    std::unordered_map<std::int64_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < scores.size(); ++i) groups[group_ids[i]].push_back(i);

    double weighted = 0.0, weight = 0.0;
    for (const auto& [id, idx] : groups) {
        bool has_pos = false, has_neg = false;
        for (std::size_t i : idx) (labels[i] == 1 ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg) continue;  // AUC undefined for this group

        std::vector<double> s;
        std::vector<int> l;
        s.reserve(idx.size());
        l.reserve(idx.size());
        for (std::size_t i : idx) {
            s.push_back(scores[i]);
            l.push_back(labels[i]);
        }
        const double w = static_cast<double>(idx.size());
        weighted += w * auc(s, l);
        weight += w;
    }
    if (weight == 0.0) {
        throw MetricError("gauc: no group contains both classes");
    }
    return weighted / weight;
}

}  // namespace lrea
