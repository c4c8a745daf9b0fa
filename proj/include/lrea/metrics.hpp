#pragma once

#include <cstdint>
#include <vector>

namespace lrea {

// Probability that a random positive outranks a random negative, ties
// counted half. Rank-based, O(N log N). Throws MetricError when labels
// are single-class.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Sample-count-weighted mean of per-group AUC over groups that contain
// both classes; single-class groups are skipped. Throws MetricError when
// no group qualifies.
double gauc(const std::vector<double>& scores, const std::vector<int>& labels,
            const std::vector<std::int64_t>& group_ids);

}  // namespace lrea
