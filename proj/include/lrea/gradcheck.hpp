#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lrea/matrix.hpp"

namespace lrea {

// Scalar objective over a parameter list. When `grads` is non-null the
// callee must also fill one gradient matrix per parameter (same shapes),
// computed by its own backward pass.
using DiffFn = std::function<double(const std::vector<Matrix>& params,
                                    std::vector<Matrix>* grads)>;

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int worst_row = 0;
    int worst_col = 0;
    std::size_t entries_checked = 0;
    bool ok = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    bool ok = true;

    std::string summary() const;
};

// Central-difference check of the callee's backward pass:
//   fd = (f(p + h e_ij) - f(p - h e_ij)) / (2h)
// compared per entry against the analytic gradient, with relative error
//   |fd - g| / max(|fd| + |g|, 1e-6).
// `max_entries_per_param` == 0 checks every entry; otherwise a
// deterministic stride subsample of at most that many entries per tensor.
GradCheckReport grad_check(const DiffFn& f, const std::vector<Matrix>& params,
                           const std::vector<std::string>& names, double step,
                           double tol, std::size_t max_entries_per_param = 0);

}  // namespace lrea
