#include "lrea/gradcheck.hpp"

#include <cmath>
#include <cstdio>

#include "lrea/errors.hpp"

namespace lrea {

std::string GradCheckReport::summary() const {
    std::string out;
    char line[256];
    for (const auto& e : entries) {
        std::snprintf(line, sizeof(line), "%-16s max_rel_err=%.3e at (%d,%d) over %zu entries %s\n",
                      e.name.c_str(), e.max_rel_err, e.worst_row, e.worst_col,
                      e.entries_checked, e.ok ? "ok" : "FAIL");
        out += line;
    }
    std::snprintf(line, sizeof(line), "overall max_rel_err=%.3e %s\n", max_rel_err,
                  ok ? "ok" : "FAIL");
    out += line;
    return out;
}

GradCheckReport grad_check(const DiffFn& f, const std::vector<Matrix>& params,
                           const std::vector<std::string>& names, double step,
                           double tol, std::size_t max_entries_per_param) {
    if (names.size() != params.size()) {
        throw ShapeError("grad_check: " + std::to_string(names.size()) + " names for " +
                         std::to_string(params.size()) + " parameters");
    }

    std::vector<Matrix> analytic;
    const double base = f(params, &analytic);
    if (!std::isfinite(base)) throw EvalError("grad_check: objective is not finite");
    if (analytic.size() != params.size()) {
        throw ShapeError("grad_check: callee returned " + std::to_string(analytic.size()) +
                         " gradients for " + std::to_string(params.size()) + " parameters");
    }

    std::vector<Matrix> work = params;
    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        GradCheckEntry entry;
        entry.name = names[p];
        const std::size_t n = params[p].size();
        std::size_t stride = 1;
        if (max_entries_per_param > 0 && n > max_entries_per_param) {
            stride = (n + max_entries_per_param - 1) / max_entries_per_param;
        }
        for (std::size_t k = 0; k < n; k += stride) {
            const double orig = work[p].data[k];
            work[p].data[k] = orig + step;
            const double up = f(work, nullptr);
            work[p].data[k] = orig - step;
            const double down = f(work, nullptr);
            work[p].data[k] = orig;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw EvalError("grad_check: objective not finite at perturbation of " +
                                names[p]);
            }
            const double fd = (up - down) / (2.0 * step);
            const double an = analytic[p].data[k];
            const double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-6);
            ++entry.entries_checked;
            if (rel > entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.worst_row = static_cast<int>(k) / params[p].cols;
                entry.worst_col = static_cast<int>(k) % params[p].cols;
            }
        }
        entry.ok = entry.max_rel_err <= tol;
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.ok = report.ok && entry.ok;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace lrea
