// fd_check.hpp - central finite-difference oracle for gradient tests.
// Independent of the library's backward passes: it only needs a scalar
// function of a flat parameter vector.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace fdcheck {

struct Result {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
};

// max over parameters of |analytic - central difference| / max(|a|,|f|,floor)
inline Result compare(const std::function<double(const std::vector<double>&)>& f,
                      const std::vector<double>& theta,
                      const std::vector<double>& analytic_grad, double step = 1e-5,
                      double floor = 1e-6) {
    Result r;
    std::vector<double> t = theta;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        t[i] = theta[i] + step;
        const double up = f(t);
        t[i] = theta[i] - step;
        const double down = f(t);
        t[i] = theta[i];
        const double fd = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(fd), std::abs(analytic_grad[i]), floor});
        const double rel = std::abs(fd - analytic_grad[i]) / denom;
        if (rel > r.max_rel_error) {
            r.max_rel_error = rel;
            r.worst_index = i;
        }
    }
    return r;
}

} // namespace fdcheck
