#pragma once

// Independent gradient oracle: central finite differences around the current
// parameter values. Deliberately knows nothing about the tape's backward
// pass; it only re-evaluates a scalar-valued forward function.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tape.hpp"

namespace cpcseq::test {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_entry;
};

// `forward` must rebuild the loss from scratch (fresh tape) using the current
// parameter values and return its scalar value. `h` is the central step.
inline GradCheckResult finite_difference_check(std::vector<nn::Parameter*> params,
                                               const std::function<double()>& forward,
                                               const std::function<void()>& backward_into_grads,
                                               double h = 1e-6) {
  for (auto* p : params) p->zero_grad();
  backward_into_grads();

  GradCheckResult res;
  for (auto* p : params) {
    for (long r = 0; r < p->value.rows(); ++r) {
      for (long c = 0; c < p->value.cols(); ++c) {
        const double saved = p->value(r, c);
        p->value(r, c) = saved + h;
        const double up = forward();
        p->value(r, c) = saved - h;
        const double down = forward();
        p->value(r, c) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double ad = p->grad(r, c);
        const double denom = std::max({1.0, std::abs(fd), std::abs(ad)});
        const double rel = std::abs(fd - ad) / denom;
        if (rel > res.max_rel_error) {
          res.max_rel_error = rel;
          res.worst_entry = p->name + "(" + std::to_string(r) + "," + std::to_string(c) + ")";
        }
      }
    }
  }
  return res;
}

}  // namespace cpcseq::test
