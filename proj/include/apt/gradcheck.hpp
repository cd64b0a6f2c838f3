#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "apt/tensor.hpp"

namespace apt {

// Central-difference gradient of a black-box scalar function with respect to
// one parameter tensor. Deliberately knows nothing about the tape: it only
// perturbs theta in place and re-evaluates f, so it stays an independent
// check on whatever f computes internally.
template <typename T, typename F>
std::vector<T> finite_diff_grad(F&& f, Tensor<T>& theta, T eps) {
  std::vector<T> grad(theta.data.size());
  for (size_t j = 0; j < theta.data.size(); ++j) {
    const T orig = theta.data[j];
    theta.data[j] = orig + eps;
    const T fp = f();
    theta.data[j] = orig - eps;
    const T fm = f();
    theta.data[j] = orig;
    grad[j] = (fp - fm) / (T(2) * eps);
  }
  return grad;
}

// Worst relative disagreement between analytic and numeric gradients.
// Coordinates below `floor` in magnitude are judged on the absolute scale
// floor * tolerance, which keeps near-zero entries from dividing by noise.
template <typename T>
double max_rel_err(const std::vector<T>& analytic, const std::vector<T>& numeric,
                   double floor = 1e-3) {
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    const double a = double(analytic[i]);
    const double n = i < numeric.size() ? double(numeric[i]) : 0.0;
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

}  // namespace apt
