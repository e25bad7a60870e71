#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tvnet/tensor.hpp"

namespace tvnet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool ok = true;
  std::string worst;  // "leaf i elem j" of the worst or first bad element
};

// Compares reverse-mode gradients of a scalar-valued composite against
// central finite differences over every element of every leaf.
// Relative error: |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckReport grad_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> leaves, double h = 1e-5);

}  // namespace tvnet
