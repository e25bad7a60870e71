#include "tvnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tvnet {

GradCheckReport grad_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> leaves, double h) {
  GradCheckReport report;
  for (auto& leaf : leaves) leaf.set_requires_grad(true);

  Tensor y = f(leaves);
  if (y.size() != 1)
    throw std::invalid_argument("grad_check: f must return a scalar");
  y.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves)
    analytic.push_back(leaf.has_grad() ? leaf.grad()
                                       : std::vector<double>(leaf.size(), 0.0));

  NoGradGuard no_grad;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& buf = leaves[li].data();
    for (size_t j = 0; j < buf.size(); ++j) {
      const double saved = buf[j];
      buf[j] = saved + h;
      const double up = f(leaves).value();
      buf[j] = saved - h;
      const double down = f(leaves).value();
      buf[j] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[li][j];
      const std::string loc =
          "leaf " + std::to_string(li) + " elem " + std::to_string(j);
      if (!std::isfinite(a) || !std::isfinite(numeric)) {
        report.ok = false;
        report.max_rel_err = std::numeric_limits<double>::infinity();
        report.worst = loc + " (non-finite)";
        return report;
      }
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = loc;
      }
    }
  }
  return report;
}

}  // namespace tvnet
