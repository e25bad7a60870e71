#include "tvnet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <stdexcept>

#include "tvnet/block.hpp"
#include "tvnet/metrics.hpp"
#include "tvnet/ops.hpp"

namespace tvnet::bench {

CostReport count_costs(size_t cm, size_t kernel, size_t length, size_t patches,
                       size_t patch_len) {
  if (patches * patch_len != length)
    throw std::invalid_argument("count_costs: N * P must equal L");
  CostReport r;
  r.cm = cm;
  r.kernel = kernel;
  r.length = length;
  r.patches = patches;
  r.patch_len = patch_len;

  const unsigned long long cm2 = static_cast<unsigned long long>(cm) * cm;
  const unsigned long long k2 =
      static_cast<unsigned long long>(kernel) * kernel;

  r.flops_conv2d = cm2 * k2 * length;
  r.flops_alpha_gen = static_cast<unsigned long long>(cm) * length;
  r.flops_channel = cm2 * patches + cm2;
  r.flops_multiply = cm2 * k2 * patches;
  r.flops_total =
      r.flops_conv2d + r.flops_alpha_gen + r.flops_channel + r.flops_multiply;

  r.params_conv2d = cm2 * k2;
  r.params_gen = static_cast<unsigned long long>(cm) * patches;
  r.params_channel = cm2 + cm2;
  r.params_total = r.params_conv2d + r.params_gen + r.params_channel;

  r.flops_bias = static_cast<unsigned long long>(cm) * length;
  r.flops_residual = static_cast<unsigned long long>(cm) * length;
  // base conv + bias, two kernel-1 channel convs + biases, norm scale/shift
  r.params_block_exact = cm2 * k2 + cm + (cm2 + cm) + (cm2 + cm) + 2 * cm;
  return r;
}

std::vector<ScalingRow> measure_scaling(const std::vector<size_t>& input_lens,
                                        size_t cm, size_t kernel,
                                        size_t patch_len, size_t batch,
                                        size_t blocks, size_t trials) {
  std::vector<ScalingRow> rows;
  for (size_t L : input_lens) {
    if (L % patch_len != 0)
      throw std::invalid_argument("measure_scaling: L not divisible by P");
    const size_t N = L / patch_len;

    std::mt19937_64 rng(1234);
    std::vector<BlockParams> stack;
    for (size_t i = 0; i < blocks; ++i)
      stack.push_back(BlockParams::init(cm, kernel, rng));
    unsigned long long params = 0;
    for (auto& b : stack)
      for (auto& t : b.parameters()) params += t.size();

    const size_t S = patch_len == 1 ? 1 : 2;
    const size_t P2 = patch_len == 1 ? 1 : patch_len / 2;

    std::vector<double> times;
    unsigned long long macs = 0;
    unsigned long long peak = 0;
    for (size_t trial = 0; trial < trials; ++trial) {
      Tensor x = Tensor::uniform({batch, cm, N, S, P2}, -1.0, 1.0, rng);
      auto& counter = op_counter();
      counter.reset();
      const auto t0 = std::chrono::steady_clock::now();
      Tensor out = stack_forward(x, stack, true);
      macs = counter.conv2d_macs_inbounds;  // forward only
      Tensor loss = metrics::mse_loss(out, Tensor::zeros(out.shape()));
      for (auto& b : stack)
        for (auto& t : b.parameters()) t.zero_grad();
      loss.backward();
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
      peak = std::max(peak, counter.alloc_bytes_peak);
    }
    std::sort(times.begin(), times.end());

    ScalingRow row;
    row.input_len = L;
    row.flops_conv2d = count_costs(cm, kernel, L, N, patch_len).flops_conv2d;
    row.macs_measured = macs;
    row.params = params;
    row.median_ms = times[times.size() / 2];
    row.peak_bytes = peak;
    rows.push_back(row);
  }
  return rows;
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
  std::ostringstream os;
  os << "input_len,flops_conv2d,macs_measured,params,median_ms,peak_bytes\n";
  for (const auto& r : rows)
    os << r.input_len << "," << r.flops_conv2d << "," << r.macs_measured << ","
       << r.params << "," << r.median_ms << "," << r.peak_bytes << "\n";
  return os.str();
}

std::string cost_report_csv(const CostReport& r) {
  std::ostringstream os;
  os << "field,value\n"
     << "cm," << r.cm << "\n"
     << "kernel," << r.kernel << "\n"
     << "length," << r.length << "\n"
     << "patches," << r.patches << "\n"
     << "patch_len," << r.patch_len << "\n"
     << "flops_conv2d," << r.flops_conv2d << "\n"
     << "flops_alpha_gen," << r.flops_alpha_gen << "\n"
     << "flops_channel," << r.flops_channel << "\n"
     << "flops_multiply," << r.flops_multiply << "\n"
     << "flops_total," << r.flops_total << "\n"
     << "params_conv2d," << r.params_conv2d << "\n"
     << "params_gen," << r.params_gen << "\n"
     << "params_channel," << r.params_channel << "\n"
     << "params_total," << r.params_total << "\n"
     << "flops_bias," << r.flops_bias << "\n"
     << "flops_residual," << r.flops_residual << "\n"
     << "params_block_exact," << r.params_block_exact << "\n";
  return os.str();
}

}  // namespace tvnet::bench
