#pragma once

#include <cstddef>
#include <cstdint>

namespace tvnet {

// Per-thread instrumentation shared by the op kernels and the bench module.
// conv2d reports two multiply counts: the multiplies actually executed
// (padded taps are skipped) and the same-size-output convention that charges
// every tap, padded or not.
struct OpCounter {
  unsigned long long conv2d_macs_inbounds = 0;
  unsigned long long conv2d_macs_padded = 0;
  unsigned long long conv1d_macs = 0;
  unsigned long long linear_macs = 0;

  unsigned long long alloc_bytes_current = 0;
  unsigned long long alloc_bytes_peak = 0;

  void reset() {
    conv2d_macs_inbounds = 0;
    conv2d_macs_padded = 0;
    conv1d_macs = 0;
    linear_macs = 0;
    alloc_bytes_current = 0;
    alloc_bytes_peak = 0;
  }

  void add_alloc(unsigned long long bytes) {
    alloc_bytes_current += bytes;
    if (alloc_bytes_current > alloc_bytes_peak)
      alloc_bytes_peak = alloc_bytes_current;
  }

  void sub_alloc(unsigned long long bytes) {
    alloc_bytes_current =
        bytes > alloc_bytes_current ? 0 : alloc_bytes_current - bytes;
  }
};

OpCounter& op_counter();

}  // namespace tvnet
