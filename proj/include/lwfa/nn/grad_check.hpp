#pragma once

#include <cstddef>
#include <cstdint>

#include "lwfa/nn/network.hpp"

namespace lwfa::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  double gradient_norm = 0.0;  // L2 norm of the analytic gradient over all parameters
  std::size_t checked = 0;     // probes compared
  std::size_t kinks = 0;       // probes left out: +-eps switched a ReLU or pool argmax
};

/// Compares back-propagated gradients of the cross-entropy loss at (x, label)
/// with central differences of step `eps` on a seeded random subset of at
/// most `per_tensor` entries from every weight and bias array. Both sides run
/// the shared kernels in double precision. A probe whose +-eps evaluations
/// change the ReLU sign or max-pool argmax pattern straddles a kink, where the
/// central difference is no derivative estimate; it is counted in `kinks`
/// and kept out of max_relative_error.
GradCheckResult grad_check(const Network& net, const Tensor& x, std::size_t label, double eps,
                           std::size_t per_tensor = 12, std::uint64_t seed = 0);

}  // namespace lwfa::nn
