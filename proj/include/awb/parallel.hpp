#pragma once

#include <cstddef>
#include <functional>

namespace awb {

/// Worker count used by batch-parallel kernels. Defaults to 1.
void set_num_threads(int n);
int num_threads();

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; callers
/// must write only to slots owned by i so results do not depend on the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace awb
