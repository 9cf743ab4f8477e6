#pragma once

namespace groupcdl {

/// Worker count for data-parallel loops (OpenMP). Results never depend on it:
/// every output element is produced by exactly one worker in a fixed order.
void set_num_threads(int n);
int num_threads();

}  // namespace groupcdl
