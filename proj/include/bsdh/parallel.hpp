#pragma once

namespace bsdh {

// Global thread setting for the OpenMP kernels. 0 = the OpenMP default,
// 1 = route through the serial reference paths, n > 1 = use n threads.
void set_threads(int n);
int configured_threads();
bool parallel_enabled();

} // namespace bsdh
