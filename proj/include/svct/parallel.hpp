#pragma once

namespace svct {

/// Caps the number of worker threads used by the parallel loops. Zero
/// restores the default (all available cores). Results never depend on it.
void set_thread_count(int n);
int thread_count();

}  // namespace svct
