#pragma once

namespace vtfeed {

/// Selects the OpenMP kernel or its serial reference. Both produce identical results.
enum class Exec { Serial, Parallel };

/// Caps OpenMP worker threads; values < 1 leave the runtime default.
void set_thread_count(int threads);
int thread_count();

}  // namespace vtfeed
