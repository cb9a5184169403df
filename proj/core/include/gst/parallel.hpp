#pragma once

#include <functional>

namespace gst {

// Runs fn(i) for i in [0, n) across up to `threads` workers (0 = hardware
// concurrency). Callers are responsible for making fn(i) independent;
// results must be written into per-index slots so the reduction order stays
// deterministic.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace gst
