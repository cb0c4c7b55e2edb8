#include "sinkprobe/parallel.hpp"

#include <cstdlib>

namespace sinkprobe {

unsigned default_jobs() {
  if (const char* env = std::getenv("SINKPROBE_JOBS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace sinkprobe
