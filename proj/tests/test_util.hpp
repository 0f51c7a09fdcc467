#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "test_paths.h"

namespace testutil {

// Fresh per-test scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir =
      std::filesystem::path(TESSELLATE_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<float> random_values(std::size_t count, std::uint32_t seed,
                                        float lo = -1.0f, float hi = 1.0f) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  std::vector<float> values(count);
  for (auto& v : values) v = dist(rng);
  return values;
}

// Deterministic value sequence shared bit-for-bit with tests/zarr_ref.py.
inline float pattern_value(std::int64_t i) {
  const std::int64_t h = (i * 1103515245 + 12345) % 1000003;
  return static_cast<float>(h) * 1e-6f;
}

inline int run_command(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status < 0) return -1;
#ifdef WIFEXITED
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#else
  return status;
#endif
}

}  // namespace testutil
