#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "tessellate/geometry.hpp"
#include "tessellate/store.hpp"

#include "json.hpp"

namespace tessellate {

// What to do with output voxels whose accumulated weight sum is zero. The
// boundary-adjusted weighting makes such voxels structurally impossible for
// plans built by build_plan, so the default treats one as a geometry bug.
struct StitchPolicy {
  enum class ZeroCoverage { kError, kFill };

  ZeroCoverage zero_coverage = ZeroCoverage::kError;
  float fill_value = 0.0f;
  std::int64_t output_channels = 1;

  void validate() const;
};

nlohmann::json policy_to_json(const StitchPolicy& policy);
StitchPolicy policy_from_json(const nlohmann::json& doc);

struct FinalizeStats {
  std::int64_t total_voxels = 0;  // item x spatial positions
  std::int64_t covered_voxels = 0;
  std::int64_t zero_coverage_voxels = 0;
  float min_weight_sum = 0.0f;  // over covered voxels
  float max_weight_sum = 0.0f;
};

// Paired on-disk accumulator arrays for patch-wise stitching: a weighted-sum
// array of shape (N, C_out, spatial...) and a weight-sum array of shape
// (N, 1, spatial...), plus a manifest tracking completion state.
//
// accumulate() may be called from multiple threads; read-modify-write of
// each chunk is serialized internally via striped chunk locks.
class Accumulators {
 public:
  static Accumulators create(std::shared_ptr<const PatchPlan> plan,
                             const WindowSpec& stitch_spec, const StitchPolicy& policy,
                             const AxisSizes& chunk_spatial,
                             const std::filesystem::path& location);
  static Accumulators open(const std::filesystem::path& location);

  // mean[region] += weight ⊙ patch_result (per channel); norm[region] += weight.
  void accumulate(std::int64_t patch_index, std::span<const float> patch_result);

  // Records in the manifest that every intended patch has been accumulated.
  void mark_accumulated();

  // Writes output = mean / norm (norm broadcast over channels) as a new
  // chunked array at <location>/output; chunks are processed independently,
  // in parallel when workers > 1.
  ChunkedArray finalize(const StitchPolicy& policy, int workers = 1,
                        FinalizeStats* stats = nullptr);

  const PatchPlan& plan() const { return *plan_; }
  const WindowSpec& spec() const { return spec_; }
  const StitchPolicy& policy() const { return policy_; }
  const ChunkedArray& mean_array() const { return mean_; }
  const ChunkedArray& norm_array() const { return norm_; }
  const std::filesystem::path& location() const { return location_; }
  const std::string& state() const { return state_; }

  static std::filesystem::path manifest_path(const std::filesystem::path& location);
  static std::filesystem::path output_path(const std::filesystem::path& location);

 private:
  Accumulators(std::filesystem::path location, std::shared_ptr<const PatchPlan> plan,
               WindowSpec spec, StitchPolicy policy, AxisSizes chunk_spatial,
               ChunkedArray mean, ChunkedArray norm, std::string state);

  void write_manifest();
  std::mutex& chunk_lock(int array_tag, std::span<const std::int64_t> chunk_indices,
                         const ArrayMetadata& meta);
  void add_into(ChunkedArray& array, int array_tag,
                std::span<const std::int64_t> start,
                std::span<const std::int64_t> shape, std::span<const float> values);

  std::filesystem::path location_;
  std::shared_ptr<const PatchPlan> plan_;
  WindowSpec spec_;
  StitchPolicy policy_;
  AxisSizes chunk_spatial_;
  ChunkedArray mean_;
  ChunkedArray norm_;
  std::string state_;
  std::unique_ptr<std::array<std::mutex, 64>> locks_;
};

// Spec-shaped convenience wrappers.
Accumulators create_accumulators(const TensorLayout& layout, std::int64_t output_channels,
                                 const PatchPlan& plan, const AxisSizes& chunk_spatial,
                                 const std::filesystem::path& location);
void accumulate(Accumulators& acc, std::int64_t patch_index,
                std::span<const float> patch_result);
ChunkedArray finalize(Accumulators& acc, const StitchPolicy& policy,
                      int workers = 1, FinalizeStats* stats = nullptr);

// Produces the next patch result (output_channels x window voxels) in plan
// order; returns false when the sequence is exhausted.
using PatchResultProducer = std::function<bool(std::vector<float>&)>;

// create + accumulate-all + finalize over a sequence of patch results in
// plan order. Extra memory stays bounded by one patch plus the chunk working
// set. An empty chunk_spatial defaults to the window shape.
ChunkedArray stitch_stream(const PatchPlan& plan, const WindowSpec& spec,
                           PatchResultProducer producer, const StitchPolicy& policy,
                           const std::filesystem::path& location,
                           const AxisSizes& chunk_spatial = {}, int workers = 1,
                           FinalizeStats* stats = nullptr);

}  // namespace tessellate
