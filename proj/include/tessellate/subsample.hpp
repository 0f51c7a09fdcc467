#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "tessellate/geometry.hpp"
#include "tessellate/nd.hpp"

namespace tessellate {

// Dense in-memory volume: contiguous 32-bit floats in item-major,
// channel-major, then spatial row-major order.
struct DenseTensor {
  TensorLayout layout;
  std::vector<float> values;

  void validate() const;

  float* item_channel(std::int64_t item, std::int64_t channel);
  const float* item_channel(std::int64_t item, std::int64_t channel) const;
};

// A batch of extracted windows. Patch i corresponds to plan placement
// source_index(i); for stacks produced by extract the mapping is the
// identity, for filtered stacks it is the retained-index list.
struct PatchStack {
  std::shared_ptr<const PatchPlan> plan;
  std::int64_t channels = 1;
  AxisSizes window;
  std::vector<float> values;
  std::vector<std::int64_t> source_indices;  // empty = identity

  std::int64_t count() const;
  std::int64_t patch_elements() const { return channels * element_count(window); }
  std::int64_t source_index(std::int64_t patch) const;

  std::span<float> patch(std::int64_t index);
  std::span<const float> patch(std::int64_t index) const;
};

// Item plus half-open per-axis voxel intervals covered by one placement.
struct Region {
  std::int64_t item = 0;
  AxisSizes start;
  AxisSizes stop;
};

// The region read by placement `index`; stop - start equals the window.
Region patch_region(const PatchPlan& plan, std::int64_t index);

// Materializes every window of the plan, concatenated in plan order.
PatchStack extract(const DenseTensor& tensor, std::shared_ptr<const PatchPlan> plan);
PatchStack extract(const DenseTensor& tensor, const PatchPlan& plan);

// Extracts data and labels with the identical plan; patch i of both stacks
// covers the same spatial region. Channel counts may differ.
std::pair<PatchStack, PatchStack> extract_pair(const DenseTensor& data,
                                               const DenseTensor& labels,
                                               std::shared_ptr<const PatchPlan> plan);
std::pair<PatchStack, PatchStack> extract_pair(const DenseTensor& data,
                                               const DenseTensor& labels,
                                               const PatchPlan& plan);

// Single-consumer streaming extraction in plan order; peak extra memory is
// one patch. The tensor must outlive the stream.
class PatchStream {
 public:
  PatchStream(const DenseTensor& tensor, std::shared_ptr<const PatchPlan> plan);

  std::int64_t patch_elements() const;
  std::int64_t total() const { return plan_->size(); }
  std::int64_t produced() const { return next_; }

  // Fills `out` (patch_elements() floats) with the next patch; false at end.
  bool next(std::span<float> out);

 private:
  const DenseTensor* tensor_;
  std::shared_ptr<const PatchPlan> plan_;
  std::int64_t next_ = 0;
};

// Copies the window of one placement out of a dense tensor (all channels).
void extract_patch_into(const DenseTensor& tensor, const PatchPlan& plan,
                        std::int64_t index, std::span<float> out);

}  // namespace tessellate
