#include "tessellate/subsample.hpp"

#include <string>

#include "tessellate/errors.hpp"

namespace tessellate {

void DenseTensor::validate() const {
  layout.validate();
  if (static_cast<std::int64_t>(values.size()) != layout.element_count())
    throw ShapeError("tensor holds " + std::to_string(values.size()) +
                     " values but layout requires " +
                     std::to_string(layout.element_count()));
}

float* DenseTensor::item_channel(std::int64_t item, std::int64_t channel) {
  return values.data() + (item * layout.channels + channel) * layout.voxels_per_item();
}

const float* DenseTensor::item_channel(std::int64_t item, std::int64_t channel) const {
  return values.data() + (item * layout.channels + channel) * layout.voxels_per_item();
}

std::int64_t PatchStack::count() const {
  const std::int64_t per_patch = patch_elements();
  return per_patch == 0 ? 0 : static_cast<std::int64_t>(values.size()) / per_patch;
}

std::int64_t PatchStack::source_index(std::int64_t patch) const {
  if (patch < 0 || patch >= count())
    throw OutOfRangeError("patch index " + std::to_string(patch) +
                          " outside stack of " + std::to_string(count()));
  return source_indices.empty() ? patch : source_indices[static_cast<std::size_t>(patch)];
}

std::span<float> PatchStack::patch(std::int64_t index) {
  if (index < 0 || index >= count())
    throw OutOfRangeError("patch index " + std::to_string(index) +
                          " outside stack of " + std::to_string(count()));
  const std::int64_t per_patch = patch_elements();
  return {values.data() + index * per_patch, static_cast<std::size_t>(per_patch)};
}

std::span<const float> PatchStack::patch(std::int64_t index) const {
  return const_cast<PatchStack*>(this)->patch(index);
}

Region patch_region(const PatchPlan& plan, std::int64_t index) {
  if (index < 0 || index >= plan.size())
    throw OutOfRangeError("patch index " + std::to_string(index) +
                          " outside plan of " + std::to_string(plan.size()) +
                          " placements");
  const Placement& p = plan.placements[static_cast<std::size_t>(index)];
  Region region;
  region.item = p.item;
  region.start = p.start;
  region.stop.resize(p.start.size());
  for (std::size_t a = 0; a < p.start.size(); ++a)
    region.stop[a] = p.start[a] + plan.spec.window[a];
  return region;
}

void extract_patch_into(const DenseTensor& tensor, const PatchPlan& plan,
                        std::int64_t index, std::span<float> out) {
  const Placement& p = plan.placements[static_cast<std::size_t>(index)];
  const AxisSizes& window = plan.spec.window;
  const std::int64_t voxels = element_count(window);
  if (out.size() != static_cast<std::size_t>(tensor.layout.channels * voxels))
    throw ShapeError("patch buffer size does not match channels x window");

  const AxisSizes origin(window.size(), 0);
  for (std::int64_t c = 0; c < tensor.layout.channels; ++c) {
    copy_block(out.data() + c * voxels, window, origin,
               tensor.item_channel(p.item, c), tensor.layout.spatial, p.start, window);
  }
}

namespace {

void check_plan_matches(const DenseTensor& tensor, const PatchPlan& plan) {
  tensor.validate();
  if (tensor.layout != plan.layout)
    throw ShapeError("tensor layout does not match the plan's layout");
}

PatchStack extract_with_channels(const DenseTensor& tensor,
                                 std::shared_ptr<const PatchPlan> plan) {
  PatchStack stack;
  stack.plan = plan;
  stack.channels = tensor.layout.channels;
  stack.window = plan->spec.window;
  stack.values.resize(static_cast<std::size_t>(plan->size() * stack.patch_elements()));
  for (std::int64_t i = 0; i < plan->size(); ++i)
    extract_patch_into(tensor, *plan, i, stack.patch(i));
  return stack;
}

}  // namespace

PatchStack extract(const DenseTensor& tensor, std::shared_ptr<const PatchPlan> plan) {
  check_plan_matches(tensor, *plan);
  return extract_with_channels(tensor, std::move(plan));
}

PatchStack extract(const DenseTensor& tensor, const PatchPlan& plan) {
  return extract(tensor, std::make_shared<const PatchPlan>(plan));
}

std::pair<PatchStack, PatchStack> extract_pair(const DenseTensor& data,
                                               const DenseTensor& labels,
                                               std::shared_ptr<const PatchPlan> plan) {
  check_plan_matches(data, *plan);
  labels.validate();
  if (labels.layout.items != data.layout.items ||
      labels.layout.spatial != data.layout.spatial)
    throw ShapeError("data and labels must share item count and spatial extents");

  PatchStack data_stack = extract_with_channels(data, plan);

  // Same placements applied to the label tensor; only the channel count may
  // differ from the plan's layout.
  PatchStack label_stack;
  label_stack.plan = plan;
  label_stack.channels = labels.layout.channels;
  label_stack.window = plan->spec.window;
  label_stack.values.resize(
      static_cast<std::size_t>(plan->size() * label_stack.patch_elements()));
  const AxisSizes& window = plan->spec.window;
  const std::int64_t voxels = element_count(window);
  const AxisSizes origin(window.size(), 0);
  for (std::int64_t i = 0; i < plan->size(); ++i) {
    const Placement& p = plan->placements[static_cast<std::size_t>(i)];
    float* out = label_stack.patch(i).data();
    for (std::int64_t c = 0; c < labels.layout.channels; ++c)
      copy_block(out + c * voxels, window, origin, labels.item_channel(p.item, c),
                 labels.layout.spatial, p.start, window);
  }
  return {std::move(data_stack), std::move(label_stack)};
}

std::pair<PatchStack, PatchStack> extract_pair(const DenseTensor& data,
                                               const DenseTensor& labels,
                                               const PatchPlan& plan) {
  return extract_pair(data, labels, std::make_shared<const PatchPlan>(plan));
}

PatchStream::PatchStream(const DenseTensor& tensor, std::shared_ptr<const PatchPlan> plan)
    : tensor_(&tensor), plan_(std::move(plan)) {
  check_plan_matches(tensor, *plan_);
}

std::int64_t PatchStream::patch_elements() const {
  return tensor_->layout.channels * element_count(plan_->spec.window);
}

bool PatchStream::next(std::span<float> out) {
  if (next_ >= plan_->size()) return false;
  extract_patch_into(*tensor_, *plan_, next_, out);
  ++next_;
  return true;
}

}  // namespace tessellate
