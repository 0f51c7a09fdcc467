#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tessellate/nd.hpp"

#include "json.hpp"

namespace tessellate {

// Shape of a dense input volume: N items of C channels over a 2-D (Y,X) or
// 3-D (Z,Y,X) spatial grid.
struct TensorLayout {
  std::int64_t items = 1;
  std::int64_t channels = 1;
  AxisSizes spatial;

  std::size_t spatial_rank() const { return spatial.size(); }
  std::int64_t voxels_per_item() const { return tessellate::element_count(spatial); }
  std::int64_t element_count() const {
    return items * channels * voxels_per_item();
  }

  void validate() const;

  bool operator==(const TensorLayout&) const = default;
};

// Per-axis window geometry plus the border weighting knob. Governs placement
// and the relative significance of border voxels when stitching.
struct WindowSpec {
  AxisSizes window;
  AxisSizes step;
  AxisSizes border;
  double border_weight = 1.0;

  std::size_t rank() const { return window.size(); }
  std::int64_t window_voxels() const { return element_count(window); }

  void validate() const;
  void validate_against(const TensorLayout& layout) const;

  bool operator==(const WindowSpec&) const = default;
};

// One window position: which item it reads and where the window's low corner
// sits. The touches flags mark coincidence with the global tensor boundary;
// boundary-touching faces are weighted as interior when stitching.
struct Placement {
  std::int64_t item = 0;
  AxisSizes start;
  std::vector<bool> touches_low;
  std::vector<bool> touches_high;

  bool operator==(const Placement&) const = default;
};

// Deterministic, ordered list of placements for one layout + spec.
// Ordering is item-major, then spatial axes slowest-to-fastest ascending.
struct PatchPlan {
  TensorLayout layout;
  WindowSpec spec;
  std::vector<Placement> placements;

  std::int64_t size() const { return static_cast<std::int64_t>(placements.size()); }

  bool operator==(const PatchPlan&) const = default;
};

// Start offsets of all windows along one axis: multiples of `step` that keep
// the window inside the extent, with a final stepped-back position appended
// so the last window's trailing edge aligns with the tensor boundary.
std::vector<std::int64_t> axis_positions(std::int64_t extent, std::int64_t window,
                                         std::int64_t step);

PatchPlan build_plan(const TensorLayout& layout, const WindowSpec& spec);

// Per-voxel stitch weights for one window placement.
struct WeightMap {
  AxisSizes shape;
  std::vector<float> values;

  float at(std::span<const std::int64_t> coords) const {
    return values[linear_index(coords, row_major_strides(shape))];
  }
};

// 1-D weight profile along one axis: `border_weight` within `border` voxels
// of a face, 1 elsewhere. A face that touches the global tensor boundary is
// treated as interior (weight 1) so outer-shell voxels keep positive weight.
std::vector<float> axis_weights(std::int64_t window, std::int64_t border,
                                double border_weight, bool touches_low,
                                bool touches_high);

// Full window weight map; per-voxel weight is the minimum of the per-axis
// profiles, so any voxel inside an unadjusted border zone gets border_weight.
WeightMap weight_map(const WindowSpec& spec, const Placement& placement);

// JSON plan document, version tag "tessellate-plan/1".
nlohmann::json plan_to_json(const PatchPlan& plan);
PatchPlan plan_from_json(const nlohmann::json& doc);
void save_plan(const PatchPlan& plan, const std::filesystem::path& path);
PatchPlan load_plan(const std::filesystem::path& path);

nlohmann::json layout_to_json(const TensorLayout& layout);
TensorLayout layout_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const WindowSpec& spec);
WindowSpec spec_from_json(const nlohmann::json& doc);

}  // namespace tessellate
