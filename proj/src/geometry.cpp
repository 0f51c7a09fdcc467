#include "tessellate/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tessellate/errors.hpp"

namespace tessellate {

namespace {

std::string axes_to_string(std::span<const std::int64_t> v) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ")";
  return os.str();
}

}  // namespace

void TensorLayout::validate() const {
  if (items < 1) throw InvalidSpecError("layout: item count must be >= 1");
  if (channels < 1) throw InvalidSpecError("layout: channel count must be >= 1");
  if (spatial.size() != 2 && spatial.size() != 3)
    throw InvalidSpecError("layout: spatial rank must be 2 or 3, got " +
                           std::to_string(spatial.size()));
  for (auto e : spatial)
    if (e < 1)
      throw InvalidSpecError("layout: spatial extents must be >= 1, got " +
                             axes_to_string(spatial));
}

void WindowSpec::validate() const {
  if (window.size() != 2 && window.size() != 3)
    throw InvalidSpecError("spec: window rank must be 2 or 3, got " +
                           std::to_string(window.size()));
  if (step.size() != window.size() || border.size() != window.size())
    throw InvalidSpecError("spec: window/step/border must share an axis count");
  for (std::size_t a = 0; a < window.size(); ++a) {
    if (window[a] < 1)
      throw InvalidSpecError("spec: window must be >= 1 per axis, got " +
                             axes_to_string(window));
    if (step[a] < 1 || step[a] > window[a])
      throw InvalidSpecError("spec: step must satisfy 1 <= step <= window, got step " +
                             axes_to_string(step) + " for window " + axes_to_string(window));
    if (border[a] < 0 || 2 * border[a] >= window[a])
      throw InvalidSpecError(
          "spec: border must satisfy 0 <= 2*border < window (a nonempty interior "
          "must remain), got border " +
          axes_to_string(border) + " for window " + axes_to_string(window));
  }
  if (border_weight < 0.0 || border_weight > 1.0)
    throw InvalidSpecError("spec: border_weight must lie in [0, 1], got " +
                           std::to_string(border_weight));
}

void WindowSpec::validate_against(const TensorLayout& layout) const {
  validate();
  layout.validate();
  if (window.size() != layout.spatial.size())
    throw InvalidSpecError("spec: window rank " + std::to_string(window.size()) +
                           " does not match layout rank " +
                           std::to_string(layout.spatial.size()));
  for (std::size_t a = 0; a < window.size(); ++a)
    if (window[a] > layout.spatial[a])
      throw InvalidSpecError("spec: window " + axes_to_string(window) +
                             " exceeds tensor extent " + axes_to_string(layout.spatial));
}

std::vector<std::int64_t> axis_positions(std::int64_t extent, std::int64_t window,
                                         std::int64_t step) {
  if (window < 1 || window > extent)
    throw InvalidSpecError("axis_positions: need 1 <= window <= extent, got window " +
                           std::to_string(window) + " for extent " + std::to_string(extent));
  if (step < 1 || step > window)
    throw InvalidSpecError("axis_positions: need 1 <= step <= window, got step " +
                           std::to_string(step));

  const std::int64_t last = extent - window;
  std::vector<std::int64_t> positions;
  positions.reserve(static_cast<std::size_t>(last / step) + 2);
  for (std::int64_t p = 0; p <= last; p += step) positions.push_back(p);
  if (positions.back() != last) positions.push_back(last);  // step-back correction
  return positions;
}

PatchPlan build_plan(const TensorLayout& layout, const WindowSpec& spec) {
  spec.validate_against(layout);

  const std::size_t rank = spec.rank();
  std::vector<std::vector<std::int64_t>> positions(rank);
  std::int64_t per_item = 1;
  for (std::size_t a = 0; a < rank; ++a) {
    positions[a] = axis_positions(layout.spatial[a], spec.window[a], spec.step[a]);
    per_item *= static_cast<std::int64_t>(positions[a].size());
  }

  PatchPlan plan{layout, spec, {}};
  plan.placements.reserve(static_cast<std::size_t>(layout.items * per_item));

  AxisSizes counts(rank);
  for (std::size_t a = 0; a < rank; ++a)
    counts[a] = static_cast<std::int64_t>(positions[a].size());

  for (std::int64_t n = 0; n < layout.items; ++n) {
    AxisSizes idx(rank, 0);
    do {
      Placement p;
      p.item = n;
      p.start.resize(rank);
      p.touches_low.resize(rank);
      p.touches_high.resize(rank);
      for (std::size_t a = 0; a < rank; ++a) {
        p.start[a] = positions[a][static_cast<std::size_t>(idx[a])];
        p.touches_low[a] = (p.start[a] == 0);
        p.touches_high[a] = (p.start[a] == layout.spatial[a] - spec.window[a]);
      }
      plan.placements.push_back(std::move(p));
    } while (nd_increment(idx, counts));
  }
  return plan;
}

std::vector<float> axis_weights(std::int64_t window, std::int64_t border,
                                double border_weight, bool touches_low,
                                bool touches_high) {
  std::vector<float> w(static_cast<std::size_t>(window), 1.0f);
  const float bw = static_cast<float>(border_weight);
  if (!touches_low)
    for (std::int64_t i = 0; i < border; ++i) w[static_cast<std::size_t>(i)] = bw;
  if (!touches_high)
    for (std::int64_t i = window - border; i < window; ++i)
      w[static_cast<std::size_t>(i)] = std::min(w[static_cast<std::size_t>(i)], bw);
  return w;
}

WeightMap weight_map(const WindowSpec& spec, const Placement& placement) {
  spec.validate();
  const std::size_t rank = spec.rank();
  if (placement.start.size() != rank || placement.touches_low.size() != rank ||
      placement.touches_high.size() != rank)
    throw ShapeError("weight_map: placement rank does not match spec");

  std::vector<std::vector<float>> axis(rank);
  for (std::size_t a = 0; a < rank; ++a)
    axis[a] = axis_weights(spec.window[a], spec.border[a], spec.border_weight,
                           placement.touches_low[a], placement.touches_high[a]);

  WeightMap map;
  map.shape = spec.window;
  map.values.resize(static_cast<std::size_t>(spec.window_voxels()));

  AxisSizes coords(rank, 0);
  std::size_t i = 0;
  do {
    float w = 1.0f;
    for (std::size_t a = 0; a < rank; ++a)
      w = std::min(w, axis[a][static_cast<std::size_t>(coords[a])]);
    map.values[i++] = w;
  } while (nd_increment(coords, spec.window));
  return map;
}

// --- JSON ------------------------------------------------------------------

namespace {

constexpr const char* kPlanFormat = "tessellate-plan/1";

AxisSizes axes_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + ": expected an array");
  AxisSizes v;
  for (const auto& e : j) v.push_back(e.get<std::int64_t>());
  return v;
}

}  // namespace

nlohmann::json layout_to_json(const TensorLayout& layout) {
  return {{"items", layout.items},
          {"channels", layout.channels},
          {"spatial", layout.spatial}};
}

TensorLayout layout_from_json(const nlohmann::json& doc) {
  TensorLayout layout;
  layout.items = doc.at("items").get<std::int64_t>();
  layout.channels = doc.at("channels").get<std::int64_t>();
  layout.spatial = axes_from_json(doc.at("spatial"), "layout.spatial");
  layout.validate();
  return layout;
}

nlohmann::json spec_to_json(const WindowSpec& spec) {
  return {{"window", spec.window},
          {"step", spec.step},
          {"border", spec.border},
          {"border_weight", spec.border_weight}};
}

WindowSpec spec_from_json(const nlohmann::json& doc) {
  WindowSpec spec;
  spec.window = axes_from_json(doc.at("window"), "spec.window");
  spec.step = axes_from_json(doc.at("step"), "spec.step");
  spec.border = axes_from_json(doc.at("border"), "spec.border");
  spec.border_weight = doc.at("border_weight").get<double>();
  spec.validate();
  return spec;
}

nlohmann::json plan_to_json(const PatchPlan& plan) {
  nlohmann::json placements = nlohmann::json::array();
  for (const auto& p : plan.placements)
    placements.push_back({{"item", p.item}, {"start", p.start}});
  return {{"format", kPlanFormat},
          {"layout", layout_to_json(plan.layout)},
          {"spec", spec_to_json(plan.spec)},
          {"placements", std::move(placements)}};
}

PatchPlan plan_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kPlanFormat)
    throw FormatError("plan: missing or unknown format tag (want tessellate-plan/1)");

  PatchPlan plan;
  plan.layout = layout_from_json(doc.at("layout"));
  plan.spec = spec_from_json(doc.at("spec"));
  plan.spec.validate_against(plan.layout);

  const std::size_t rank = plan.spec.rank();
  for (const auto& e : doc.at("placements")) {
    Placement p;
    p.item = e.at("item").get<std::int64_t>();
    p.start = axes_from_json(e.at("start"), "placement.start");
    if (p.item < 0 || p.item >= plan.layout.items)
      throw FormatError("plan: placement item index out of range");
    if (p.start.size() != rank)
      throw FormatError("plan: placement rank does not match spec");
    p.touches_low.resize(rank);
    p.touches_high.resize(rank);
    for (std::size_t a = 0; a < rank; ++a) {
      const std::int64_t last = plan.layout.spatial[a] - plan.spec.window[a];
      if (p.start[a] < 0 || p.start[a] > last)
        throw FormatError("plan: placement start out of range");
      p.touches_low[a] = (p.start[a] == 0);
      p.touches_high[a] = (p.start[a] == last);
    }
    plan.placements.push_back(std::move(p));
  }
  return plan;
}

void save_plan(const PatchPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write plan file: " + path.string());
  out << plan_to_json(plan).dump(1) << "\n";
  if (!out) throw IoError("short write on plan file: " + path.string());
}

PatchPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read plan file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("plan file is not valid JSON: " + path.string() + ": " + e.what());
  }
  return plan_from_json(doc);
}

}  // namespace tessellate
