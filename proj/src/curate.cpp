#include "tessellate/curate.hpp"

#include <cmath>
#include <fstream>

#include "tessellate/errors.hpp"

namespace tessellate {

void LabelConvention::validate() const {
  if (!std::isfinite(unlabeled_sentinel))
    throw InvalidSpecError("sentinel must be finite");
  if (unlabeled_sentinel >= 0.0f &&
      unlabeled_sentinel == std::floor(unlabeled_sentinel))
    throw InvalidSpecError(
        "sentinel collides with the non-negative integer class codes");
}

namespace {

// True where a window voxel lies within `border` of any window face.
std::vector<std::uint8_t> border_mask(const AxisSizes& window, const AxisSizes& border) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(element_count(window)), 0);
  AxisSizes coords(window.size(), 0);
  std::size_t i = 0;
  do {
    bool in_border = false;
    for (std::size_t a = 0; a < window.size(); ++a)
      if (coords[a] < border[a] || coords[a] >= window[a] - border[a]) {
        in_border = true;
        break;
      }
    mask[i++] = in_border ? 1 : 0;
  } while (nd_increment(coords, window));
  return mask;
}

// Spatial voxels of one patch carrying any non-sentinel channel value.
std::int64_t labeled_voxels(std::span<const float> patch, std::int64_t channels,
                            std::int64_t voxels, const LabelConvention& conv) {
  std::int64_t count = 0;
  for (std::int64_t v = 0; v < voxels; ++v) {
    for (std::int64_t c = 0; c < channels; ++c) {
      if (conv.is_labeled(patch[static_cast<std::size_t>(c * voxels + v)])) {
        ++count;
        break;
      }
    }
  }
  return count;
}

// Bitmap over (item, spatial voxel) coordinates of one tensor layout.
class VoxelBitmap {
 public:
  explicit VoxelBitmap(const TensorLayout& layout)
      : voxels_per_item_(layout.voxels_per_item()),
        strides_(row_major_strides(layout.spatial)),
        marked_(static_cast<std::size_t>(layout.items * voxels_per_item_), false) {}

  // Marks voxel `window_coords` (patch-local) of the given placement; true if
  // it was not marked before.
  bool mark(const Placement& p, std::span<const std::int64_t> window_coords) {
    std::int64_t off = p.item * voxels_per_item_;
    for (std::size_t a = 0; a < window_coords.size(); ++a)
      off += (p.start[a] + window_coords[a]) * strides_[a];
    const auto i = static_cast<std::size_t>(off);
    const bool fresh = !marked_[i];
    marked_[i] = true;
    return fresh;
  }

 private:
  std::int64_t voxels_per_item_;
  AxisSizes strides_;
  std::vector<bool> marked_;
};

}  // namespace

PatchStack mask_border(const PatchStack& labels, const AxisSizes& border,
                       const LabelConvention& convention) {
  convention.validate();
  if (border.size() != labels.window.size())
    throw InvalidSpecError("border rank does not match the stack's window rank");
  for (std::size_t a = 0; a < border.size(); ++a)
    if (border[a] < 0 || 2 * border[a] >= labels.window[a])
      throw InvalidSpecError("border must satisfy 0 <= 2*border < window");

  PatchStack out = labels;
  const std::vector<std::uint8_t> mask = border_mask(labels.window, border);
  const std::int64_t voxels = element_count(labels.window);
  for (std::int64_t i = 0; i < out.count(); ++i) {
    const std::span<float> patch = out.patch(i);
    for (std::int64_t c = 0; c < out.channels; ++c) {
      float* block = patch.data() + c * voxels;
      for (std::int64_t v = 0; v < voxels; ++v)
        if (mask[static_cast<std::size_t>(v)]) block[v] = convention.unlabeled_sentinel;
    }
  }
  return out;
}

FilterResult filter_unlabeled(const PatchStack& data, const PatchStack& labels,
                              const LabelConvention& convention) {
  convention.validate();
  if (!data.plan || !labels.plan)
    throw ShapeError("filter_unlabeled: stacks must reference a plan");
  if (data.plan != labels.plan && !(*data.plan == *labels.plan))
    throw ShapeError("filter_unlabeled: stacks were built from different plans");
  if (data.count() != labels.count())
    throw ShapeError("filter_unlabeled: stacks hold different patch counts");
  if (data.source_indices != labels.source_indices)
    throw ShapeError("filter_unlabeled: stacks are not paired index-for-index");

  const std::int64_t total = labels.count();
  const std::int64_t voxels = element_count(labels.window);

  FilterResult result;
  result.report.total_patches = total;

  VoxelBitmap bitmap(labels.plan->layout);
  std::vector<std::int64_t> retained;
  for (std::int64_t i = 0; i < total; ++i) {
    const std::span<const float> patch = labels.patch(i);
    const std::int64_t labeled = labeled_voxels(patch, labels.channels, voxels, convention);
    if (labeled == 0) continue;
    retained.push_back(i);
    result.report.annotated_voxels_in_retained += labeled;

    const Placement& p =
        labels.plan->placements[static_cast<std::size_t>(labels.source_index(i))];
    AxisSizes coords(labels.window.size(), 0);
    std::int64_t v = 0;
    do {
      for (std::int64_t c = 0; c < labels.channels; ++c) {
        if (convention.is_labeled(patch[static_cast<std::size_t>(c * voxels + v)])) {
          if (bitmap.mark(p, coords)) ++result.report.annotated_voxels_unique;
          break;
        }
      }
      ++v;
    } while (nd_increment(coords, labels.window));
  }

  result.report.retained_patches = static_cast<std::int64_t>(retained.size());
  result.report.retained_indices = retained;
  if (result.report.annotated_voxels_unique > 0)
    result.report.duplication_rate =
        static_cast<double>(result.report.annotated_voxels_in_retained) /
        static_cast<double>(result.report.annotated_voxels_unique);

  auto take = [&](const PatchStack& in) {
    PatchStack out;
    out.plan = in.plan;
    out.channels = in.channels;
    out.window = in.window;
    out.values.resize(static_cast<std::size_t>(
        static_cast<std::int64_t>(retained.size()) * in.patch_elements()));
    out.source_indices.reserve(retained.size());
    for (std::size_t k = 0; k < retained.size(); ++k) {
      const std::span<const float> src = in.patch(retained[k]);
      std::copy(src.begin(), src.end(),
                out.values.begin() + static_cast<std::ptrdiff_t>(k * src.size()));
      out.source_indices.push_back(in.source_index(retained[k]));
    }
    return out;
  };
  result.data = take(data);
  result.labels = take(labels);
  return result;
}

double duplication_rate(const PatchPlan& plan, const DenseTensor& labels,
                        std::span<const std::int64_t> retained,
                        const LabelConvention& convention) {
  convention.validate();
  labels.validate();
  if (labels.layout.items != plan.layout.items ||
      labels.layout.spatial != plan.layout.spatial)
    throw ShapeError("label tensor does not match the plan's items/spatial extents");

  const AxisSizes& window = plan.spec.window;
  const std::int64_t voxels = element_count(window);
  const std::int64_t channels = labels.layout.channels;

  VoxelBitmap bitmap(labels.layout);
  std::vector<float> patch(static_cast<std::size_t>(channels * voxels));

  std::int64_t occurrences = 0;
  std::int64_t unique = 0;
  for (const std::int64_t index : retained) {
    if (index < 0 || index >= plan.size())
      throw OutOfRangeError("retained index " + std::to_string(index) +
                            " outside plan of " + std::to_string(plan.size()));
    extract_patch_into(labels, plan, index, patch);
    const Placement& p = plan.placements[static_cast<std::size_t>(index)];
    AxisSizes coords(window.size(), 0);
    std::int64_t v = 0;
    do {
      for (std::int64_t c = 0; c < channels; ++c) {
        if (convention.is_labeled(patch[static_cast<std::size_t>(c * voxels + v)])) {
          ++occurrences;
          if (bitmap.mark(p, coords)) ++unique;
          break;
        }
      }
      ++v;
    } while (nd_increment(coords, window));
  }

  if (unique == 0)
    throw UndefinedStatisticError(
        "duplication rate is undefined: no annotated voxels under the retained windows");
  return static_cast<double>(occurrences) / static_cast<double>(unique);
}

// --- JSON ------------------------------------------------------------------

namespace {
constexpr const char* kReportFormat = "tessellate-report/1";
}

nlohmann::json report_to_json(const CurationReport& report) {
  return {{"format", kReportFormat},
          {"total_patches", report.total_patches},
          {"retained_patches", report.retained_patches},
          {"retained_indices", report.retained_indices},
          {"annotated_voxels_unique", report.annotated_voxels_unique},
          {"annotated_voxels_in_retained", report.annotated_voxels_in_retained},
          {"duplication_rate", report.duplication_rate}};
}

CurationReport report_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kReportFormat)
    throw FormatError("report: missing or unknown format tag (want tessellate-report/1)");
  CurationReport report;
  report.total_patches = doc.at("total_patches").get<std::int64_t>();
  report.retained_patches = doc.at("retained_patches").get<std::int64_t>();
  report.retained_indices = doc.at("retained_indices").get<std::vector<std::int64_t>>();
  report.annotated_voxels_unique = doc.at("annotated_voxels_unique").get<std::int64_t>();
  report.annotated_voxels_in_retained =
      doc.at("annotated_voxels_in_retained").get<std::int64_t>();
  report.duplication_rate = doc.at("duplication_rate").get<double>();
  return report;
}

void save_report(const CurationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report file: " + path.string());
  out << report_to_json(report).dump(1) << "\n";
  if (!out) throw IoError("short write on report file: " + path.string());
}

CurationReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("report file is not valid JSON: " + path.string() + ": " + e.what());
  }
  return report_from_json(doc);
}

}  // namespace tessellate
