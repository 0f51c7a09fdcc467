#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tessellate/subsample.hpp"

#include "json.hpp"

namespace tessellate {

// How "no annotation here" is encoded in label tensors. Class codes are
// non-negative integers stored as floats; the sentinel must be distinct from
// every possible class code.
struct LabelConvention {
  float unlabeled_sentinel = -1.0f;

  bool is_labeled(float value) const { return value != unlabeled_sentinel; }
  void validate() const;
};

// Outcome of filtering a paired patch stack down to annotated pairs.
struct CurationReport {
  std::int64_t total_patches = 0;
  std::int64_t retained_patches = 0;
  std::vector<std::int64_t> retained_indices;
  std::int64_t annotated_voxels_unique = 0;
  std::int64_t annotated_voxels_in_retained = 0;
  double duplication_rate = 0.0;  // 0 when nothing is annotated
};

nlohmann::json report_to_json(const CurationReport& report);
CurationReport report_from_json(const nlohmann::json& doc);
void save_report(const CurationReport& report, const std::filesystem::path& path);
CurationReport load_report(const std::filesystem::path& path);

// Marks every voxel within `border` of any window face as unobserved.
// Operates on patches, not the source tensor: a voxel masked at one window's
// edge may still be interior to an overlapping window.
PatchStack mask_border(const PatchStack& labels, const AxisSizes& border,
                       const LabelConvention& convention);

struct FilterResult {
  PatchStack data;
  PatchStack labels;
  CurationReport report;
};

// Keeps exactly the pairs whose label patch contains at least one
// non-sentinel voxel, preserving order and index-for-index pairing.
FilterResult filter_unlabeled(const PatchStack& data, const PatchStack& labels,
                              const LabelConvention& convention);

// Annotated-voxel occurrences across the retained windows divided by the
// unique annotated voxels those windows cover. Exactly 1 when windows do not
// overlap; grows with overlap-induced duplication.
double duplication_rate(const PatchPlan& plan, const DenseTensor& labels,
                        std::span<const std::int64_t> retained,
                        const LabelConvention& convention);

}  // namespace tessellate
