#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "tessellate/curate.hpp"
#include "tessellate/errors.hpp"
#include "test_util.hpp"

using namespace tessellate;

namespace {

constexpr float kSentinel = -1.0f;

DenseTensor labeled_block_volume(const TensorLayout& layout, const AxisSizes& lo,
                                 const AxisSizes& hi) {
  DenseTensor tensor;
  tensor.layout = layout;
  tensor.values.assign(static_cast<std::size_t>(layout.element_count()), kSentinel);
  const AxisSizes strides = row_major_strides(layout.spatial);
  AxisSizes c = lo;
  for (c[0] = lo[0]; c[0] < hi[0]; ++c[0])
    for (c[1] = lo[1]; c[1] < hi[1]; ++c[1]) {
      if (layout.spatial.size() == 2) {
        tensor.values[static_cast<std::size_t>(linear_index(c, strides))] = 1.0f;
      } else {
        for (c[2] = lo[2]; c[2] < hi[2]; ++c[2])
          tensor.values[static_cast<std::size_t>(linear_index(c, strides))] = 1.0f;
      }
    }
  return tensor;
}

PatchStack single_patch_stack(const TensorLayout& layout, const WindowSpec& spec,
                              std::vector<float> values) {
  PatchStack stack;
  stack.plan = std::make_shared<const PatchPlan>(build_plan(layout, spec));
  stack.channels = 1;
  stack.window = spec.window;
  stack.values = std::move(values);
  return stack;
}

}  // namespace

TEST_CASE("sentinel validation rejects class-code collisions") {
  CHECK_NOTHROW(LabelConvention{-1.0f}.validate());
  CHECK_NOTHROW(LabelConvention{-7.0f}.validate());
  CHECK_NOTHROW(LabelConvention{2.5f}.validate());
  CHECK_THROWS_AS(LabelConvention{0.0f}.validate(), InvalidSpecError);
  CHECK_THROWS_AS(LabelConvention{3.0f}.validate(), InvalidSpecError);
}

TEST_CASE("mask_border with zero border is the identity") {
  const TensorLayout layout{1, 1, {4, 4}};
  const WindowSpec spec{{4, 4}, {4, 4}, {0, 0}, 1.0};
  PatchStack stack = single_patch_stack(layout, spec, std::vector<float>(16, 2.0f));
  const PatchStack out = mask_border(stack, AxisSizes{0, 0}, LabelConvention{});
  CHECK(out.values == stack.values);
}

TEST_CASE("mask_border keeps only the 2x2 core of a fully labeled 4x4 patch") {
  const TensorLayout layout{1, 1, {4, 4}};
  const WindowSpec spec{{4, 4}, {4, 4}, {0, 0}, 1.0};
  PatchStack stack = single_patch_stack(layout, spec, std::vector<float>(16, 3.0f));
  const PatchStack out = mask_border(stack, AxisSizes{1, 1}, LabelConvention{});

  std::int64_t sentinels = 0;
  for (std::int64_t y = 0; y < 4; ++y)
    for (std::int64_t x = 0; x < 4; ++x) {
      const float v = out.values[static_cast<std::size_t>(y * 4 + x)];
      if (y >= 1 && y < 3 && x >= 1 && x < 3)
        CHECK(v == 3.0f);
      else {
        CHECK(v == kSentinel);
        ++sentinels;
      }
    }
  CHECK(sentinels == 12);
}

TEST_CASE("mask_border honors per-axis widths on a 6^3 patch") {
  const TensorLayout layout{1, 1, {6, 6, 6}};
  const WindowSpec spec{{6, 6, 6}, {6, 6, 6}, {0, 0, 0}, 1.0};
  PatchStack stack = single_patch_stack(layout, spec, std::vector<float>(216, 1.0f));
  const PatchStack out = mask_border(stack, AxisSizes{1, 2, 0}, LabelConvention{});

  const std::int64_t labeled =
      std::count(out.values.begin(), out.values.end(), 1.0f);
  CHECK(labeled == 4 * 2 * 6);
  CHECK(std::count(out.values.begin(), out.values.end(), kSentinel) == 216 - 48);
}

TEST_CASE("mask_border is idempotent and never un-sentinels a voxel") {
  const TensorLayout layout{1, 1, {8, 8}};
  const WindowSpec spec{{8, 8}, {8, 8}, {0, 0}, 1.0};
  auto values = testutil::random_values(64, 77, 0.0f, 5.0f);
  values[9] = kSentinel;  // an interior voxel already unobserved
  PatchStack stack = single_patch_stack(layout, spec, values);

  const PatchStack once = mask_border(stack, AxisSizes{2, 3}, LabelConvention{});
  const PatchStack twice = mask_border(once, AxisSizes{2, 3}, LabelConvention{});
  CHECK(once.values == twice.values);
  CHECK(once.values[9] == kSentinel);
}

TEST_CASE("mask_border rejects borders that consume the window") {
  const TensorLayout layout{1, 1, {4, 4}};
  const WindowSpec spec{{4, 4}, {4, 4}, {0, 0}, 1.0};
  PatchStack stack = single_patch_stack(layout, spec, std::vector<float>(16, 1.0f));
  CHECK_THROWS_AS(mask_border(stack, AxisSizes{2, 0}, LabelConvention{}),
                  InvalidSpecError);
  CHECK_THROWS_AS(mask_border(stack, AxisSizes{1}, LabelConvention{}), InvalidSpecError);
}

TEST_CASE("filter_unlabeled drops everything when no voxel is annotated") {
  const TensorLayout layout{1, 1, {8, 8}};
  const WindowSpec spec{{4, 4}, {4, 4}, {0, 0}, 1.0};
  DenseTensor data;
  data.layout = layout;
  data.values = testutil::random_values(64, 20);
  DenseTensor labels;
  labels.layout = layout;
  labels.values.assign(64, kSentinel);

  const auto [data_stack, label_stack] = extract_pair(data, labels, build_plan(layout, spec));
  const FilterResult result = filter_unlabeled(data_stack, label_stack, LabelConvention{});
  CHECK(result.report.total_patches == 4);
  CHECK(result.report.retained_patches == 0);
  CHECK(result.report.retained_indices.empty());
  CHECK(result.report.duplication_rate == 0.0);
  CHECK(result.data.count() == 0);
  CHECK(result.labels.count() == 0);
}

TEST_CASE("filter_unlabeled retains exactly the windows meeting the labeled block") {
  const TensorLayout layout{1, 1, {64, 64, 64}};
  const WindowSpec spec{{32, 32, 32}, {16, 16, 16}, {0, 0, 0}, 1.0};
  const AxisSizes lo{20, 20, 20}, hi{28, 28, 28};
  const DenseTensor labels = labeled_block_volume(layout, lo, hi);
  DenseTensor data;
  data.layout = layout;
  data.values = testutil::random_values(static_cast<std::size_t>(layout.element_count()), 21);

  const PatchPlan plan = build_plan(layout, spec);
  REQUIRE(plan.size() == 27);

  // Brute-force interval intersection oracle.
  std::vector<std::int64_t> expected;
  for (std::int64_t i = 0; i < plan.size(); ++i) {
    const Placement& p = plan.placements[static_cast<std::size_t>(i)];
    bool intersects = true;
    for (std::size_t a = 0; a < 3; ++a)
      intersects &= p.start[a] < hi[a] && p.start[a] + 32 > lo[a];
    if (intersects) expected.push_back(i);
  }
  REQUIRE(expected.size() == 8);

  const auto [data_stack, label_stack] = extract_pair(data, labels, plan);
  const FilterResult result = filter_unlabeled(data_stack, label_stack, LabelConvention{});
  CHECK(result.report.retained_indices == expected);
  CHECK(result.report.annotated_voxels_unique == 8 * 8 * 8);
  CHECK(result.report.annotated_voxels_in_retained == 8 * 8 * 8 * 8);
  CHECK(result.report.duplication_rate == 8.0);

  // Pairing preserved: retained patches map to the same placements.
  CHECK(result.data.source_indices == expected);
  CHECK(result.labels.source_indices == expected);
  for (std::int64_t k = 0; k < result.data.count(); ++k) {
    const auto patch = result.data.patch(k);
    const auto original = data_stack.patch(result.report.retained_indices[k]);
    CHECK(std::equal(patch.begin(), patch.end(), original.begin(), original.end()));
  }
}

TEST_CASE("border masking can empty a window that only touches labels at its edge") {
  const TensorLayout layout{1, 1, {8, 8}};
  const WindowSpec spec{{4, 4}, {2, 2}, {0, 0}, 1.0};
  const DenseTensor labels = labeled_block_volume(layout, {0, 0}, {1, 1});
  DenseTensor data;
  data.layout = layout;
  data.values = testutil::random_values(64, 22);

  const auto [data_stack, label_stack] = extract_pair(data, labels, build_plan(layout, spec));
  const FilterResult plain = filter_unlabeled(data_stack, label_stack, LabelConvention{});
  CHECK(plain.report.retained_patches == 1);  // only the window at (0,0)

  const PatchStack masked = mask_border(label_stack, AxisSizes{1, 1}, LabelConvention{});
  const FilterResult after = filter_unlabeled(data_stack, masked, LabelConvention{});
  CHECK(after.report.retained_patches == 0);
}

TEST_CASE("filter_unlabeled rejects unpaired stacks") {
  const TensorLayout layout{1, 1, {8, 8}};
  const WindowSpec spec{{4, 4}, {4, 4}, {0, 0}, 1.0};
  DenseTensor data;
  data.layout = layout;
  data.values = testutil::random_values(64, 23);
  const PatchStack stack = extract(data, build_plan(layout, spec));

  PatchStack other = stack;
  other.values.resize(other.values.size() - 16);  // one patch fewer
  CHECK_THROWS_AS(filter_unlabeled(stack, other, LabelConvention{}), ShapeError);

  const WindowSpec narrow{{4, 4}, {2, 2}, {0, 0}, 1.0};
  const PatchStack different = extract(data, build_plan(layout, narrow));
  CHECK_THROWS_AS(filter_unlabeled(stack, different, LabelConvention{}), ShapeError);
}

TEST_CASE("duplication_rate is exactly 1 for non-overlapping aligned windows") {
  const TensorLayout layout{1, 1, {64, 64, 64}};
  const WindowSpec spec{{32, 32, 32}, {32, 32, 32}, {0, 0, 0}, 1.0};
  const DenseTensor labels = labeled_block_volume(layout, {10, 10, 10}, {50, 50, 50});
  const PatchPlan plan = build_plan(layout, spec);
  std::vector<std::int64_t> all(static_cast<std::size_t>(plan.size()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int64_t>(i);
  CHECK(duplication_rate(plan, labels, all, LabelConvention{}) == 1.0);
}

TEST_CASE("duplication_rate counts window membership of a single labeled voxel") {
  const TensorLayout layout{1, 1, {64, 64}};
  const WindowSpec spec{{32, 32}, {16, 16}, {0, 0}, 1.0};
  const DenseTensor labels = labeled_block_volume(layout, {32, 32}, {33, 33});
  const PatchPlan plan = build_plan(layout, spec);

  std::vector<std::int64_t> retained;
  std::int64_t membership = 0;
  for (std::int64_t i = 0; i < plan.size(); ++i) {
    const Placement& p = plan.placements[static_cast<std::size_t>(i)];
    const bool contains = p.start[0] <= 32 && 32 < p.start[0] + 32 &&
                          p.start[1] <= 32 && 32 < p.start[1] + 32;
    retained.push_back(i);
    if (contains) ++membership;
  }
  CHECK(membership == 4);
  CHECK(duplication_rate(plan, labels, retained, LabelConvention{}) ==
        static_cast<double>(membership));

  // Permutation invariance.
  std::mt19937 rng(24);
  std::shuffle(retained.begin(), retained.end(), rng);
  CHECK(duplication_rate(plan, labels, retained, LabelConvention{}) ==
        static_cast<double>(membership));
}

TEST_CASE("duplication_rate with no annotated voxels is an error") {
  const TensorLayout layout{1, 1, {16, 16}};
  const WindowSpec spec{{8, 8}, {8, 8}, {0, 0}, 1.0};
  DenseTensor labels;
  labels.layout = layout;
  labels.values.assign(256, kSentinel);
  const PatchPlan plan = build_plan(layout, spec);
  const std::vector<std::int64_t> all{0, 1, 2, 3};
  CHECK_THROWS_AS(duplication_rate(plan, labels, all, LabelConvention{}),
                  UndefinedStatisticError);

  const std::vector<std::int64_t> bad{99};
  CHECK_THROWS_AS(duplication_rate(plan, labels, bad, LabelConvention{}),
                  OutOfRangeError);
}

TEST_CASE("curation reports round-trip through JSON") {
  CurationReport report;
  report.total_patches = 2310;
  report.retained_patches = 3;
  report.retained_indices = {5, 9, 2301};
  report.annotated_voxels_unique = 512;
  report.annotated_voxels_in_retained = 4096;
  report.duplication_rate = 8.0;

  const auto dir = testutil::scratch_dir("curate_report");
  save_report(report, dir / "report.json");
  const CurationReport loaded = load_report(dir / "report.json");
  CHECK(loaded.total_patches == report.total_patches);
  CHECK(loaded.retained_indices == report.retained_indices);
  CHECK(loaded.duplication_rate == report.duplication_rate);
}
