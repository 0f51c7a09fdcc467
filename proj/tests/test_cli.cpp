#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <map>

#include "tessellate/curate.hpp"
#include "tessellate/geometry.hpp"
#include "tessellate/store.hpp"
#include "tessellate/volume_io.hpp"
#include "test_util.hpp"

using namespace tessellate;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli_output.txt";
  const std::string command =
      "\"" TESSELLATE_CLI_PATH "\" " + args + " > \"" + log.string() + "\" 2>&1";
  RunResult result;
  result.code = testutil::run_command(command);
  if (fs::exists(log)) result.output = read_text_file(log);
  return result;
}

DenseTensor make_volume(const TensorLayout& layout, std::uint32_t seed) {
  DenseTensor tensor;
  tensor.layout = layout;
  tensor.values = testutil::random_values(
      static_cast<std::size_t>(layout.element_count()), seed);
  return tensor;
}

void write_raw_volume(const fs::path& path, const DenseTensor& tensor) {
  std::ofstream raw(path, std::ios::binary);
  raw.write(reinterpret_cast<const char*>(tensor.values.data()),
            static_cast<std::streamsize>(tensor.values.size() * sizeof(float)));
  std::ofstream sidecar(path.string() + ".json");
  sidecar << nlohmann::json{{"shape", array_shape_from_layout(tensor.layout)}}.dump();
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      files[fs::relative(entry.path(), root).string()] = read_text_file(entry.path());
  return files;
}

}  // namespace

TEST_CASE("plan reports the 2310-placement geometry from metadata alone") {
  const auto dir = testutil::scratch_dir("cli_plan_big");
  // Metadata-only volume: no chunk data is ever touched by 'plan'.
  ChunkedArray::create(dir / "vol",
                       ArrayMetadata{{1, 1, 236, 720, 510}, {1, 1, 64, 64, 64}});

  const auto result = run_cli("plan \"" + (dir / "vol").string() +
                                  "\" --window 64,64,64 --step 32,32,32 --out \"" +
                                  (dir / "plan.json").string() + "\"",
                              dir);
  CHECK(result.code == 0);
  CHECK(result.output.find("placements: 2310") != std::string::npos);
  CHECK(load_plan(dir / "plan.json").size() == 2310);
}

TEST_CASE("plan validates the spec before touching data") {
  const auto dir = testutil::scratch_dir("cli_plan_invalid");
  ChunkedArray::create(dir / "vol", ArrayMetadata{{1, 1, 32, 32}, {1, 1, 32, 32}});
  const auto result =
      run_cli("plan \"" + (dir / "vol").string() + "\" --window 8,8 --step 9,9", dir);
  CHECK(result.code == 2);
}

TEST_CASE("plan with window equal to the extent yields one placement") {
  const auto dir = testutil::scratch_dir("cli_plan_single");
  ChunkedArray::create(dir / "vol", ArrayMetadata{{1, 1, 24, 16}, {1, 1, 24, 16}});
  const auto result =
      run_cli("plan \"" + (dir / "vol").string() + "\" --window 24,16", dir);
  CHECK(result.code == 0);
  CHECK(result.output.find("placements: 1") != std::string::npos);
}

TEST_CASE("unlabeled subsample writes every patch") {
  const auto dir = testutil::scratch_dir("cli_subsample_plain");
  const DenseTensor volume = make_volume(TensorLayout{1, 2, {12, 10}}, 101);
  save_volume(dir / "vol", volume);
  REQUIRE(run_cli("plan \"" + (dir / "vol").string() +
                      "\" --window 6,5 --step 3,3 --out \"" +
                      (dir / "plan.json").string() + "\"",
                  dir)
              .code == 0);

  const auto result = run_cli("subsample \"" + (dir / "vol").string() + "\" --plan \"" +
                                  (dir / "plan.json").string() + "\" --out \"" +
                                  (dir / "out").string() + "\"",
                              dir);
  CHECK(result.code == 0);

  const PatchPlan plan = load_plan(dir / "plan.json");
  ChunkedArray data = ChunkedArray::open(dir / "out" / "data");
  CHECK(data.metadata().shape == AxisSizes{plan.size(), 2, 6, 5});
  CHECK(!fs::exists(dir / "out" / "report.json"));

  // Spot-check one stored patch against a direct extraction.
  DenseTensor reload = load_volume(dir / "vol");
  const PatchStack stack = extract(reload, plan);
  const auto patch = data.read_region(AxisSizes{3, 0, 0, 0}, AxisSizes{1, 2, 6, 5});
  const auto expect = stack.patch(3);
  CHECK(std::equal(patch.begin(), patch.end(), expect.begin(), expect.end()));
}

TEST_CASE("labeled subsample masks, filters and reports") {
  const auto dir = testutil::scratch_dir("cli_subsample_labeled");
  const TensorLayout layout{1, 1, {16, 16}};
  DenseTensor volume = make_volume(layout, 102);
  save_volume(dir / "vol", volume);

  DenseTensor labels;
  labels.layout = layout;
  labels.values.assign(256, -1.0f);
  // One labeled voxel well inside the first window.
  labels.values[static_cast<std::size_t>(2 * 16 + 2)] = 1.0f;
  save_volume(dir / "labels", labels);

  REQUIRE(run_cli("plan \"" + (dir / "vol").string() +
                      "\" --window 8,8 --step 4,4 --out \"" +
                      (dir / "plan.json").string() + "\"",
                  dir)
              .code == 0);
  const auto result = run_cli("subsample \"" + (dir / "vol").string() + "\" --labels \"" +
                                  (dir / "labels").string() + "\" --plan \"" +
                                  (dir / "plan.json").string() + "\" --out \"" +
                                  (dir / "out").string() + "\"",
                              dir);
  CHECK(result.code == 0);

  const CurationReport report = load_report(dir / "out" / "report.json");
  CHECK(report.total_patches == 9);
  CHECK(report.retained_patches == 1);  // only the window at the origin sees (2,2)
  CHECK(report.retained_indices == std::vector<std::int64_t>{0});
  CHECK(report.annotated_voxels_unique == 1);

  ChunkedArray data = ChunkedArray::open(dir / "out" / "data");
  CHECK(data.metadata().shape == AxisSizes{1, 1, 8, 8});
  ChunkedArray stored_labels = ChunkedArray::open(dir / "out" / "labels");
  CHECK(stored_labels.metadata().shape == AxisSizes{1, 1, 8, 8});
}

TEST_CASE("stitching identity results reproduces the volume") {
  const auto dir = testutil::scratch_dir("cli_stitch");
  const TensorLayout layout{1, 2, {20, 14}};
  DenseTensor volume = make_volume(layout, 103);
  save_volume(dir / "vol", volume);

  REQUIRE(run_cli("plan \"" + (dir / "vol").string() +
                      "\" --window 8,6 --step 5,4 --border 2,1 --border-weight 0.5 "
                      "--out \"" +
                      (dir / "plan.json").string() + "\"",
                  dir)
              .code == 0);
  REQUIRE(run_cli("subsample \"" + (dir / "vol").string() + "\" --plan \"" +
                      (dir / "plan.json").string() + "\" --out \"" +
                      (dir / "patches").string() + "\"",
                  dir)
              .code == 0);

  const auto result =
      run_cli("stitch \"" + (dir / "patches" / "data").string() + "\" --plan \"" +
                  (dir / "plan.json").string() + "\" --out \"" +
                  (dir / "ws").string() + "\" --workers 2",
              dir);
  CHECK(result.code == 0);
  CHECK(result.output.find("coverage:") != std::string::npos);

  ChunkedArray output = ChunkedArray::open(dir / "ws" / "output");
  CHECK(output.metadata().shape == AxisSizes{1, 2, 20, 14});
  const auto values = read_full_array(output);
  double max_err = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    max_err = std::max(max_err,
                       static_cast<double>(std::abs(values[i] - volume.values[i])));
  CHECK(max_err <= 1e-5);
}

TEST_CASE("stitch detects missing result patches") {
  const auto dir = testutil::scratch_dir("cli_stitch_missing");
  const TensorLayout layout{1, 1, {12, 12}};
  save_volume(dir / "vol", make_volume(layout, 104));
  REQUIRE(run_cli("plan \"" + (dir / "vol").string() +
                      "\" --window 6,6 --step 3,3 --out \"" +
                      (dir / "plan.json").string() + "\"",
                  dir)
              .code == 0);
  REQUIRE(run_cli("subsample \"" + (dir / "vol").string() + "\" --plan \"" +
                      (dir / "plan.json").string() + "\" --out \"" +
                      (dir / "patches").string() + "\"",
                  dir)
              .code == 0);
  fs::remove(dir / "patches" / "data" / "2.0.0.0");

  const auto result =
      run_cli("stitch \"" + (dir / "patches" / "data").string() + "\" --plan \"" +
                  (dir / "plan.json").string() + "\" --out \"" + (dir / "ws").string() +
                  "\"",
              dir);
  CHECK(result.code == 5);
  CHECK(result.output.find("missing patch 2") != std::string::npos);
}

TEST_CASE("a hand-written partial plan triggers the coverage policy") {
  const auto dir = testutil::scratch_dir("cli_stitch_coverage");
  const TensorLayout layout{1, 1, {8, 8}};
  const WindowSpec spec{{4, 4}, {4, 4}, {0, 0}, 1.0};
  PatchPlan plan = build_plan(layout, spec);
  plan.placements.resize(1);  // covers only the [0,4)^2 corner
  save_plan(plan, dir / "plan.json");

  ChunkedArray results =
      ChunkedArray::create(dir / "results", ArrayMetadata{{1, 1, 4, 4}, {1, 1, 4, 4}});
  results.write_region(AxisSizes{0, 0, 0, 0}, AxisSizes{1, 1, 4, 4},
                       std::vector<float>(16, 1.0f));

  const auto error_run = run_cli("stitch \"" + (dir / "results").string() +
                                     "\" --plan \"" + (dir / "plan.json").string() +
                                     "\" --out \"" + (dir / "ws_err").string() + "\"",
                                 dir);
  CHECK(error_run.code == 4);

  const auto fill_run = run_cli("stitch \"" + (dir / "results").string() +
                                    "\" --plan \"" + (dir / "plan.json").string() +
                                    "\" --out \"" + (dir / "ws_fill").string() +
                                    "\" --on-zero-coverage fill:9",
                                dir);
  CHECK(fill_run.code == 0);
  const auto values = read_full_array(ChunkedArray::open(dir / "ws_fill" / "output"));
  CHECK(values[0] == 1.0f);
  CHECK(values.back() == 9.0f);
}

TEST_CASE("roundtrip passes and is byte-deterministic") {
  const auto dir = testutil::scratch_dir("cli_roundtrip");
  const TensorLayout layout{1, 1, {18, 15}};
  const DenseTensor volume = make_volume(layout, 105);
  write_raw_volume(dir / "vol.raw", volume);

  const std::string spec_args = " --window 8,6 --step 5,4 --border 2,1 --border-weight 0 ";
  const auto first = run_cli("roundtrip \"" + (dir / "vol.raw").string() + "\"" +
                                 spec_args + "--out \"" + (dir / "rt1").string() + "\"",
                             dir);
  CHECK(first.code == 0);
  CHECK(first.output.find("PASS") != std::string::npos);

  const auto second = run_cli("roundtrip \"" + (dir / "vol.raw").string() + "\"" +
                                  spec_args + "--out \"" + (dir / "rt2").string() + "\"",
                              dir);
  REQUIRE(second.code == 0);
  CHECK(read_tree(dir / "rt1") == read_tree(dir / "rt2"));
}

TEST_CASE("roundtrip rejects a corrupted spec up front") {
  const auto dir = testutil::scratch_dir("cli_roundtrip_invalid");
  save_volume(dir / "vol", make_volume(TensorLayout{1, 1, {16, 16}}, 106));
  const auto result = run_cli("roundtrip \"" + (dir / "vol").string() +
                                  "\" --window 8,8 --step 9,9 --out \"" +
                                  (dir / "rt").string() + "\"",
                              dir);
  CHECK(result.code == 2);
  CHECK(!fs::exists(dir / "rt" / "results"));
}

TEST_CASE("info describes stores, plans and reports") {
  const auto dir = testutil::scratch_dir("cli_info");
  save_volume(dir / "vol", make_volume(TensorLayout{1, 1, {8, 8}}, 107));
  const auto store_info = run_cli("info \"" + (dir / "vol").string() + "\"", dir);
  CHECK(store_info.code == 0);
  CHECK(store_info.output.find("shape (1,1,8,8)") != std::string::npos);

  const TensorLayout layout{1, 1, {8, 8}};
  const WindowSpec spec{{4, 4}, {2, 2}, {0, 0}, 1.0};
  save_plan(build_plan(layout, spec), dir / "plan.json");
  const auto plan_info = run_cli("info \"" + (dir / "plan.json").string() + "\"", dir);
  CHECK(plan_info.code == 0);
  CHECK(plan_info.output.find("placements: 9") != std::string::npos);

  CurationReport report;
  report.total_patches = 9;
  report.retained_patches = 2;
  report.retained_indices = {0, 5};
  report.annotated_voxels_unique = 10;
  report.annotated_voxels_in_retained = 12;
  report.duplication_rate = 1.2;
  save_report(report, dir / "report.json");
  const auto report_info = run_cli("info \"" + (dir / "report.json").string() + "\"", dir);
  CHECK(report_info.code == 0);
  CHECK(report_info.output.find("2/9") != std::string::npos);

  fs::create_directories(dir / "empty");
  CHECK(run_cli("info \"" + (dir / "empty").string() + "\"", dir).code == 3);
}

TEST_CASE("config files feed the spec and flags override them") {
  const auto dir = testutil::scratch_dir("cli_config");
  ChunkedArray::create(dir / "vol", ArrayMetadata{{1, 1, 32, 32}, {1, 1, 32, 32}});
  {
    std::ofstream cfg(dir / "config.json");
    cfg << nlohmann::json{{"window", {8, 8}}, {"step", {4, 4}}}.dump();
  }

  const auto from_config = run_cli("plan \"" + (dir / "vol").string() + "\" --config \"" +
                                       (dir / "config.json").string() + "\"",
                                   dir);
  CHECK(from_config.code == 0);
  CHECK(from_config.output.find("placements: 49") != std::string::npos);  // 7 x 7

  const auto overridden =
      run_cli("plan \"" + (dir / "vol").string() + "\" --config \"" +
                  (dir / "config.json").string() + "\" --window 16,16",
              dir);
  CHECK(overridden.code == 0);
  CHECK(overridden.output.find("placements: 25") != std::string::npos);  // 5 x 5
}

TEST_CASE("unreadable inputs exit with the I/O code") {
  const auto dir = testutil::scratch_dir("cli_missing_input");
  const auto result = run_cli("plan \"" + (dir / "nope").string() + "\" --window 4,4", dir);
  CHECK(result.code == 3);
}
