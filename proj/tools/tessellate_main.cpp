#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tessellate/curate.hpp"
#include "tessellate/errors.hpp"
#include "tessellate/geometry.hpp"
#include "tessellate/stitch.hpp"
#include "tessellate/store.hpp"
#include "tessellate/subsample.hpp"
#include "tessellate/volume_io.hpp"

namespace fs = std::filesystem;
using namespace tessellate;

namespace {

// Exit codes: 0 success, 2 validation, 3 I/O or malformed artifact,
// 4 zero-coverage, 5 incomplete input, 1 anything unexpected.
enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kValidation = 2,
  kIo = 3,
  kCoverage = 4,
  kIncomplete = 5,
};

AxisSizes parse_axes(const std::string& text) {
  AxisSizes axes;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      axes.push_back(std::stoll(part));
    } catch (const std::exception&) {
      throw InvalidSpecError("cannot parse axis list '" + text + "'");
    }
  }
  if (axes.empty()) throw InvalidSpecError("empty axis list");
  return axes;
}

std::string format_axes(std::span<const std::int64_t> axes) {
  std::string out;
  for (std::size_t i = 0; i < axes.size(); ++i)
    out += (i ? "," : "") + std::to_string(axes[i]);
  return out;
}

// Values resolved from flags (which win) over an optional JSON config file.
struct Settings {
  nlohmann::json config = nlohmann::json::object();

  void load(const std::string& path) {
    if (path.empty()) return;
    try {
      config = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("config file is not valid JSON: " + path + ": " + e.what());
    }
    if (!config.is_object()) throw FormatError("config file must hold a JSON object");
  }

  std::optional<AxisSizes> axes(const CLI::Option* opt, const std::string& flag,
                                const char* key) const {
    if (opt->count() > 0) return parse_axes(flag);
    if (config.contains(key)) {
      if (config.at(key).is_string()) return parse_axes(config.at(key).get<std::string>());
      return config.at(key).get<AxisSizes>();
    }
    return std::nullopt;
  }

  std::optional<double> number(const CLI::Option* opt, double flag, const char* key) const {
    if (opt->count() > 0) return flag;
    if (config.contains(key)) return config.at(key).get<double>();
    return std::nullopt;
  }

  std::optional<std::string> text(const CLI::Option* opt, const std::string& flag,
                                  const char* key) const {
    if (opt->count() > 0) return flag;
    if (config.contains(key)) return config.at(key).get<std::string>();
    return std::nullopt;
  }
};

StitchPolicy parse_policy(const std::string& text, std::int64_t output_channels) {
  StitchPolicy policy;
  policy.output_channels = output_channels;
  if (text == "error") {
    policy.zero_coverage = StitchPolicy::ZeroCoverage::kError;
  } else if (text.rfind("fill:", 0) == 0) {
    policy.zero_coverage = StitchPolicy::ZeroCoverage::kFill;
    try {
      policy.fill_value = std::stof(text.substr(5));
    } catch (const std::exception&) {
      throw InvalidSpecError("cannot parse fill value in '" + text + "'");
    }
  } else {
    throw InvalidSpecError("--on-zero-coverage must be 'error' or 'fill:V', got '" +
                           text + "'");
  }
  policy.validate();
  return policy;
}

ArrayMetadata stack_metadata(std::int64_t count, std::int64_t channels,
                             const AxisSizes& window) {
  ArrayMetadata meta;
  meta.shape = {count, channels};
  meta.shape.insert(meta.shape.end(), window.begin(), window.end());
  meta.chunk_shape = {1, channels};
  meta.chunk_shape.insert(meta.chunk_shape.end(), window.begin(), window.end());
  return meta;
}

ChunkedArray write_stack(const fs::path& root, const PatchStack& stack,
                         const nlohmann::json& plan_doc) {
  ChunkedArray array =
      ChunkedArray::create(root, stack_metadata(stack.count(), stack.channels, stack.window));
  AxisSizes start(array.metadata().rank(), 0);
  AxisSizes shape = {1, stack.channels};
  shape.insert(shape.end(), stack.window.begin(), stack.window.end());
  for (std::int64_t i = 0; i < stack.count(); ++i) {
    start[0] = i;
    array.write_region(start, shape, stack.patch(i));
  }
  nlohmann::json attrs = {{"tessellate_plan", plan_doc}};
  if (!stack.source_indices.empty()) attrs["source_placements"] = stack.source_indices;
  array.write_attributes(attrs);
  return array;
}

WindowSpec resolve_spec(const TensorLayout& layout, const std::optional<AxisSizes>& window,
                        const std::optional<AxisSizes>& step,
                        const std::optional<AxisSizes>& border,
                        const std::optional<double>& border_weight) {
  if (!window) throw InvalidSpecError("a window size is required (--window Z,Y,X)");
  WindowSpec spec;
  spec.window = *window;
  spec.step = step.value_or(spec.window);
  spec.border = border.value_or(AxisSizes(spec.window.size(), 0));
  spec.border_weight = border_weight.value_or(1.0);
  spec.validate_against(layout);
  return spec;
}

void print_plan_summary(const PatchPlan& plan) {
  std::cout << "placements: " << plan.size() << " over " << plan.layout.items
            << " item(s), window (" << format_axes(plan.spec.window) << "), step ("
            << format_axes(plan.spec.step) << ")\n";
  double window_sum = 0;
  for (std::size_t a = 0; a < plan.spec.window.size(); ++a) {
    const auto positions =
        axis_positions(plan.layout.spatial[a], plan.spec.window[a], plan.spec.step[a]);
    std::cout << "axis " << a << ": " << positions.size() << " positions (extent "
              << plan.layout.spatial[a] << ", window " << plan.spec.window[a] << ", step "
              << plan.spec.step[a] << ")\n";
  }
  window_sum = static_cast<double>(plan.size()) *
               static_cast<double>(plan.spec.window_voxels());
  const double total = static_cast<double>(plan.layout.items) *
                       static_cast<double>(plan.layout.voxels_per_item());
  std::cout << "geometric duplication: " << window_sum / total
            << "x (every voxel, ignoring annotations)\n";
}

// --- commands ---------------------------------------------------------------

int cmd_plan(const std::string& input, const std::string& out, const WindowSpec& spec,
             const TensorLayout& layout) {
  PatchPlan plan = build_plan(layout, spec);
  print_plan_summary(plan);
  if (!out.empty()) {
    save_plan(plan, out);
    std::cout << "plan written to " << out << "\n";
  }
  (void)input;
  return kOk;
}

int cmd_subsample(const std::string& input, const std::string& labels_path,
                  const std::string& plan_path, const std::string& out,
                  const std::optional<AxisSizes>& border_override, float sentinel) {
  if (out.empty()) throw InvalidSpecError("an output directory is required (--out DIR)");
  PatchPlan plan = load_plan(plan_path);
  const TensorLayout in_layout = peek_volume_layout(input);
  if (!(in_layout == plan.layout))
    throw ShapeError("input volume layout does not match the plan");

  LabelConvention convention{sentinel};
  convention.validate();
  const AxisSizes border = border_override.value_or(plan.spec.border);

  fs::create_directories(out);
  const nlohmann::json plan_doc = plan_to_json(plan);
  DenseTensor tensor = load_volume(input);
  auto plan_ptr = std::make_shared<const PatchPlan>(std::move(plan));

  if (labels_path.empty()) {
    // No curation: stream all patches straight into the store.
    PatchStream stream(tensor, plan_ptr);
    ChunkedArray array = ChunkedArray::create(
        fs::path(out) / "data",
        stack_metadata(plan_ptr->size(), tensor.layout.channels, plan_ptr->spec.window));
    std::vector<float> patch(static_cast<std::size_t>(stream.patch_elements()));
    AxisSizes start(array.metadata().rank(), 0);
    AxisSizes shape = array.metadata().chunk_shape;
    std::int64_t i = 0;
    while (stream.next(patch)) {
      start[0] = i++;
      array.write_region(start, shape, patch);
    }
    array.write_attributes({{"tessellate_plan", plan_doc}});
    std::cout << "wrote " << i << " patches to " << (fs::path(out) / "data").string()
              << "\n";
    return kOk;
  }

  DenseTensor labels = load_volume(labels_path);
  auto [data_stack, label_stack] = extract_pair(tensor, labels, plan_ptr);
  PatchStack masked = mask_border(label_stack, border, convention);
  FilterResult filtered = filter_unlabeled(data_stack, masked, convention);

  save_report(filtered.report, fs::path(out) / "report.json");
  std::cout << "patches: " << filtered.report.total_patches << " total, "
            << filtered.report.retained_patches << " retained\n"
            << "annotated voxels: " << filtered.report.annotated_voxels_unique
            << " unique, " << filtered.report.annotated_voxels_in_retained
            << " across retained patches (duplication "
            << filtered.report.duplication_rate << ")\n";

  if (filtered.report.retained_patches == 0) {
    std::cout << "no annotated patches; stores not written\n";
    return kOk;
  }
  write_stack(fs::path(out) / "data", filtered.data, plan_doc);
  write_stack(fs::path(out) / "labels", filtered.labels, plan_doc);
  std::cout << "wrote retained pairs to " << (fs::path(out) / "data").string() << " and "
            << (fs::path(out) / "labels").string() << "\n";
  return kOk;
}

int cmd_stitch(const std::string& results_path, const std::string& plan_path,
               const std::string& out, const std::optional<AxisSizes>& border_override,
               const std::optional<double>& bw_override,
               const std::optional<AxisSizes>& chunk, const std::string& policy_text,
               int workers) {
  if (out.empty()) throw InvalidSpecError("an output directory is required (--out DIR)");
  PatchPlan plan = load_plan(plan_path);
  ChunkedArray results = ChunkedArray::open(results_path);

  const AxisSizes& rshape = results.metadata().shape;
  const std::size_t rank = plan.spec.rank();
  if (rshape.size() != rank + 2)
    throw ShapeError("results array rank does not match the plan's window rank");
  if (!std::equal(rshape.begin() + 2, rshape.end(), plan.spec.window.begin()))
    throw ShapeError("results patch shape does not match the plan's window");
  if (rshape[0] < plan.size())
    throw IncompleteInputError("results store holds " + std::to_string(rshape[0]) +
                               " patches but the plan needs " +
                               std::to_string(plan.size()));
  if (rshape[0] > plan.size())
    throw ShapeError("results store holds more patches than the plan defines");
  const std::int64_t c_out = rshape[1];

  WindowSpec spec = plan.spec;
  if (border_override) spec.border = *border_override;
  if (bw_override) spec.border_weight = *bw_override;
  spec.validate_against(plan.layout);

  StitchPolicy policy = parse_policy(policy_text, c_out);

  // One chunk per patch lets missing results be detected up front.
  const bool patch_aligned =
      results.metadata().chunk_shape == stack_metadata(rshape[0], c_out, spec.window).chunk_shape;

  AxisSizes read_shape = {1, c_out};
  read_shape.insert(read_shape.end(), spec.window.begin(), spec.window.end());
  std::int64_t index = 0;
  auto producer = [&](std::vector<float>& patch) {
    if (index >= plan.size()) return false;
    if (patch_aligned) {
      AxisSizes chunk_idx(rank + 2, 0);
      chunk_idx[0] = index;
      if (!results.chunk_exists(chunk_idx))
        throw IncompleteInputError("results store is missing patch " +
                                   std::to_string(index));
    }
    AxisSizes start(rank + 2, 0);
    start[0] = index;
    results.read_region(start, read_shape, patch);
    ++index;
    return true;
  };

  FinalizeStats stats;
  ChunkedArray output = stitch_stream(plan, spec, producer, policy, out,
                                      chunk.value_or(AxisSizes{}), workers, &stats);
  std::cout << "output: " << output.root().string() << " shape ("
            << format_axes(output.metadata().shape) << ")\n"
            << "coverage: " << stats.covered_voxels << "/" << stats.total_voxels
            << " voxels, weight sums in [" << stats.min_weight_sum << ", "
            << stats.max_weight_sum << "]";
  if (stats.zero_coverage_voxels > 0)
    std::cout << ", " << stats.zero_coverage_voxels << " filled";
  std::cout << "\n";
  return kOk;
}

int cmd_roundtrip(const std::string& input, const std::string& out, const WindowSpec& spec,
                  const std::optional<AxisSizes>& chunk, int workers) {
  if (out.empty()) throw InvalidSpecError("a work directory is required (--out DIR)");
  DenseTensor tensor = load_volume(input);
  PatchPlan plan = build_plan(tensor.layout, spec);
  fs::create_directories(out);
  save_plan(plan, fs::path(out) / "plan.json");

  auto plan_ptr = std::make_shared<const PatchPlan>(plan);

  // Identity model: the extracted patches are the "inference results".
  ChunkedArray results = ChunkedArray::create(
      fs::path(out) / "results",
      stack_metadata(plan.size(), tensor.layout.channels, spec.window));
  {
    PatchStream stream(tensor, plan_ptr);
    std::vector<float> patch(static_cast<std::size_t>(stream.patch_elements()));
    AxisSizes start(results.metadata().rank(), 0);
    const AxisSizes shape = results.metadata().chunk_shape;
    std::int64_t i = 0;
    while (stream.next(patch)) {
      start[0] = i++;
      results.write_region(start, shape, patch);
    }
  }

  StitchPolicy policy;
  policy.output_channels = tensor.layout.channels;
  AxisSizes read_shape = results.metadata().chunk_shape;
  std::int64_t index = 0;
  auto producer = [&](std::vector<float>& patch) {
    if (index >= plan.size()) return false;
    AxisSizes start(results.metadata().rank(), 0);
    start[0] = index;
    results.read_region(start, read_shape, patch);
    ++index;
    return true;
  };

  FinalizeStats stats;
  ChunkedArray output = stitch_stream(plan, spec, producer, policy,
                                      fs::path(out) / "stitch",
                                      chunk.value_or(AxisSizes{}), workers, &stats);

  const std::vector<float> stitched = read_full_array(output);
  double max_err = 0;
  for (std::size_t i = 0; i < stitched.size(); ++i)
    max_err = std::max(max_err,
                       static_cast<double>(std::abs(stitched[i] - tensor.values[i])));
  const bool pass = max_err <= 1e-5;
  std::cout << "round trip max abs error: " << max_err << " over " << stitched.size()
            << " values -> " << (pass ? "PASS" : "FAIL") << " (tolerance 1e-5)\n";
  return pass ? kOk : kUnexpected;
}

int cmd_info(const std::string& path) {
  const fs::path p(path);
  if (ChunkedArray::exists(p)) {
    ChunkedArray array = ChunkedArray::open(p);
    const AxisSizes grid = array.metadata().chunk_grid();
    std::int64_t present = 0;
    AxisSizes idx(grid.size(), 0);
    do {
      if (array.chunk_exists(idx)) ++present;
    } while (nd_increment(idx, grid));
    std::cout << "chunked array: shape (" << format_axes(array.metadata().shape)
              << "), chunks (" << format_axes(array.metadata().chunk_shape)
              << "), dtype <f4, fill " << array.metadata().fill_value << "\n"
              << "chunk files: " << present << "/" << element_count(grid) << " present\n";
    if (auto attrs = array.read_attributes())
      std::cout << "attributes: " << attrs->dump() << "\n";
    return kOk;
  }
  if (fs::exists(Accumulators::manifest_path(p))) {
    Accumulators acc = Accumulators::open(p);
    std::cout << "stitch workspace: state " << acc.state() << ", "
              << acc.plan().size() << " placements, output channels "
              << acc.policy().output_channels << "\n";
    return kOk;
  }
  if (fs::is_regular_file(p)) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_text_file(p));
    } catch (const nlohmann::json::exception&) {
      throw FormatError("unrecognized artifact: " + path);
    }
    const std::string format = doc.is_object() ? doc.value("format", "") : "";
    if (format == "tessellate-plan/1") {
      PatchPlan plan = plan_from_json(doc);
      std::cout << "plan: ";
      print_plan_summary(plan);
      return kOk;
    }
    if (format == "tessellate-report/1") {
      CurationReport report = report_from_json(doc);
      std::cout << "curation report: " << report.retained_patches << "/"
                << report.total_patches << " patches retained, "
                << report.annotated_voxels_unique << " unique annotated voxels, "
                << "duplication " << report.duplication_rate << "\n";
      return kOk;
    }
    throw FormatError("unrecognized artifact: " + path);
  }
  throw FormatError("unrecognized artifact: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"windowed tiling, sparse-label curation and seam-free stitching for "
               "large multi-channel volumes"};
  app.require_subcommand(1);

  std::string config_path;
  std::string input, labels_path, plan_path, out, results_path, info_path;
  std::string window_s, step_s, border_s, chunk_s;
  double border_weight = 1.0;
  double sentinel = -1.0;
  std::string policy_s = "error";
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  auto add_spec_flags = [&](CLI::App* cmd) {
    struct Opts {
      CLI::Option *window, *step, *border, *bw;
    } o{};
    o.window = cmd->add_option("--window", window_s, "window size per axis, e.g. 64,64,64");
    o.step = cmd->add_option("--step", step_s, "step size per axis (default: window)");
    o.border = cmd->add_option("--border", border_s, "border width per axis (default: 0)");
    o.bw = cmd->add_option("--border-weight", border_weight,
                           "weight of unadjusted border voxels, in [0,1] (default 1)");
    return o;
  };

  auto* plan_cmd = app.add_subcommand("plan", "compute window placements for a volume");
  plan_cmd->add_option("input", input, "input volume (chunked array dir or raw+sidecar)")
      ->required();
  plan_cmd->add_option("--out", out, "plan file to write");
  plan_cmd->add_option("--config", config_path, "JSON config file (flags win)");
  auto plan_opts = add_spec_flags(plan_cmd);

  auto* sub_cmd = app.add_subcommand("subsample", "extract (and optionally curate) patches");
  sub_cmd->add_option("input", input, "input volume")->required();
  sub_cmd->add_option("--labels", labels_path, "label volume paired with the input");
  sub_cmd->add_option("--plan", plan_path, "plan file produced by 'plan'")->required();
  sub_cmd->add_option("--out", out, "output directory");
  sub_cmd->add_option("--config", config_path, "JSON config file (flags win)");
  auto* sub_border = sub_cmd->add_option("--border", border_s,
                                         "border to mask in label patches "
                                         "(default: the plan's border)");
  auto* sub_sentinel =
      sub_cmd->add_option("--sentinel", sentinel, "unlabeled sentinel value (default -1)");

  auto* stitch_cmd = app.add_subcommand("stitch", "stitch patch results into a volume");
  stitch_cmd->add_option("results", results_path, "patch-result store (M,C,window...)")
      ->required();
  stitch_cmd->add_option("--plan", plan_path, "plan file the results follow")->required();
  stitch_cmd->add_option("--out", out, "stitch workspace directory");
  stitch_cmd->add_option("--config", config_path, "JSON config file (flags win)");
  auto* st_border = stitch_cmd->add_option("--border", border_s,
                                           "override the plan's border for weighting");
  auto* st_bw = stitch_cmd->add_option("--border-weight", border_weight,
                                       "override the plan's border weight");
  auto* st_chunk = stitch_cmd->add_option("--chunk", chunk_s,
                                          "accumulator chunk shape per spatial axis "
                                          "(default: window)");
  auto* st_policy = stitch_cmd->add_option("--on-zero-coverage", policy_s,
                                           "'error' or 'fill:V' (default error)");
  auto* st_workers =
      stitch_cmd->add_option("--workers", workers, "finalize worker threads");

  auto* rt_cmd = app.add_subcommand("roundtrip",
                                    "subsample + identity results + stitch self-test");
  rt_cmd->add_option("input", input, "input volume")->required();
  rt_cmd->add_option("--out", out, "work directory");
  rt_cmd->add_option("--config", config_path, "JSON config file (flags win)");
  auto rt_opts = add_spec_flags(rt_cmd);
  auto* rt_chunk = rt_cmd->add_option("--chunk", chunk_s, "accumulator chunk shape");
  auto* rt_workers = rt_cmd->add_option("--workers", workers, "finalize worker threads");

  auto* info_cmd = app.add_subcommand("info", "describe a store, plan, report or workspace");
  info_cmd->add_option("path", info_path, "artifact path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    Settings settings;
    settings.load(config_path);

    if (app.got_subcommand(plan_cmd)) {
      const auto window = settings.axes(plan_opts.window, window_s, "window");
      const auto step = settings.axes(plan_opts.step, step_s, "step");
      const auto border = settings.axes(plan_opts.border, border_s, "border");
      const auto bw = settings.number(plan_opts.bw, border_weight, "border_weight");
      const auto out_path = settings.text(plan_cmd->get_option("--out"), out, "out");
      const TensorLayout layout = peek_volume_layout(input);
      return cmd_plan(input, out_path.value_or(""),
                      resolve_spec(layout, window, step, border, bw), layout);
    }
    if (app.got_subcommand(sub_cmd)) {
      const auto border = settings.axes(sub_border, border_s, "border");
      const auto sent = settings.number(sub_sentinel, sentinel, "sentinel");
      const auto out_path = settings.text(sub_cmd->get_option("--out"), out, "out");
      const auto labels =
          settings.text(sub_cmd->get_option("--labels"), labels_path, "labels");
      return cmd_subsample(input, labels.value_or(""), plan_path, out_path.value_or(""),
                           border, static_cast<float>(sent.value_or(-1.0)));
    }
    if (app.got_subcommand(stitch_cmd)) {
      const auto border = settings.axes(st_border, border_s, "border");
      const auto bw = settings.number(st_bw, border_weight, "border_weight");
      const auto chunk = settings.axes(st_chunk, chunk_s, "chunk");
      const auto policy =
          settings.text(st_policy, policy_s, "on_zero_coverage").value_or("error");
      const auto nworkers = settings.number(st_workers, workers, "workers");
      const auto out_path = settings.text(stitch_cmd->get_option("--out"), out, "out");
      return cmd_stitch(results_path, plan_path, out_path.value_or(""), border, bw, chunk,
                        policy, static_cast<int>(nworkers.value_or(workers)));
    }
    if (app.got_subcommand(rt_cmd)) {
      const auto window = settings.axes(rt_opts.window, window_s, "window");
      const auto step = settings.axes(rt_opts.step, step_s, "step");
      const auto border = settings.axes(rt_opts.border, border_s, "border");
      const auto bw = settings.number(rt_opts.bw, border_weight, "border_weight");
      const auto chunk = settings.axes(rt_chunk, chunk_s, "chunk");
      const auto nworkers = settings.number(rt_workers, workers, "workers");
      const auto out_path = settings.text(rt_cmd->get_option("--out"), out, "out");
      const TensorLayout layout = peek_volume_layout(input);
      return cmd_roundtrip(input, out_path.value_or(""),
                           resolve_spec(layout, window, step, border, bw), chunk,
                           static_cast<int>(nworkers.value_or(workers)));
    }
    if (app.got_subcommand(info_cmd)) return cmd_info(info_path);
    return kUnexpected;
  } catch (const InvalidSpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const OutOfRangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const UndefinedStatisticError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const CoverageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCoverage;
  } catch (const IncompleteInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIncomplete;
  } catch (const AlreadyExistsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kUnexpected;
  }
}
