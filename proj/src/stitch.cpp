#include "tessellate/stitch.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "tessellate/errors.hpp"
#include "tessellate/subsample.hpp"

namespace fs = std::filesystem;

namespace tessellate {

namespace {

constexpr const char* kManifestFormat = "tessellate-stitch/1";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kMeanDir = "mean";
constexpr const char* kNormDir = "norm";
constexpr const char* kOutputDir = "output";

constexpr const char* kStateAccumulating = "accumulating";
constexpr const char* kStateAccumulated = "accumulated";
constexpr const char* kStateFinalized = "finalized";

AxisSizes array_shape(const TensorLayout& layout, std::int64_t channels) {
  AxisSizes shape{layout.items, channels};
  shape.insert(shape.end(), layout.spatial.begin(), layout.spatial.end());
  return shape;
}

AxisSizes array_chunks(std::int64_t channels, const AxisSizes& chunk_spatial) {
  AxisSizes chunks{1, channels};
  chunks.insert(chunks.end(), chunk_spatial.begin(), chunk_spatial.end());
  return chunks;
}

// Parallel loop over [0, count) with a shared index counter; rethrows the
// first worker exception.
void parallel_for(std::int64_t count, int workers, const std::function<void(std::int64_t)>& body) {
  workers = static_cast<int>(std::min<std::int64_t>(std::max(workers, 1), count));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

void StitchPolicy::validate() const {
  if (output_channels < 1)
    throw InvalidSpecError("policy: output_channels must be >= 1");
  if (zero_coverage == ZeroCoverage::kFill && !std::isfinite(fill_value))
    throw InvalidSpecError("policy: fill value must be finite");
}

nlohmann::json policy_to_json(const StitchPolicy& policy) {
  return {{"zero_coverage",
           policy.zero_coverage == StitchPolicy::ZeroCoverage::kError ? "error" : "fill"},
          {"fill", static_cast<double>(policy.fill_value)},
          {"output_channels", policy.output_channels}};
}

StitchPolicy policy_from_json(const nlohmann::json& doc) {
  StitchPolicy policy;
  const std::string mode = doc.at("zero_coverage").get<std::string>();
  if (mode == "error")
    policy.zero_coverage = StitchPolicy::ZeroCoverage::kError;
  else if (mode == "fill")
    policy.zero_coverage = StitchPolicy::ZeroCoverage::kFill;
  else
    throw FormatError("policy: unknown zero_coverage mode '" + mode + "'");
  policy.fill_value = doc.at("fill").get<float>();
  policy.output_channels = doc.at("output_channels").get<std::int64_t>();
  policy.validate();
  return policy;
}

fs::path Accumulators::manifest_path(const fs::path& location) {
  return location / kManifestFile;
}

fs::path Accumulators::output_path(const fs::path& location) {
  return location / kOutputDir;
}

Accumulators::Accumulators(fs::path location, std::shared_ptr<const PatchPlan> plan,
                           WindowSpec spec, StitchPolicy policy, AxisSizes chunk_spatial,
                           ChunkedArray mean, ChunkedArray norm, std::string state)
    : location_(std::move(location)),
      plan_(std::move(plan)),
      spec_(std::move(spec)),
      policy_(policy),
      chunk_spatial_(std::move(chunk_spatial)),
      mean_(std::move(mean)),
      norm_(std::move(norm)),
      state_(std::move(state)),
      locks_(std::make_unique<std::array<std::mutex, 64>>()) {}

void Accumulators::write_manifest() {
  const nlohmann::json doc = {{"format", kManifestFormat},
                              {"plan", plan_to_json(*plan_)},
                              {"spec", spec_to_json(spec_)},
                              {"policy", policy_to_json(policy_)},
                              {"chunk", chunk_spatial_},
                              {"state", state_}};
  write_text_file_atomic(manifest_path(location_), doc.dump(1) + "\n");
}

Accumulators Accumulators::create(std::shared_ptr<const PatchPlan> plan,
                                  const WindowSpec& stitch_spec, const StitchPolicy& policy,
                                  const AxisSizes& chunk_spatial, const fs::path& location) {
  stitch_spec.validate_against(plan->layout);
  policy.validate();
  if (stitch_spec.window != plan->spec.window || stitch_spec.step != plan->spec.step)
    throw InvalidSpecError(
        "stitch spec must keep the plan's window and step (only border and "
        "border_weight may differ)");
  if (chunk_spatial.size() != plan->layout.spatial_rank())
    throw InvalidSpecError("chunk rank does not match the layout's spatial rank");
  for (auto c : chunk_spatial)
    if (c < 1) throw InvalidSpecError("chunk extents must be >= 1");

  if (fs::exists(manifest_path(location)) ||
      ChunkedArray::exists(location / kMeanDir))
    throw AlreadyExistsError("stitch workspace already exists at: " + location.string());
  try {
    fs::create_directories(location);
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cannot create stitch workspace: ") + e.what());
  }

  ArrayMetadata mean_meta{array_shape(plan->layout, policy.output_channels),
                          array_chunks(policy.output_channels, chunk_spatial)};
  ArrayMetadata norm_meta{array_shape(plan->layout, 1), array_chunks(1, chunk_spatial)};
  ChunkedArray mean = ChunkedArray::create(location / kMeanDir, mean_meta);
  ChunkedArray norm = ChunkedArray::create(location / kNormDir, norm_meta);

  Accumulators acc(location, std::move(plan), stitch_spec, policy, chunk_spatial,
                   std::move(mean), std::move(norm), kStateAccumulating);
  acc.write_manifest();
  return acc;
}

Accumulators Accumulators::open(const fs::path& location) {
  const fs::path manifest = manifest_path(location);
  if (!fs::exists(manifest))
    throw FormatError("no stitch workspace at: " + location.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("stitch manifest is not valid JSON: " + std::string(e.what()));
  }
  if (doc.value("format", "") != kManifestFormat)
    throw FormatError("stitch manifest: unknown format tag");

  auto plan = std::make_shared<const PatchPlan>(plan_from_json(doc.at("plan")));
  WindowSpec spec = spec_from_json(doc.at("spec"));
  StitchPolicy policy = policy_from_json(doc.at("policy"));
  AxisSizes chunk_spatial = doc.at("chunk").get<AxisSizes>();
  std::string state = doc.at("state").get<std::string>();

  ChunkedArray mean = ChunkedArray::open(location / kMeanDir);
  ChunkedArray norm = ChunkedArray::open(location / kNormDir);
  if (mean.metadata().shape != array_shape(plan->layout, policy.output_channels) ||
      norm.metadata().shape != array_shape(plan->layout, 1))
    throw FormatError("stitch workspace arrays do not match the manifest");

  return Accumulators(location, std::move(plan), std::move(spec), policy,
                      std::move(chunk_spatial), std::move(mean), std::move(norm),
                      std::move(state));
}

std::mutex& Accumulators::chunk_lock(int array_tag,
                                     std::span<const std::int64_t> chunk_indices,
                                     const ArrayMetadata& meta) {
  const AxisSizes grid = meta.chunk_grid();
  const std::int64_t linear = linear_index(chunk_indices, row_major_strides(grid));
  const std::size_t slot =
      std::hash<std::int64_t>{}(linear * 2 + array_tag) % locks_->size();
  return (*locks_)[slot];
}

void Accumulators::add_into(ChunkedArray& array, int array_tag,
                            std::span<const std::int64_t> start,
                            std::span<const std::int64_t> shape,
                            std::span<const float> values) {
  for (const ChunkOverlap& o : chunks_overlapping(array.metadata(), start, shape)) {
    std::lock_guard<std::mutex> lock(chunk_lock(array_tag, o.chunk_indices, array.metadata()));
    std::vector<float> chunk = array.read_chunk(o.chunk_indices);
    add_block(chunk.data(), array.metadata().chunk_shape, o.chunk_offset, values.data(),
              shape, o.region_offset, o.extents);
    array.write_chunk(o.chunk_indices, chunk);
  }
}

void Accumulators::accumulate(std::int64_t patch_index,
                              std::span<const float> patch_result) {
  if (patch_index < 0 || patch_index >= plan_->size())
    throw OutOfRangeError("patch index " + std::to_string(patch_index) +
                          " outside plan of " + std::to_string(plan_->size()));
  const AxisSizes& window = spec_.window;
  const std::int64_t voxels = element_count(window);
  const std::int64_t c_out = policy_.output_channels;
  if (patch_result.size() != static_cast<std::size_t>(c_out * voxels))
    throw ShapeError("patch result size does not match output_channels x window");

  const Placement& p = plan_->placements[static_cast<std::size_t>(patch_index)];
  const std::size_t rank = window.size();
  std::vector<std::vector<float>> axis(rank);
  for (std::size_t a = 0; a < rank; ++a)
    axis[a] = axis_weights(window[a], spec_.border[a], spec_.border_weight,
                           p.touches_low[a], p.touches_high[a]);

  // Weight block (window) and weighted patch (C_out x window) in one pass.
  std::vector<float> weights(static_cast<std::size_t>(voxels));
  std::vector<float> weighted(static_cast<std::size_t>(c_out * voxels));
  AxisSizes coords(rank, 0);
  std::int64_t v = 0;
  do {
    float w = 1.0f;
    for (std::size_t a = 0; a < rank; ++a)
      w = std::min(w, axis[a][static_cast<std::size_t>(coords[a])]);
    weights[static_cast<std::size_t>(v)] = w;
    for (std::int64_t c = 0; c < c_out; ++c)
      weighted[static_cast<std::size_t>(c * voxels + v)] =
          w * patch_result[static_cast<std::size_t>(c * voxels + v)];
    ++v;
  } while (nd_increment(coords, window));

  AxisSizes start{p.item, 0};
  start.insert(start.end(), p.start.begin(), p.start.end());

  AxisSizes mean_shape{1, c_out};
  mean_shape.insert(mean_shape.end(), window.begin(), window.end());
  add_into(mean_, 0, start, mean_shape, weighted);

  AxisSizes norm_shape{1, 1};
  norm_shape.insert(norm_shape.end(), window.begin(), window.end());
  add_into(norm_, 1, start, norm_shape, weights);
}

void Accumulators::mark_accumulated() {
  state_ = kStateAccumulated;
  write_manifest();
}

ChunkedArray Accumulators::finalize(const StitchPolicy& policy, int workers,
                                    FinalizeStats* stats) {
  policy.validate();
  if (policy.output_channels != policy_.output_channels)
    throw ShapeError("finalize policy output_channels does not match the accumulators");

  const fs::path out_root = output_path(location_);
  if (state_ == kStateFinalized && ChunkedArray::exists(out_root))
    throw AlreadyExistsError("stitch output already exists at: " + out_root.string());
  if (fs::exists(out_root)) fs::remove_all(out_root);  // stale partial output

  const ArrayMetadata& norm_meta = norm_.metadata();
  const AxisSizes norm_grid = norm_meta.chunk_grid();
  const std::int64_t chunk_count = element_count(norm_grid);
  const std::size_t rank = norm_meta.rank();

  // Pass 1: coverage scan over the weight sums (in-bounds voxels only).
  std::mutex stats_mutex;
  FinalizeStats collected;
  collected.total_voxels = plan_->layout.items * plan_->layout.voxels_per_item();
  collected.min_weight_sum = std::numeric_limits<float>::max();

  parallel_for(chunk_count, workers, [&](std::int64_t linear) {
    AxisSizes grid_strides = row_major_strides(norm_grid);
    AxisSizes chunk_idx(rank);
    std::int64_t rem = linear;
    for (std::size_t a = 0; a < rank; ++a) {
      chunk_idx[a] = rem / grid_strides[a];
      rem %= grid_strides[a];
    }
    AxisSizes valid(rank);
    for (std::size_t a = 0; a < rank; ++a)
      valid[a] = std::min(norm_meta.chunk_shape[a],
                          norm_meta.shape[a] - chunk_idx[a] * norm_meta.chunk_shape[a]);

    const std::vector<float> norm = norm_.read_chunk(chunk_idx);
    const AxisSizes strides = row_major_strides(norm_meta.chunk_shape);
    std::int64_t zero = 0, covered = 0;
    float lo = std::numeric_limits<float>::max(), hi = 0.0f;
    AxisSizes c(rank, 0);
    do {
      const float w = norm[static_cast<std::size_t>(linear_index(c, strides))];
      if (w > 0.0f) {
        ++covered;
        lo = std::min(lo, w);
        hi = std::max(hi, w);
      } else {
        ++zero;
      }
    } while (nd_increment(c, valid));

    std::lock_guard<std::mutex> lock(stats_mutex);
    collected.covered_voxels += covered;
    collected.zero_coverage_voxels += zero;
    collected.min_weight_sum = std::min(collected.min_weight_sum, lo);
    collected.max_weight_sum = std::max(collected.max_weight_sum, hi);
  });
  if (collected.covered_voxels == 0) collected.min_weight_sum = 0.0f;
  if (stats) *stats = collected;

  if (collected.zero_coverage_voxels > 0 &&
      policy.zero_coverage == StitchPolicy::ZeroCoverage::kError)
    throw CoverageError(std::to_string(collected.zero_coverage_voxels) +
                        " of " + std::to_string(collected.total_voxels) +
                        " output voxels have zero accumulated weight");

  // Pass 2: per-chunk division, independent across chunks.
  ChunkedArray output = ChunkedArray::create(out_root, mean_.metadata());
  const std::int64_t chunk_voxels = element_count(chunk_spatial_);
  const std::int64_t c_out = policy.output_channels;

  parallel_for(chunk_count, workers, [&](std::int64_t linear) {
    AxisSizes grid_strides = row_major_strides(norm_grid);
    AxisSizes chunk_idx(rank);
    std::int64_t rem = linear;
    for (std::size_t a = 0; a < rank; ++a) {
      chunk_idx[a] = rem / grid_strides[a];
      rem %= grid_strides[a];
    }
    const std::vector<float> norm = norm_.read_chunk(chunk_idx);
    const std::vector<float> mean = mean_.read_chunk(chunk_idx);

    AxisSizes valid(rank);
    for (std::size_t a = 0; a < rank; ++a)
      valid[a] = std::min(norm_meta.chunk_shape[a],
                          norm_meta.shape[a] - chunk_idx[a] * norm_meta.chunk_shape[a]);
    AxisSizes valid_spatial(valid.begin() + 2, valid.end());

    std::vector<float> out(mean.size(), 0.0f);
    const AxisSizes spatial_strides = row_major_strides(
        AxisSizes(norm_meta.chunk_shape.begin() + 2, norm_meta.chunk_shape.end()));
    AxisSizes sc(rank - 2, 0);
    do {
      const std::int64_t v = linear_index(sc, spatial_strides);
      const float w = norm[static_cast<std::size_t>(v)];
      for (std::int64_t c = 0; c < c_out; ++c) {
        const std::size_t i = static_cast<std::size_t>(c * chunk_voxels + v);
        out[i] = (w > 0.0f) ? mean[i] / w : policy.fill_value;
      }
    } while (nd_increment(sc, valid_spatial));

    output.write_chunk(chunk_idx, out);
  });

  state_ = kStateFinalized;
  write_manifest();
  return output;
}

Accumulators create_accumulators(const TensorLayout& layout, std::int64_t output_channels,
                                 const PatchPlan& plan, const AxisSizes& chunk_spatial,
                                 const fs::path& location) {
  if (!(layout == plan.layout))
    throw ShapeError("layout does not match the plan's layout");
  StitchPolicy policy;
  policy.output_channels = output_channels;
  return Accumulators::create(std::make_shared<const PatchPlan>(plan), plan.spec, policy,
                              chunk_spatial, location);
}

void accumulate(Accumulators& acc, std::int64_t patch_index,
                std::span<const float> patch_result) {
  acc.accumulate(patch_index, patch_result);
}

ChunkedArray finalize(Accumulators& acc, const StitchPolicy& policy, int workers,
                      FinalizeStats* stats) {
  return acc.finalize(policy, workers, stats);
}

ChunkedArray stitch_stream(const PatchPlan& plan, const WindowSpec& spec,
                           PatchResultProducer producer, const StitchPolicy& policy,
                           const fs::path& location, const AxisSizes& chunk_spatial,
                           int workers, FinalizeStats* stats) {
  const AxisSizes chunks = chunk_spatial.empty() ? spec.window : chunk_spatial;
  Accumulators acc = Accumulators::create(std::make_shared<const PatchPlan>(plan), spec,
                                          policy, chunks, location);

  std::vector<float> patch;
  const std::int64_t expected =
      policy.output_channels * element_count(spec.window);
  for (std::int64_t i = 0; i < plan.size(); ++i) {
    patch.resize(static_cast<std::size_t>(expected));
    if (!producer(patch))
      throw IncompleteInputError("patch results ended at " + std::to_string(i) +
                                 " of " + std::to_string(plan.size()));
    if (patch.size() != static_cast<std::size_t>(expected))
      throw ShapeError("producer returned a patch of unexpected size");
    acc.accumulate(i, patch);
  }
  acc.mark_accumulated();
  return acc.finalize(policy, workers, stats);
}

}  // namespace tessellate
