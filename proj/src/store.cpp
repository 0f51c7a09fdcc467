#include "tessellate/store.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>

#include "tessellate/errors.hpp"

namespace fs = std::filesystem;

namespace tessellate {

namespace {

constexpr const char* kMetadataFile = ".zarray";
constexpr const char* kAttributesFile = ".zattrs";

void byteswap_floats(std::span<float> values) {
  for (auto& v : values) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    bits = ((bits & 0x000000FFu) << 24) | ((bits & 0x0000FF00u) << 8) |
           ((bits & 0x00FF0000u) >> 8) | ((bits & 0xFF000000u) >> 24);
    v = std::bit_cast<float>(bits);
  }
}

// Atomic replace: write to a unique sibling temp file, then rename over the
// target so readers never observe a torn file.
void write_file_atomic(const fs::path& target, const char* data, std::size_t size) {
  static std::atomic<std::uint64_t> counter{0};
  const fs::path tmp =
      target.parent_path() /
      (target.filename().string() + ".tmp." + std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + tmp.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("short write: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into place: " + target.string());
  }
}

nlohmann::json metadata_to_zarray(const ArrayMetadata& meta) {
  return {{"zarr_format", 2},
          {"shape", meta.shape},
          {"chunks", meta.chunk_shape},
          {"dtype", "<f4"},
          {"order", "C"},
          {"fill_value", static_cast<double>(meta.fill_value)},
          {"compressor", nullptr},
          {"filters", nullptr}};
}

ArrayMetadata metadata_from_zarray(const nlohmann::json& doc, const fs::path& root) {
  const std::string where = root.string();
  if (!doc.is_object()) throw FormatError(where + ": .zarray is not a JSON object");
  if (doc.value("zarr_format", 0) != 2)
    throw FormatError(where + ": unsupported zarr_format (want 2)");
  const std::string dtype = doc.value("dtype", "");
  if (dtype != "<f4")
    throw FormatError(where + ": unsupported dtype '" + dtype + "' (want <f4)");
  if (doc.value("order", "") != "C")
    throw FormatError(where + ": unsupported order (want C)");
  if (doc.contains("compressor") && !doc.at("compressor").is_null())
    throw FormatError(where + ": compressed arrays are not supported");
  if (doc.contains("filters") && !doc.at("filters").is_null())
    throw FormatError(where + ": filtered arrays are not supported");
  if (doc.contains("dimension_separator") &&
      doc.at("dimension_separator").get<std::string>() != ".")
    throw FormatError(where + ": unsupported dimension_separator (want '.')");

  ArrayMetadata meta;
  for (const auto& e : doc.at("shape")) meta.shape.push_back(e.get<std::int64_t>());
  for (const auto& e : doc.at("chunks")) meta.chunk_shape.push_back(e.get<std::int64_t>());
  if (doc.contains("fill_value") && !doc.at("fill_value").is_null())
    meta.fill_value = doc.at("fill_value").get<float>();
  meta.validate();
  return meta;
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

void write_text_file_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, text.data(), text.size());
}

AxisSizes ArrayMetadata::chunk_grid() const {
  AxisSizes grid(shape.size());
  for (std::size_t a = 0; a < shape.size(); ++a)
    grid[a] = (shape[a] + chunk_shape[a] - 1) / chunk_shape[a];
  return grid;
}

void ArrayMetadata::validate() const {
  if (shape.empty()) throw InvalidSpecError("array: rank must be >= 1");
  if (chunk_shape.size() != shape.size())
    throw InvalidSpecError("array: chunk rank does not match shape rank");
  for (auto e : shape)
    if (e < 1) throw InvalidSpecError("array: extents must be >= 1");
  for (auto c : chunk_shape)
    if (c < 1) throw InvalidSpecError("array: chunk extents must be >= 1");
}

std::vector<ChunkOverlap> chunks_overlapping(const ArrayMetadata& meta,
                                             std::span<const std::int64_t> start,
                                             std::span<const std::int64_t> shape) {
  const std::size_t rank = meta.rank();
  AxisSizes first(rank), last(rank), counts(rank);
  for (std::size_t a = 0; a < rank; ++a) {
    first[a] = start[a] / meta.chunk_shape[a];
    last[a] = (start[a] + shape[a] - 1) / meta.chunk_shape[a];
    counts[a] = last[a] - first[a] + 1;
  }

  std::vector<ChunkOverlap> overlaps;
  overlaps.reserve(static_cast<std::size_t>(element_count(counts)));
  AxisSizes rel(rank, 0);
  do {
    ChunkOverlap o;
    o.chunk_indices.resize(rank);
    o.chunk_offset.resize(rank);
    o.region_offset.resize(rank);
    o.extents.resize(rank);
    for (std::size_t a = 0; a < rank; ++a) {
      o.chunk_indices[a] = first[a] + rel[a];
      const std::int64_t chunk_begin = o.chunk_indices[a] * meta.chunk_shape[a];
      const std::int64_t lo = std::max(start[a], chunk_begin);
      const std::int64_t hi =
          std::min(start[a] + shape[a], chunk_begin + meta.chunk_shape[a]);
      o.chunk_offset[a] = lo - chunk_begin;
      o.region_offset[a] = lo - start[a];
      o.extents[a] = hi - lo;
    }
    overlaps.push_back(std::move(o));
  } while (nd_increment(rel, counts));
  return overlaps;
}

ChunkedArray ChunkedArray::create(const fs::path& root, ArrayMetadata meta) {
  meta.validate();
  if (exists(root))
    throw AlreadyExistsError("array already exists at: " + root.string());
  try {
    fs::create_directories(root);
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("cannot create array directory: ") + e.what());
  }
  const std::string text = metadata_to_zarray(meta).dump(4) + "\n";
  write_file_atomic(root / kMetadataFile, text.data(), text.size());
  return ChunkedArray(root, std::move(meta));
}

ChunkedArray ChunkedArray::open(const fs::path& root) {
  if (!exists(root))
    throw FormatError("no chunked array at: " + root.string() + " (missing .zarray)");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(root / kMetadataFile));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(root.string() + ": .zarray is not valid JSON: " + e.what());
  }
  return ChunkedArray(root, metadata_from_zarray(doc, root));
}

bool ChunkedArray::exists(const fs::path& root) {
  return fs::exists(root / kMetadataFile);
}

std::string ChunkedArray::chunk_key(std::span<const std::int64_t> chunk_indices) const {
  const AxisSizes grid = meta_.chunk_grid();
  if (chunk_indices.size() != meta_.rank())
    throw OutOfRangeError("chunk_key: wrong number of chunk coordinates");
  std::string key;
  for (std::size_t a = 0; a < chunk_indices.size(); ++a) {
    if (chunk_indices[a] < 0 || chunk_indices[a] >= grid[a])
      throw OutOfRangeError("chunk_key: chunk coordinates outside the chunk grid");
    if (a) key += '.';
    key += std::to_string(chunk_indices[a]);
  }
  return key;
}

bool ChunkedArray::chunk_exists(std::span<const std::int64_t> chunk_indices) const {
  return fs::exists(root_ / chunk_key(chunk_indices));
}

std::vector<float> ChunkedArray::read_chunk(std::span<const std::int64_t> chunk_indices) const {
  const std::string key = chunk_key(chunk_indices);
  const std::size_t count = static_cast<std::size_t>(meta_.chunk_elements());
  std::vector<float> values(count, meta_.fill_value);

  const fs::path path = root_ / key;
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) return values;  // absent chunk: all fill_value

  const auto bytes = static_cast<std::uint64_t>(in.tellg());
  if (bytes != count * sizeof(float))
    throw FormatError("chunk '" + key + "' has " + std::to_string(bytes) +
                      " bytes, expected " + std::to_string(count * sizeof(float)));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw IoError("cannot read chunk: " + path.string());
  if constexpr (std::endian::native == std::endian::big) byteswap_floats(values);
  return values;
}

void ChunkedArray::write_chunk(std::span<const std::int64_t> chunk_indices,
                               std::span<const float> values) {
  const std::string key = chunk_key(chunk_indices);
  if (values.size() != static_cast<std::size_t>(meta_.chunk_elements()))
    throw ShapeError("write_chunk: buffer size does not match chunk shape");

  if constexpr (std::endian::native == std::endian::big) {
    std::vector<float> swapped(values.begin(), values.end());
    byteswap_floats(swapped);
    write_file_atomic(root_ / key, reinterpret_cast<const char*>(swapped.data()),
                      swapped.size() * sizeof(float));
  } else {
    write_file_atomic(root_ / key, reinterpret_cast<const char*>(values.data()),
                      values.size() * sizeof(float));
  }
}

void ChunkedArray::check_region(std::span<const std::int64_t> start,
                                std::span<const std::int64_t> shape) const {
  if (start.size() != meta_.rank() || shape.size() != meta_.rank())
    throw ShapeError("region rank does not match array rank");
  for (std::size_t a = 0; a < start.size(); ++a) {
    if (shape[a] < 1) throw OutOfRangeError("region extents must be >= 1");
    if (start[a] < 0 || start[a] + shape[a] > meta_.shape[a])
      throw OutOfRangeError("region [" + std::to_string(start[a]) + ", " +
                            std::to_string(start[a] + shape[a]) + ") exceeds extent " +
                            std::to_string(meta_.shape[a]) + " on axis " +
                            std::to_string(a));
  }
}

void ChunkedArray::read_region(std::span<const std::int64_t> start,
                               std::span<const std::int64_t> shape,
                               std::span<float> out) const {
  check_region(start, shape);
  if (out.size() != static_cast<std::size_t>(element_count(shape)))
    throw ShapeError("read_region: output buffer size does not match region");

  for (const ChunkOverlap& o : chunks_overlapping(meta_, start, shape)) {
    const std::vector<float> chunk = read_chunk(o.chunk_indices);
    copy_block(out.data(), shape, o.region_offset, chunk.data(), meta_.chunk_shape,
               o.chunk_offset, o.extents);
  }
}

std::vector<float> ChunkedArray::read_region(std::span<const std::int64_t> start,
                                             std::span<const std::int64_t> shape) const {
  std::vector<float> out(static_cast<std::size_t>(element_count(shape)));
  read_region(start, shape, out);
  return out;
}

void ChunkedArray::write_region(std::span<const std::int64_t> start,
                                std::span<const std::int64_t> shape,
                                std::span<const float> values) {
  check_region(start, shape);
  if (values.size() != static_cast<std::size_t>(element_count(shape)))
    throw ShapeError("write_region: value buffer size does not match region");

  for (const ChunkOverlap& o : chunks_overlapping(meta_, start, shape)) {
    const bool full_chunk = o.extents == meta_.chunk_shape;
    std::vector<float> chunk;
    if (full_chunk) {
      chunk.resize(static_cast<std::size_t>(meta_.chunk_elements()));
    } else {
      chunk = read_chunk(o.chunk_indices);  // read-modify-write
    }
    copy_block(chunk.data(), meta_.chunk_shape, o.chunk_offset, values.data(), shape,
               o.region_offset, o.extents);
    write_chunk(o.chunk_indices, chunk);
  }
}

void ChunkedArray::write_attributes(const nlohmann::json& attrs) const {
  const std::string text = attrs.dump(1) + "\n";
  write_file_atomic(root_ / kAttributesFile, text.data(), text.size());
}

std::optional<nlohmann::json> ChunkedArray::read_attributes() const {
  const fs::path path = root_ / kAttributesFile;
  if (!fs::exists(path)) return std::nullopt;
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(root_.string() + ": .zattrs is not valid JSON: " + e.what());
  }
}

}  // namespace tessellate
