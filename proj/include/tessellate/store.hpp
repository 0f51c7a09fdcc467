#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tessellate/nd.hpp"

#include "json.hpp"

namespace tessellate {

// Metadata of an on-disk chunked array. Element type is fixed to 32-bit
// little-endian float, row-major, uncompressed (the zarr v2 "<f4" / order
// "C" / compressor null subset). Chunks may exceed the array shape; trailing
// chunks are stored full-size, padded with fill_value.
struct ArrayMetadata {
  AxisSizes shape;
  AxisSizes chunk_shape;
  float fill_value = 0.0f;

  std::size_t rank() const { return shape.size(); }
  std::int64_t chunk_elements() const { return element_count(chunk_shape); }

  // Number of chunks along each axis (ceil division).
  AxisSizes chunk_grid() const;

  void validate() const;

  bool operator==(const ArrayMetadata&) const = default;
};

// Intersection of a region with one chunk.
struct ChunkOverlap {
  AxisSizes chunk_indices;  // chunk grid coordinates
  AxisSizes chunk_offset;   // overlap origin within the chunk
  AxisSizes region_offset;  // overlap origin within the queried region
  AxisSizes extents;        // overlap shape
};

// All chunks intersecting [start, start + shape); region must be in bounds.
std::vector<ChunkOverlap> chunks_overlapping(const ArrayMetadata& meta,
                                             std::span<const std::int64_t> start,
                                             std::span<const std::int64_t> shape);

std::string read_text_file(const std::filesystem::path& path);

// Write-then-rename; readers never observe a torn file.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view text);

// A directory-backed chunked float array in the zarr v2 layout: a `.zarray`
// JSON document plus one raw little-endian file per chunk, named by joining
// the chunk grid coordinates with '.'. Absent chunk files read as fill_value.
class ChunkedArray {
 public:
  static ChunkedArray create(const std::filesystem::path& root, ArrayMetadata meta);
  static ChunkedArray open(const std::filesystem::path& root);
  static bool exists(const std::filesystem::path& root);

  const ArrayMetadata& metadata() const { return meta_; }
  const std::filesystem::path& root() const { return root_; }

  // Chunk file name for the given grid coordinates, e.g. (0,1,2) -> "0.1.2".
  std::string chunk_key(std::span<const std::int64_t> chunk_indices) const;

  std::vector<float> read_region(std::span<const std::int64_t> start,
                                 std::span<const std::int64_t> shape) const;
  void read_region(std::span<const std::int64_t> start,
                   std::span<const std::int64_t> shape, std::span<float> out) const;
  void write_region(std::span<const std::int64_t> start,
                    std::span<const std::int64_t> shape, std::span<const float> values);

  // Whole-chunk access (used by the stitch engine's read-modify-write path).
  // read_chunk returns a fill_value buffer when the chunk file is absent.
  std::vector<float> read_chunk(std::span<const std::int64_t> chunk_indices) const;
  void write_chunk(std::span<const std::int64_t> chunk_indices,
                   std::span<const float> values);
  bool chunk_exists(std::span<const std::int64_t> chunk_indices) const;

  // User attributes (.zattrs sidecar document).
  void write_attributes(const nlohmann::json& attrs) const;
  std::optional<nlohmann::json> read_attributes() const;

 private:
  ChunkedArray(std::filesystem::path root, ArrayMetadata meta)
      : root_(std::move(root)), meta_(std::move(meta)) {}

  void check_region(std::span<const std::int64_t> start,
                    std::span<const std::int64_t> shape) const;

  std::filesystem::path root_;
  ArrayMetadata meta_;
};

}  // namespace tessellate
