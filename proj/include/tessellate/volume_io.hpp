#pragma once

#include <filesystem>

#include "tessellate/store.hpp"
#include "tessellate/subsample.hpp"

namespace tessellate {

// Volumes are chunked arrays (directory with .zarray) or raw little-endian
// float32 files with a JSON sidecar at <path>.json holding {"shape": [N, C,
// spatial...]}. Array rank 4 maps to (N,C,Y,X), rank 5 to (N,C,Z,Y,X).

TensorLayout layout_from_array_shape(const AxisSizes& shape);
AxisSizes array_shape_from_layout(const TensorLayout& layout);

// Reads only enough to determine the layout.
TensorLayout peek_volume_layout(const std::filesystem::path& path);

DenseTensor load_volume(const std::filesystem::path& path);

// Whole-volume write as a chunked array; empty chunk_spatial means one chunk
// spanning each spatial axis.
ChunkedArray save_volume(const std::filesystem::path& root, const DenseTensor& tensor,
                         const AxisSizes& chunk_spatial = {});

// Reads a full chunked array of any rank into a flat buffer.
std::vector<float> read_full_array(const ChunkedArray& array);

}  // namespace tessellate
