#include "tessellate/volume_io.hpp"

#include <bit>
#include <fstream>

#include "tessellate/errors.hpp"

namespace fs = std::filesystem;

namespace tessellate {

TensorLayout layout_from_array_shape(const AxisSizes& shape) {
  if (shape.size() != 4 && shape.size() != 5)
    throw ShapeError("volume arrays must have rank 4 (N,C,Y,X) or 5 (N,C,Z,Y,X), got " +
                     std::to_string(shape.size()));
  TensorLayout layout;
  layout.items = shape[0];
  layout.channels = shape[1];
  layout.spatial.assign(shape.begin() + 2, shape.end());
  layout.validate();
  return layout;
}

AxisSizes array_shape_from_layout(const TensorLayout& layout) {
  AxisSizes shape{layout.items, layout.channels};
  shape.insert(shape.end(), layout.spatial.begin(), layout.spatial.end());
  return shape;
}

namespace {

fs::path sidecar_path(const fs::path& path) { return path.string() + ".json"; }

bool is_raw_volume(const fs::path& path) {
  return fs::is_regular_file(path) && fs::exists(sidecar_path(path));
}

AxisSizes sidecar_shape(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("volume sidecar is not valid JSON: " + sidecar_path(path).string() +
                      ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("shape"))
    throw FormatError("volume sidecar must provide a \"shape\" array: " +
                      sidecar_path(path).string());
  if (doc.contains("dtype") && doc.at("dtype").get<std::string>() != "<f4")
    throw FormatError("volume sidecar: only dtype <f4 is supported");
  if (doc.contains("order") && doc.at("order").get<std::string>() != "C")
    throw FormatError("volume sidecar: only order C is supported");
  return doc.at("shape").get<AxisSizes>();
}

}  // namespace

TensorLayout peek_volume_layout(const fs::path& path) {
  if (ChunkedArray::exists(path))
    return layout_from_array_shape(ChunkedArray::open(path).metadata().shape);
  if (is_raw_volume(path)) return layout_from_array_shape(sidecar_shape(path));
  throw FormatError("not a volume (no .zarray directory or raw+sidecar pair): " +
                    path.string());
}

DenseTensor load_volume(const fs::path& path) {
  if (ChunkedArray::exists(path)) {
    const ChunkedArray array = ChunkedArray::open(path);
    DenseTensor tensor;
    tensor.layout = layout_from_array_shape(array.metadata().shape);
    tensor.values = read_full_array(array);
    return tensor;
  }
  if (is_raw_volume(path)) {
    DenseTensor tensor;
    tensor.layout = layout_from_array_shape(sidecar_shape(path));
    const std::int64_t count = tensor.layout.element_count();

    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open volume: " + path.string());
    const auto bytes = static_cast<std::uint64_t>(in.tellg());
    if (bytes != static_cast<std::uint64_t>(count) * sizeof(float))
      throw FormatError("raw volume " + path.string() + " holds " + std::to_string(bytes) +
                        " bytes but the sidecar shape requires " +
                        std::to_string(count * static_cast<std::int64_t>(sizeof(float))));
    in.seekg(0);
    tensor.values.resize(static_cast<std::size_t>(count));
    in.read(reinterpret_cast<char*>(tensor.values.data()),
            static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("cannot read volume: " + path.string());
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& v : tensor.values) {
        auto b = std::bit_cast<std::uint32_t>(v);
        b = ((b & 0x000000FFu) << 24) | ((b & 0x0000FF00u) << 8) |
            ((b & 0x00FF0000u) >> 8) | ((b & 0xFF000000u) >> 24);
        v = std::bit_cast<float>(b);
      }
    }
    return tensor;
  }
  throw FormatError("not a volume (no .zarray directory or raw+sidecar pair): " +
                    path.string());
}

ChunkedArray save_volume(const fs::path& root, const DenseTensor& tensor,
                         const AxisSizes& chunk_spatial) {
  tensor.validate();
  ArrayMetadata meta;
  meta.shape = array_shape_from_layout(tensor.layout);
  const AxisSizes spatial_chunks =
      chunk_spatial.empty() ? tensor.layout.spatial : chunk_spatial;
  if (spatial_chunks.size() != tensor.layout.spatial_rank())
    throw InvalidSpecError("chunk rank does not match the volume's spatial rank");
  meta.chunk_shape = {1, tensor.layout.channels};
  meta.chunk_shape.insert(meta.chunk_shape.end(), spatial_chunks.begin(),
                          spatial_chunks.end());

  ChunkedArray array = ChunkedArray::create(root, meta);
  const AxisSizes start(meta.shape.size(), 0);
  array.write_region(start, meta.shape, tensor.values);
  return array;
}

std::vector<float> read_full_array(const ChunkedArray& array) {
  const AxisSizes start(array.metadata().rank(), 0);
  return array.read_region(start, array.metadata().shape);
}

}  // namespace tessellate
