#pragma once

#include <cassert>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace tessellate {

// Per-axis extents / offsets, slowest axis first (row-major).
using AxisSizes = std::vector<std::int64_t>;

inline std::int64_t element_count(std::span<const std::int64_t> shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

inline AxisSizes row_major_strides(std::span<const std::int64_t> shape) {
  AxisSizes strides(shape.size());
  std::int64_t acc = 1;
  for (std::size_t a = shape.size(); a-- > 0;) {
    strides[a] = acc;
    acc *= shape[a];
  }
  return strides;
}

inline std::int64_t linear_index(std::span<const std::int64_t> coords,
                                 std::span<const std::int64_t> strides) {
  std::int64_t i = 0;
  for (std::size_t a = 0; a < coords.size(); ++a) i += coords[a] * strides[a];
  return i;
}

// Odometer step over [0, shape) in row-major order; false once exhausted.
inline bool nd_increment(AxisSizes& coords, std::span<const std::int64_t> shape) {
  for (std::size_t a = coords.size(); a-- > 0;) {
    if (++coords[a] < shape[a]) return true;
    coords[a] = 0;
  }
  return false;
}

namespace detail {

template <typename Dst, typename Src, typename Op>
void transform_block(Dst* dst, std::span<const std::int64_t> dst_shape,
                     std::span<const std::int64_t> dst_origin, const Src* src,
                     std::span<const std::int64_t> src_shape,
                     std::span<const std::int64_t> src_origin,
                     std::span<const std::int64_t> extents, Op op) {
  const std::size_t rank = extents.size();
  assert(dst_shape.size() == rank && src_shape.size() == rank);
  const AxisSizes dst_strides = row_major_strides(dst_shape);
  const AxisSizes src_strides = row_major_strides(src_shape);
  const std::int64_t run = extents[rank - 1];

  AxisSizes outer(rank > 1 ? rank - 1 : 0, 0);
  const std::span<const std::int64_t> outer_extents = extents.first(outer.size());
  do {
    std::int64_t doff = dst_origin[rank - 1] * dst_strides[rank - 1];
    std::int64_t soff = src_origin[rank - 1] * src_strides[rank - 1];
    for (std::size_t a = 0; a + 1 < rank; ++a) {
      doff += (dst_origin[a] + outer[a]) * dst_strides[a];
      soff += (src_origin[a] + outer[a]) * src_strides[a];
    }
    op(dst + doff, src + soff, static_cast<std::size_t>(run));
  } while (nd_increment(outer, outer_extents));
}

}  // namespace detail

// Copies an `extents`-shaped block from `src` (at src_origin) into `dst`
// (at dst_origin). Buffers are dense row-major arrays of the given shapes.
inline void copy_block(float* dst, std::span<const std::int64_t> dst_shape,
                       std::span<const std::int64_t> dst_origin, const float* src,
                       std::span<const std::int64_t> src_shape,
                       std::span<const std::int64_t> src_origin,
                       std::span<const std::int64_t> extents) {
  detail::transform_block(dst, dst_shape, dst_origin, src, src_shape, src_origin, extents,
                          [](float* d, const float* s, std::size_t n) {
                            std::memcpy(d, s, n * sizeof(float));
                          });
}

// Same traversal as copy_block but accumulates: dst += src.
inline void add_block(float* dst, std::span<const std::int64_t> dst_shape,
                      std::span<const std::int64_t> dst_origin, const float* src,
                      std::span<const std::int64_t> src_shape,
                      std::span<const std::int64_t> src_origin,
                      std::span<const std::int64_t> extents) {
  detail::transform_block(dst, dst_shape, dst_origin, src, src_shape, src_origin, extents,
                          [](float* d, const float* s, std::size_t n) {
                            for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
                          });
}

}  // namespace tessellate
