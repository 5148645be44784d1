#pragma once

#include <string>

#include "uwrange/labels.hpp"
#include "uwrange/localizer.hpp"

namespace uwrange {

/// Model checkpoint with the range grid it was trained against.
struct Checkpoint {
  NetworkParams params;
  RangeGrid grid;
};

/// UWAR container: magic "UWAR", u32 version = 1, u32 tensor count; per
/// tensor u16 name length, name bytes, u8 dtype (0 = f64), u8 ndim,
/// u32 dims..., then raw little-endian doubles.  Architecture, grid and
/// flags ride along as reserved "meta.*" tensors.
void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const RangeGrid& grid);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace uwrange
