#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "tpbs/model.hpp"

namespace tpbs {

inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class FileMode { Binary, Text };

// Binary layout, all little-endian:
//   "TPBS" | u32 version | u32 N | u32 R | u32 M
//   per dimension: u32 degree | u32 num_basis | u32 knot_count | f64 knots[knot_count]
//   f64 coeffs[sum_n R * K_n]  (c[n][r][k], k fastest)
//   f64 out_vectors[R * M]
//   u32 scaler_dim | f64 min[dim] | f64 max[dim] | f64 margin | f64 target_offset | f64 target_scale
// The text mode writes the same fields in the same order, one token each,
// after a "TPBS-TEXT <version>" line; doubles use 17 significant digits.
void save_model(const TpbsModel& model, std::ostream& os, FileMode mode = FileMode::Binary);
void save_model(const TpbsModel& model, const std::string& path, FileMode mode = FileMode::Binary);

/// Detects binary vs text mode from the leading bytes.
TpbsModel load_model(std::istream& is);
TpbsModel load_model(const std::string& path);

}  // namespace tpbs
