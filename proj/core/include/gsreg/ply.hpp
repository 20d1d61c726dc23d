#pragma once

#include <filesystem>

#include "gsreg/gaussian.hpp"

namespace gsreg {

enum class PlyPrecision {
  kFloat32,  ///< de-facto 3DGS export layout
  kFloat64,  ///< same property names, stored as double (exact round trip)
};

/**
 * Loads a binary little-endian 3DGS PLY. Required vertex properties:
 * x y z, f_dc_0..2, f_rest_0..M-1, opacity, scale_0..2, rot_0..3, with
 * M = 3 * ((L+1)^2 - 1) determining the SH degree L. Extra properties
 * (normals, ...) are skipped. Quaternions are scalar-first and normalized on
 * load. Throws FormatError naming the offending property on any defect.
 */
GaussianCloud load_ply(const std::filesystem::path& path);

void save_ply(const GaussianCloud& cloud, const std::filesystem::path& path,
              PlyPrecision precision = PlyPrecision::kFloat32);

}  // namespace gsreg
