#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

#include "gsreg/image.hpp"
#include "gsreg/sim3.hpp"

namespace gsreg {

inline constexpr int kInterchangeSchemaVersion = 1;

/**
 * Outputs of a two-view 3D foundation model for one matched image pair.
 * Depths are z-depth along the camera axis in the model's own units;
 * `pose_2_to_1` maps camera-2 coordinates to camera-1 coordinates.
 */
struct FoundationBundle {
  Sim3 pose_2_to_1;  ///< rigid
  MapF depth_fm_1, depth_fm_2;
  MapF conf_1, conf_2;
  std::string inference_mode;  ///< free-form tag recorded by the exporter

  int width() const { return depth_fm_1.width(); }
  int height() const { return depth_fm_1.height(); }
  bool operator==(const FoundationBundle&) const;
};

/// Throws FormatError when shapes disagree, confidences are negative or
/// all-zero, or the pose is not rigid.
void validate_bundle(const FoundationBundle& bundle);

/// Directory layout: meta.json + depth_fm_1.f32, depth_fm_2.f32, conf_1.f32, conf_2.f32.
FoundationBundle read_bundle(const std::filesystem::path& dir);
void write_bundle(const FoundationBundle& bundle, const std::filesystem::path& dir);

/// N image embeddings of dimension d, row i belonging to view_ids[i].
struct EmbeddingSet {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> vectors;
  std::vector<std::string> view_ids;

  std::size_t size() const { return view_ids.size(); }
  Eigen::Index dim() const { return vectors.cols(); }
  bool operator==(const EmbeddingSet& o) const {
    return view_ids == o.view_ids && vectors.rows() == o.vectors.rows() &&
           vectors.cols() == o.vectors.cols() && vectors == o.vectors;
  }
};

/// Throws FormatError on empty sets, misaligned ids or zero-norm vectors.
void validate_embeddings(const EmbeddingSet& set);

/// Directory layout: meta.json + vectors.f32 (N x d, row-major).
EmbeddingSet read_embeddings(const std::filesystem::path& dir);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& dir);

}  // namespace gsreg
