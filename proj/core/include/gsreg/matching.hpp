#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gsreg/camera.hpp"
#include "gsreg/gaussian.hpp"
#include "gsreg/image.hpp"
#include "gsreg/interchange.hpp"

namespace gsreg {

struct MatchedPair {
  std::size_t index_1 = 0;
  std::size_t index_2 = 0;
  std::string view_id_1;
  std::string view_id_2;
  double score = 0.0;  ///< cosine similarity in [-1, 1]
};

/**
 * Exhaustive argmax of cosine similarity over all cross pairs. Ties keep the
 * lexicographically smallest (index_1, index_2). Throws InvalidArgument when
 * the embedding dimensions differ.
 */
MatchedPair best_pair(const EmbeddingSet& e1, const EmbeddingSet& e2);

double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXf>& a,
                         const Eigen::Ref<const Eigen::RowVectorXf>& b);

/// Uniformly subsamples at most `max_views` cameras, keeping the first one.
CameraSet subsample_views(const CameraSet& cameras, std::size_t max_views = 32);

/// Renders one RGB image per view; throws InvalidArgument on an empty view list.
std::vector<Image> render_candidate_views(const GaussianCloud& cloud,
                                          const std::vector<CameraView>& views);

/// Writes `<dir>/<id>.png` for each rendered image, for the embedding exporter.
void save_candidate_images(const std::vector<Image>& images, const std::vector<std::string>& ids,
                           const std::filesystem::path& dir);

}  // namespace gsreg
