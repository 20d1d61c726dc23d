#include "gsreg/matching.hpp"

#include <algorithm>
#include <cmath>

#include "gsreg/error.hpp"
#include "gsreg/renderer.hpp"

namespace gsreg {

double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXf>& a,
                         const Eigen::Ref<const Eigen::RowVectorXf>& b) {
  const Eigen::RowVectorXd ad = a.cast<double>();
  const Eigen::RowVectorXd bd = b.cast<double>();
  const double c = ad.dot(bd) / (ad.norm() * bd.norm());
  return std::clamp(c, -1.0, 1.0);
}

MatchedPair best_pair(const EmbeddingSet& e1, const EmbeddingSet& e2) {
  validate_embeddings(e1);
  validate_embeddings(e2);
  if (e1.dim() != e2.dim()) {
    throw InvalidArgument("best_pair: embedding dimension mismatch (" + std::to_string(e1.dim()) +
                          " vs " + std::to_string(e2.dim()) + ")");
  }
  const Eigen::MatrixXd a = e1.vectors.cast<double>().rowwise().normalized();
  const Eigen::MatrixXd b = e2.vectors.cast<double>().rowwise().normalized();
  const Eigen::MatrixXd scores = a * b.transpose();

  MatchedPair best;
  best.score = -2.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (scores(i, j) > best.score) {
        best.score = scores(i, j);
        best.index_1 = static_cast<std::size_t>(i);
        best.index_2 = static_cast<std::size_t>(j);
      }
    }
  }
  best.score = std::clamp(best.score, -1.0, 1.0);
  best.view_id_1 = e1.view_ids[best.index_1];
  best.view_id_2 = e2.view_ids[best.index_2];
  return best;
}

CameraSet subsample_views(const CameraSet& cameras, std::size_t max_views) {
  const std::size_t n = cameras.views.size();
  if (n <= max_views || max_views == 0) return cameras;
  CameraSet out;
  for (std::size_t k = 0; k < max_views; ++k) {
    const std::size_t i = k * n / max_views;
    out.views.push_back(cameras.views[i]);
    out.ids.push_back(i < cameras.ids.size() ? cameras.ids[i] : std::to_string(i));
  }
  return out;
}

std::vector<Image> render_candidate_views(const GaussianCloud& cloud,
                                          const std::vector<CameraView>& views) {
  if (views.empty()) throw InvalidArgument("render_candidate_views: no views given");
  std::vector<Image> images;
  images.reserve(views.size());
  for (const auto& v : views) images.push_back(render(cloud, v).rgb);
  return images;
}

void save_candidate_images(const std::vector<Image>& images, const std::vector<std::string>& ids,
                           const std::filesystem::path& dir) {
  if (images.size() != ids.size()) throw InvalidArgument("save_candidate_images: id count mismatch");
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) write_png(images[i], dir / (ids[i] + ".png"));
}

}  // namespace gsreg
