#include <gtest/gtest.h>

#include "gsreg/error.hpp"
#include "gsreg/matching.hpp"
#include "gsreg/synth.hpp"
#include "test_support.hpp"

using namespace gsreg;

namespace {

EmbeddingSet random_set(std::mt19937_64& rng, int n, int d, const std::string& prefix) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  EmbeddingSet e;
  e.vectors.resize(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) e.vectors(i, j) = g(rng);
    e.view_ids.push_back(prefix + std::to_string(i));
  }
  return e;
}

}  // namespace

TEST(BestPair, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const EmbeddingSet a = random_set(rng, 7, 16, "a"), b = random_set(rng, 9, 16, "b");
    const MatchedPair p = best_pair(a, b);
    double best = -2.0;
    std::size_t bi = 0, bj = 0;
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 9; ++j) {
        double dot = 0, na = 0, nb = 0;
        for (int k = 0; k < 16; ++k) {
          dot += double(a.vectors(i, k)) * b.vectors(j, k);
          na += double(a.vectors(i, k)) * a.vectors(i, k);
          nb += double(b.vectors(j, k)) * b.vectors(j, k);
        }
        const double c = dot / std::sqrt(na * nb);
        if (c > best) {
          best = c;
          bi = i;
          bj = j;
        }
      }
    EXPECT_EQ(p.index_1, bi);
    EXPECT_EQ(p.index_2, bj);
    EXPECT_NEAR(p.score, best, 1e-12);
    EXPECT_EQ(p.view_id_1, a.view_ids[bi]);
    EXPECT_EQ(p.view_id_2, b.view_ids[bj]);
  }
}

TEST(BestPair, SelfMatchTieGoesToFirstPair) {
  std::mt19937_64 rng(2);
  const EmbeddingSet a = random_set(rng, 5, 8, "v");
  const MatchedPair p = best_pair(a, a);
  EXPECT_EQ(p.index_1, p.index_2);
  EXPECT_NEAR(p.score, 1.0, 1e-12);

  EmbeddingSet same;
  same.vectors = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Ones(3, 4);
  same.view_ids = {"x", "y", "z"};
  const MatchedPair q = best_pair(same, same);
  EXPECT_EQ(q.index_1, 0u);
  EXPECT_EQ(q.index_2, 0u);
}

TEST(BestPair, InvariantToPositiveRescaling) {
  std::mt19937_64 rng(3);
  const EmbeddingSet a = random_set(rng, 6, 12, "a"), b = random_set(rng, 6, 12, "b");
  EmbeddingSet a2 = a;
  a2.vectors.row(2) *= 7.5f;
  a2.vectors.row(4) *= 0.01f;
  const MatchedPair p = best_pair(a, b), q = best_pair(a2, b);
  EXPECT_EQ(p.index_1, q.index_1);
  EXPECT_EQ(p.index_2, q.index_2);
}

TEST(BestPair, DimensionMismatchThrows) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(best_pair(random_set(rng, 2, 3, "a"), random_set(rng, 2, 4, "b")), InvalidArgument);
}

TEST(CosineSimilarity, KnownValues) {
  Eigen::RowVectorXf a(2), b(2);
  a << 1, 0;
  b << 0, 3;
  EXPECT_NEAR(cosine_similarity(a, b), 0.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(a, a * 4), 1.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(a, -a), -1.0, 1e-15);
}

TEST(SubsampleViews, KeepsFirstAndCapsCount) {
  const CameraSet grid = overhead_grid({0, 0, 0}, {1, 1}, 10, 10, 2.0, 60, 16, 16);
  const CameraSet sub = subsample_views(grid, 32);
  EXPECT_EQ(sub.views.size(), 32u);
  EXPECT_EQ(sub.ids.front(), grid.ids.front());
  EXPECT_EQ(subsample_views(grid, 200).views.size(), 100u);
}

TEST(RenderCandidateViews, RequiresViews) {
  const GaussianCloud c = make_scene(gsreg::testing::small_scene_spec(10, 1));
  EXPECT_THROW(render_candidate_views(c, {}), InvalidArgument);
  const CameraSet grid = overhead_grid({0, 0, 0}, {0.5, 0.5}, 2, 1, 2.0, 60, 16, 16);
  EXPECT_EQ(render_candidate_views(c, grid.views).size(), 2u);
}

TEST(SyntheticEmbeddings, SameViewMatchesItself) {
  const GaussianCloud c = make_scene(gsreg::testing::small_scene_spec(400, 2));
  const CameraSet grid = overhead_grid({0, 0, 0}, {0.6, 0.6}, 3, 3, 1.5, 60, 48, 48);
  const auto images = render_candidate_views(c, grid.views);
  const EmbeddingSet e = synthetic_embeddings(images, grid.ids);
  validate_embeddings(e);
  EXPECT_EQ(e.dim(), 3 * 64);
  std::vector<Image> probe = {images[4]};
  const MatchedPair p = best_pair(synthetic_embeddings(probe, {"probe"}), e);
  EXPECT_EQ(p.index_2, 4u);
}
