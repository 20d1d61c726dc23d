#pragma once

#include <vector>

#include "gsreg/gaussian.hpp"
#include "gsreg/sim3.hpp"

namespace gsreg {

/**
 * Fused model in g1's frame: all of g1 in order, followed by
 * transform_cloud(g2, g2_to_g1). A lower-degree cloud is zero-padded to the
 * higher SH degree first. Inputs are not modified.
 */
GaussianCloud merge(const GaussianCloud& g1, const GaussianCloud& g2, const Sim3& g2_to_g1);

/// One edge of a fusion plan: `transform` maps cloud `child` into cloud `parent`.
struct FusionEdge {
  std::size_t child = 0;
  std::size_t parent = 0;
  Sim3 transform;
};

/// Maps every cloud to the plan's root frame. Throws StageError when the plan
/// is not a tree covering all `count` clouds.
std::vector<Sim3> plan_to_root(std::size_t count, const std::vector<FusionEdge>& plan,
                               std::size_t* root = nullptr);

/**
 * Left fold of merge() into the root frame: the root cloud first, then the
 * others in index order, each pushed through its chained transform.
 */
GaussianCloud fuse_many(const std::vector<GaussianCloud>& clouds,
                        const std::vector<FusionEdge>& plan);

}  // namespace gsreg
