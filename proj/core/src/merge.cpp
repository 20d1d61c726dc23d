#include "gsreg/merge.hpp"

#include <algorithm>
#include <optional>
#include <string>

#include "gsreg/error.hpp"

namespace gsreg {

GaussianCloud merge(const GaussianCloud& g1, const GaussianCloud& g2, const Sim3& g2_to_g1) {
  const int degree = std::max(g1.sh_degree(), g2.sh_degree());
  const GaussianCloud moved =
      transform_cloud(g2.sh_degree() < degree ? g2.with_sh_degree(degree) : g2, g2_to_g1);
  std::vector<Gaussian> out;
  out.reserve(g1.size() + g2.size());
  out.insert(out.end(), g1.gaussians().begin(), g1.gaussians().end());
  if (g1.sh_degree() < degree) {
    // Missing bands are zero-padded; existing entries are copied bit for bit.
    const GaussianCloud padded = g1.with_sh_degree(degree);
    std::copy(padded.gaussians().begin(), padded.gaussians().end(), out.begin());
  }
  out.insert(out.end(), moved.gaussians().begin(), moved.gaussians().end());
  return GaussianCloud(degree, std::move(out), g1.frame_label());
}

std::vector<Sim3> plan_to_root(std::size_t count, const std::vector<FusionEdge>& plan,
                               std::size_t* root_out) {
  if (count == 0) throw InvalidArgument("fusion plan: no clouds");
  std::vector<std::optional<std::size_t>> parent(count);
  std::vector<Sim3> to_parent(count);
  for (const auto& e : plan) {
    if (e.child >= count || e.parent >= count) {
      throw StageError("fusion plan: edge references cloud " +
                       std::to_string(std::max(e.child, e.parent)) + " of " +
                       std::to_string(count));
    }
    if (e.child == e.parent) throw StageError("fusion plan: self edge on cloud " + std::to_string(e.child));
    if (parent[e.child]) {
      throw StageError("fusion plan: cloud " + std::to_string(e.child) + " has two parents");
    }
    parent[e.child] = e.parent;
    to_parent[e.child] = e.transform;
  }
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < count; ++i) {
    if (!parent[i]) roots.push_back(i);
  }
  if (roots.size() != 1) {
    throw StageError("fusion plan is disconnected: " + std::to_string(roots.size()) +
                     " root frames");
  }
  std::vector<Sim3> to_root(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sim3 chain;
    std::size_t node = i;
    std::size_t steps = 0;
    while (parent[node]) {
      chain = to_parent[node] * chain;
      node = *parent[node];
      if (++steps > count) throw StageError("fusion plan contains a cycle");
    }
    to_root[i] = chain;
  }
  if (root_out) *root_out = roots.front();
  return to_root;
}

GaussianCloud fuse_many(const std::vector<GaussianCloud>& clouds,
                        const std::vector<FusionEdge>& plan) {
  std::size_t root = 0;
  const std::vector<Sim3> to_root = plan_to_root(clouds.size(), plan, &root);
  GaussianCloud fused = clouds[root];
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    if (i == root) continue;
    fused = merge(fused, clouds[i], to_root[i]);
  }
  return fused;
}

}  // namespace gsreg
