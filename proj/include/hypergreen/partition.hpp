#pragma once
//
// Adaptive hierarchical partition of [0,1]^4: boxes failing the rank test are
// split 16 ways, level by level, until the red volume drops below eps^2 or the
// depth cap is reached.
//

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hypergreen/error.hpp"
#include "hypergreen/gp.hpp"
#include "hypergreen/grid.hpp"
#include "hypergreen/oracle.hpp"
#include "hypergreen/parallel.hpp"
#include "hypergreen/rank_detect.hpp"

namespace hypergreen {

enum class Color { Green, Red };

inline const char* to_string(Color c) { return c == Color::Green ? "green" : "red"; }

inline std::vector<SubdomainBox> subdivide(const SubdomainBox& box, int max_level = 30) {
  require(box.level < max_level, ErrorKind::Depth,
          "cannot subdivide a level-" + std::to_string(box.level) + " box (max level " + std::to_string(max_level) + ")");
  std::vector<SubdomainBox> out;
  out.reserve(16);
  for (int c = 0; c < 16; ++c) {
    SubdomainBox child;
    child.level = box.level + 1;
    for (int d = 0; d < 4; ++d)
      child.index[static_cast<std::size_t>(d)] = 2 * box.index[static_cast<std::size_t>(d)] + ((c >> (3 - d)) & 1);
    out.push_back(child);
  }
  return out;
}

/// Injective 64-bit key of a box for levels <= 15.
inline std::uint64_t box_key(const SubdomainBox& b) {
  std::uint64_t key = static_cast<std::uint64_t>(b.level);
  for (int d = 0; d < 4; ++d) key |= static_cast<std::uint64_t>(b.index[static_cast<std::size_t>(d)]) << (4 + 15 * d);
  return key;
}

/// Per-box seed derived from the master seed and the box path.
inline std::uint64_t box_seed(std::uint64_t master, const SubdomainBox& b) { return derive_seed(master, box_key(b)); }

inline int depth_target(double eps) { return static_cast<int>(std::ceil(std::log2(1.0 / (eps * eps)) - 1e-12)); }

struct PartitionNode {
  SubdomainBox box;
  Color color = Color::Green;
  RankDecision decision;
  int parent = -1;
  std::vector<int> children;

  bool is_leaf() const { return children.empty(); }
};

struct PartitionOptions {
  double eps = 0.1;
  double kc = 1.0;
  std::optional<int> q;
  std::uint64_t seed = 0;
  int max_level = 3;
  std::uint64_t budget = 2'000'000;
  int workers = 1;
};

struct PartitionTree {
  std::vector<PartitionNode> nodes;  // nodes[0] is the root
  std::vector<double> red_volume_by_level;
  int final_level = 0;
  int depth_cap = 0;
  std::uint64_t detection_queries = 0;
  bool budget_exceeded = false;
  PartitionOptions options;

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
      if (nodes[static_cast<std::size_t>(i)].is_leaf()) out.push_back(i);
    return out;
  }
  std::vector<int> leaves(Color c) const {
    std::vector<int> out;
    for (int i : leaves())
      if (nodes[static_cast<std::size_t>(i)].color == c) out.push_back(i);
    return out;
  }
};

/// Sum of red box volumes at `level`; 0 for levels the run never reached.
inline double red_volume(const PartitionTree& tree, int level) {
  require(level >= 0, ErrorKind::Config, "level must be >= 0");
  double v = 0.0;
  for (const auto& n : tree.nodes)
    if (n.box.level == level && n.color == Color::Red) v += n.box.volume();
  return v;
}

inline PartitionTree adaptive_partition(OperatorOracle& oracle, SpectrumCache& spectra, const PartitionOptions& opt) {
  require(opt.eps > 0.0 && opt.eps < 0.5, ErrorKind::Config, "eps must lie in (0, 1/2)");
  require(opt.max_level >= 0, ErrorKind::Config, "max level must be >= 0");
  require(opt.max_level <= oracle.grid()->max_aligned_level(), ErrorKind::Alignment,
          "max level " + std::to_string(opt.max_level) + " exceeds the grid alignment bound " +
              std::to_string(oracle.grid()->max_aligned_level()));
  PartitionTree tree;
  tree.options = opt;
  tree.depth_cap = std::min(depth_target(opt.eps), opt.max_level);

  const int k = k_epsilon(opt.eps, opt.kc);
  const int q = opt.q ? *opt.q : choose_power_exponent(opt.eps, 1.0);
  const std::uint64_t per_box = static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(8 * q + 5);
  const std::uint64_t start = oracle.queries();

  auto test_all = [&](const std::vector<int>& ids) {
    parallel_for(ids.size(), opt.workers, [&](std::size_t i) {
      PartitionNode& n = tree.nodes[static_cast<std::size_t>(ids[i])];
      DetectOptions d{opt.eps, opt.kc, q, box_seed(opt.seed, n.box)};
      auto sp = spectra.get(input_patch(oracle.grid(), n.box));
      n.decision = detect_rank(oracle, n.box, *sp, d);
      n.color = n.decision.verdict == Verdict::LowRank ? Color::Green : Color::Red;
    });
  };

  if (per_box > opt.budget) {
    tree.budget_exceeded = true;
    return tree;
  }
  tree.nodes.push_back(PartitionNode{SubdomainBox::root(), Color::Green, {}, -1, {}});
  test_all({0});
  std::vector<int> red;
  if (tree.nodes[0].color == Color::Red) red.push_back(0);
  tree.red_volume_by_level.push_back(red.empty() ? 0.0 : 1.0);

  int level = 0;
  while (!red.empty() && tree.red_volume_by_level.back() > opt.eps * opt.eps && level < tree.depth_cap) {
    const std::uint64_t cost = per_box * 16 * red.size();
    if (oracle.queries() - start + cost > opt.budget) {
      tree.budget_exceeded = true;
      break;
    }
    std::vector<int> next;
    for (int id : red) {
      for (const auto& b : subdivide(tree.nodes[static_cast<std::size_t>(id)].box, tree.depth_cap)) {
        tree.nodes[static_cast<std::size_t>(id)].children.push_back(static_cast<int>(tree.nodes.size()));
        tree.nodes.push_back(PartitionNode{b, Color::Green, {}, id, {}});
        next.push_back(static_cast<int>(tree.nodes.size()) - 1);
      }
    }
    test_all(next);
    ++level;
    red.clear();
    double vol = 0.0;
    for (int id : next)
      if (tree.nodes[static_cast<std::size_t>(id)].color == Color::Red) {
        red.push_back(id);
        vol += tree.nodes[static_cast<std::size_t>(id)].box.volume();
      }
    tree.red_volume_by_level.push_back(vol);
  }
  tree.final_level = level;
  tree.detection_queries = oracle.queries() - start;
  return tree;
}

inline PartitionTree adaptive_partition(OperatorOracle& oracle, const CovarianceKernel& kernel,
                                        const PartitionOptions& opt) {
  SpectrumCache cache(kernel);
  return adaptive_partition(oracle, cache, opt);
}

}  // namespace hypergreen
