#include "bifactor/constraints.hpp"

#include <algorithm>

namespace bifactor {

ConstraintSet bifactor_constraint_pairs(int n_groups) {
  if (n_groups < 1) throw DimensionError("need at least one group factor");
  ConstraintSet out;
  for (int a = 1; a <= n_groups; ++a) {
    for (int b = a + 1; b <= n_groups; ++b) {
      out.pairs.push_back({a, b});
    }
  }
  return out;
}

ConstraintSet hierarchy_constraint_pairs(const HierarchyTree& tree) {
  const int K = tree.n_factors();
  if (K < 1 || tree.parent[1] != 0) throw MalformedTreeError("invalid hierarchy");
  ConstraintSet out;
  for (int f = 2; f <= K; ++f) {
    for (int g = f + 1; g <= K; ++g) {
      if (tree.is_ancestor(f, g) || tree.is_ancestor(g, f)) continue;
      out.pairs.push_back({f - 1, g - 1});  // factor id -> lambda column
    }
  }
  return out;
}

int structure_h_order(const HierarchyTree& tree) { return tree.max_leaf_depth() + 1; }

}  // namespace bifactor
