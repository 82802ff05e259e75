// Constraint pair sets encoding exact bi-factor and hierarchical loading
// structures as elementwise product constraints on lambda.
#pragma once

#include "bifactor/types.hpp"

namespace bifactor {

// All unordered pairs among the G group columns; (G-1)G/2 pairs, so J rows
// contribute J(G-1)G/2 scalar constraints.
ConstraintSet bifactor_constraint_pairs(int n_groups);

// Pairs of factor columns that cannot both be loaded by one item under the
// given hierarchy: all non-root pairs (k, k') with neither an ancestor of
// the other. An item's factors form a chain from the root, so every such
// cross-branch product vanishes, including pairs of leaves from different
// subtrees. For a two-layer tree this reduces to the bi-factor set; for a
// chain it is empty.
ConstraintSet hierarchy_constraint_pairs(const HierarchyTree& tree);

// Order statistic of per-row |group loadings| that must vanish for the
// structure to be exact: 2 (second largest) for a two-layer tree, in general
// one more than the number of non-root factors an item may load on.
int structure_h_order(const HierarchyTree& tree);

}  // namespace bifactor
