#include "bifactor/types.hpp"

#include "bifactor/correlation.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <functional>
#include <set>
#include <string>
#include <utility>

namespace bifactor {

SampleCov make_sample_cov(MatrixXd S, std::int64_t N) {
  if (S.rows() != S.cols() || S.rows() < 1) {
    throw DimensionError("sample covariance must be square and non-empty");
  }
  if (N < 2) {
    throw Error("sample size must be at least 2");
  }
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw AsymmetricMatrixError("sample covariance is not symmetric");
  }
  S = 0.5 * (S + S.transpose());  // kill rounding asymmetry
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw NotPositiveDefiniteError("sample covariance is not positive definite");
  }
  return SampleCov{std::move(S), N};
}

void validate_params(const FactorParams& params) {
  const int J = params.J();
  const int K = params.n_factors();
  if (J < 1 || K < 1) {
    throw DimensionError("lambda must be a non-empty J x K matrix");
  }
  if (params.psi.size() != J) {
    throw DimensionError("psi must have one entry per item");
  }
  const int full = gamma_length(K - 1);
  if (params.gamma.size() != 0 && params.gamma.size() != full) {
    throw DimensionError("gamma must be empty or of length G(G-1)/2");
  }
  if ((params.psi.array() <= 0.0).any()) {
    throw Error("psi entries must be strictly positive");
  }
  if (!params.lambda.allFinite() || !params.gamma.allFinite() || !params.psi.allFinite()) {
    throw Error("parameters must be finite");
  }
}

void validate_constraints(const ConstraintSet& constraints, int n_factors) {
  std::set<std::pair<int, int>> seen;
  for (const auto& p : constraints.pairs) {
    if (p.first < 1 || p.second <= p.first || p.second >= n_factors) {
      throw DimensionError("constraint pair out of range");
    }
    if (!seen.insert({p.first, p.second}).second) {
      throw Error("duplicate constraint pair");
    }
  }
}

std::vector<int> HierarchyTree::children(int f) const {
  std::vector<int> out;
  for (int v = 2; v <= n_factors(); ++v) {
    if (parent[v] == f) out.push_back(v);
  }
  return out;
}

bool HierarchyTree::is_ancestor(int a, int b) const {
  int v = b;
  while (parent[v] != 0) {
    v = parent[v];
    if (v == a) return true;
  }
  return false;
}

int HierarchyTree::depth(int f) const {
  int d = 0;
  while (parent[f] != 0) {
    f = parent[f];
    ++d;
  }
  return d;
}

int HierarchyTree::max_leaf_depth() const {
  int best = 0;
  for (int v = 1; v <= n_factors(); ++v) {
    best = std::max(best, depth(v));
  }
  return best;
}

HierarchyTree make_tree(const std::vector<std::pair<int, int>>& edges) {
  if (edges.empty()) throw MalformedTreeError("empty tree");
  int max_id = 0;
  for (const auto& [child, parent] : edges) {
    max_id = std::max({max_id, child, parent});
  }
  HierarchyTree tree;
  tree.parent.assign(max_id + 1, -1);
  for (const auto& [child, parent] : edges) {
    if (child < 1 || child > max_id || parent < 0 || parent > max_id || child == parent) {
      throw MalformedTreeError("bad edge in hierarchy");
    }
    if (tree.parent[child] != -1) {
      throw MalformedTreeError("factor listed with two parents");
    }
    tree.parent[child] = parent;
  }
  for (int v = 1; v <= max_id; ++v) {
    if (tree.parent[v] == -1) throw MalformedTreeError("factor with no parent entry");
  }
  if (tree.parent[1] != 0) throw MalformedTreeError("factor 1 must be the root");
  for (int v = 2; v <= max_id; ++v) {
    if (tree.parent[v] == 0) throw MalformedTreeError("more than one root");
    // walk to the root; a cycle never reaches it
    int steps = 0;
    int u = v;
    while (u != 1) {
      u = tree.parent[u];
      if (u <= 0 || ++steps > max_id) throw MalformedTreeError("cycle in hierarchy");
    }
  }
  return tree;
}

HierarchyTree two_layer_tree(int n_groups) {
  std::vector<std::pair<int, int>> edges{{1, 0}};
  for (int g = 0; g < n_groups; ++g) edges.push_back({2 + g, 1});
  return make_tree(edges);
}

namespace {

// Canonical form of the subtree rooted at v: isomorphic subtrees get equal
// strings.
std::string canon(const HierarchyTree& tree, int v) {
  std::vector<std::string> parts;
  for (int c : tree.children(v)) parts.push_back(canon(tree, c));
  std::sort(parts.begin(), parts.end());
  std::string out = "(";
  for (const auto& p : parts) out += p;
  out += ")";
  return out;
}

using Mapping = std::vector<std::pair<int, int>>;  // (from, to) factor ids

// All isomorphisms of subtree(v) onto subtree(w); empty unless the two are
// isomorphic. Each result includes the pair (v, w) itself.
std::vector<Mapping> subtree_maps(const HierarchyTree& tree, int v, int w) {
  if (canon(tree, v) != canon(tree, w)) return {};
  const auto cv = tree.children(v);
  const auto cw = tree.children(w);
  std::vector<Mapping> out;
  std::vector<char> used(cw.size(), 0);
  Mapping current{{v, w}};
  std::function<void(size_t)> assign = [&](size_t i) {
    if (i == cv.size()) {
      out.push_back(current);
      return;
    }
    for (size_t j = 0; j < cw.size(); ++j) {
      if (used[j]) continue;
      auto subs = subtree_maps(tree, cv[i], cw[j]);
      if (subs.empty()) continue;
      used[j] = 1;
      const size_t mark = current.size();
      for (const auto& sub : subs) {
        current.insert(current.end(), sub.begin(), sub.end());
        assign(i + 1);
        current.resize(mark);
      }
      used[j] = 0;
    }
  };
  assign(0);
  return out;
}

}  // namespace

std::vector<std::vector<int>> tree_automorphisms(const HierarchyTree& tree) {
  const int K = tree.n_factors();
  std::vector<std::vector<int>> perms;
  for (const auto& mapping : subtree_maps(tree, 1, 1)) {
    std::vector<int> perm(K + 1, 0);
    for (const auto& [from, to] : mapping) perm[from] = to;
    perms.push_back(std::move(perm));
  }
  std::sort(perms.begin(), perms.end());
  perms.erase(std::unique(perms.begin(), perms.end()), perms.end());
  std::vector<int> ident(K + 1);
  for (int v = 0; v <= K; ++v) ident[v] = v;
  auto it = std::find(perms.begin(), perms.end(), ident);
  if (it != perms.end()) std::iter_swap(perms.begin(), it);
  return perms;
}

bool is_valid_correlation_matrix(const MatrixXd& phi, double tol) {
  if (phi.rows() != phi.cols()) return false;
  if ((phi.diagonal().array() - 1.0).abs().maxCoeff() > tol) return false;
  if ((phi - phi.transpose()).cwiseAbs().maxCoeff() > tol) return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(phi, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() > 0.0;
}

}  // namespace bifactor
