#pragma once

#include <algorithm>
#include <queue>
#include <set>
#include <vector>

namespace idgraph {

// One square solvable subsystem: parents[i] is matched to children[i], the
// block's equations (children) reference no unknown parent outside the block
// once earlier blocks have been solved.
struct SolvableBlock {
  std::vector<int> parents;
  std::vector<int> children;
};

// Result of analysing the bipartite graph of unknown parents (variables)
// against known deterministic children (equations).
struct BipartiteAnalysis {
  std::vector<int> match_of_parent;  // parent -> child, -1 if unmatched
  std::vector<int> match_of_child;   // child -> parent, -1 if unmatched
  std::vector<char> parent_free;     // underdetermined side, not solvable
  // Solvable blocks in firing order: a block only references parents from
  // itself or earlier blocks.
  std::vector<SolvableBlock> blocks;
  // (children, parents) groups where more equations cover the parents than
  // needed; redundant data worth a consistency check.
  std::vector<std::pair<std::vector<int>, std::vector<int>>> overdetermined;
};

// Kuhn's augmenting-path maximum matching plus a Dulmage-Mendelsohn style
// split: parents alternating-reachable from an unmatched parent are
// underdetermined (free); everything else is uniquely solvable and is
// decomposed into square blocks (the overdetermined tail first, then the
// strongly connected components of the square core in dependency order).
//
// adj[p] lists the children adjacent to parent p, sorted ascending, which
// fixes every tie-break.
inline BipartiteAnalysis analyze_bipartite(
    int n_parents, int n_children, const std::vector<std::vector<int>>& adj) {
  BipartiteAnalysis res;
  res.match_of_parent.assign(n_parents, -1);
  res.match_of_child.assign(n_children, -1);

  std::vector<char> visited(n_children, 0);
  auto try_augment = [&](auto&& self, int p) -> bool {
    for (int c : adj[p]) {
      if (visited[c]) continue;
      visited[c] = 1;
      if (res.match_of_child[c] == -1 || self(self, res.match_of_child[c])) {
        res.match_of_child[c] = p;
        res.match_of_parent[p] = c;
        return true;
      }
    }
    return false;
  };
  for (int p = 0; p < n_parents; ++p) {
    std::fill(visited.begin(), visited.end(), 0);
    try_augment(try_augment, p);
  }

  std::vector<std::vector<int>> children_of(n_children);
  for (int p = 0; p < n_parents; ++p)
    for (int c : adj[p]) children_of[c].push_back(p);

  // Free (underdetermined) part: alternating reachability from unmatched
  // parents, parent --any edge--> child --matching edge--> parent.
  res.parent_free.assign(n_parents, 0);
  std::vector<char> child_free(n_children, 0);
  {
    std::queue<int> q;
    for (int p = 0; p < n_parents; ++p)
      if (res.match_of_parent[p] == -1) {
        res.parent_free[p] = 1;
        q.push(p);
      }
    while (!q.empty()) {
      int p = q.front();
      q.pop();
      for (int c : adj[p]) {
        if (child_free[c]) continue;
        child_free[c] = 1;
        int p2 = res.match_of_child[c];
        if (p2 != -1 && !res.parent_free[p2]) {
          res.parent_free[p2] = 1;
          q.push(p2);
        }
      }
    }
  }

  // Overdetermined part: alternating reachability from unmatched children,
  // child --any edge--> parent --matching edge--> child.
  std::vector<char> parent_vert(n_parents, 0), child_vert(n_children, 0);
  {
    std::queue<int> q;
    for (int c = 0; c < n_children; ++c)
      if (res.match_of_child[c] == -1) {
        child_vert[c] = 1;
        q.push(c);
      }
    while (!q.empty()) {
      int c = q.front();
      q.pop();
      for (int p : children_of[c]) {
        if (parent_vert[p]) continue;
        parent_vert[p] = 1;
        int c2 = res.match_of_parent[p];
        if (c2 != -1 && !child_vert[c2]) {
          child_vert[c2] = 1;
          q.push(c2);
        }
      }
    }
  }

  // The overdetermined tail is closed (its children touch no outside
  // parents), so it fires first as one block on the matched pairs.
  if (std::count(child_vert.begin(), child_vert.end(), 1) > 0) {
    SolvableBlock tail;
    std::vector<int> tail_children;
    for (int p = 0; p < n_parents; ++p)
      if (parent_vert[p]) {
        tail.parents.push_back(p);
        tail.children.push_back(res.match_of_parent[p]);
      }
    for (int c = 0; c < n_children; ++c)
      if (child_vert[c]) tail_children.push_back(c);
    if (!tail.parents.empty()) {
      res.overdetermined.push_back({tail_children, tail.parents});
      res.blocks.push_back(std::move(tail));
    }
  }

  // Square core: SCCs of the dependency graph on matched pairs. Pair(p)
  // depends on pair(p2) when p's matched equation also references p2.
  std::vector<int> core;  // parents in the square core
  std::vector<int> core_index(n_parents, -1);
  for (int p = 0; p < n_parents; ++p)
    if (!res.parent_free[p] && !parent_vert[p]) {
      core_index[p] = static_cast<int>(core.size());
      core.push_back(p);
    }
  int n = static_cast<int>(core.size());
  if (n == 0) return res;

  // deps[i] -> j: parent core[i] must be solved before core[j].
  std::vector<std::vector<int>> deps(n);
  for (int j = 0; j < n; ++j) {
    int eq = res.match_of_parent[core[j]];
    for (int p : children_of[eq]) {
      if (p == core[j]) continue;
      if (core_index[p] != -1) deps[core_index[p]].push_back(j);
    }
  }

  // Tarjan SCC, iterative over small graphs is unnecessary; recursion depth
  // is bounded by the core size (diagrams here are small).
  std::vector<int> low(n, -1), num(n, -1), comp(n, -1);
  std::vector<int> stack;
  std::vector<char> on_stack(n, 0);
  int counter = 0, n_comp = 0;
  auto strongconnect = [&](auto&& self, int v) -> void {
    num[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = 1;
    for (int w : deps[v]) {
      if (num[w] == -1) {
        self(self, w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], num[w]);
      }
    }
    if (low[v] == num[v]) {
      while (true) {
        int w = stack.back();
        stack.pop_back();
        on_stack[w] = 0;
        comp[w] = n_comp;
        if (w == v) break;
      }
      ++n_comp;
    }
  };
  for (int v = 0; v < n; ++v)
    if (num[v] == -1) strongconnect(strongconnect, v);

  // Order components by dependency (Kahn over the condensation, smallest
  // component id first for determinism).
  std::vector<std::vector<int>> members(n_comp);
  for (int v = 0; v < n; ++v) members[comp[v]].push_back(v);
  std::vector<std::set<int>> cdeps(n_comp);
  std::vector<int> indeg(n_comp, 0);
  for (int v = 0; v < n; ++v)
    for (int w : deps[v])
      if (comp[v] != comp[w] && cdeps[comp[v]].insert(comp[w]).second)
        ++indeg[comp[w]];
  std::set<int> ready;
  for (int c = 0; c < n_comp; ++c)
    if (indeg[c] == 0) ready.insert(c);
  while (!ready.empty()) {
    int c = *ready.begin();
    ready.erase(ready.begin());
    SolvableBlock block;
    for (int v : members[c]) {
      block.parents.push_back(core[v]);
      block.children.push_back(res.match_of_parent[core[v]]);
    }
    res.blocks.push_back(std::move(block));
    for (int w : cdeps[c])
      if (--indeg[w] == 0) ready.insert(w);
  }
  return res;
}

}  // namespace idgraph
