#pragma once

#include <numeric>
#include <vector>

namespace crules {

// Disjoint-set union with path compression and union by size; size ties are
// broken toward the smaller root index so merge results are deterministic.
class Dsu {
public:
  explicit Dsu(int n) : parent_(static_cast<std::size_t>(n)), size_(static_cast<std::size_t>(n), 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    int root = x;
    while (parent_[static_cast<std::size_t>(root)] != root) root = parent_[static_cast<std::size_t>(root)];
    while (parent_[static_cast<std::size_t>(x)] != root) {
      const int next = parent_[static_cast<std::size_t>(x)];
      parent_[static_cast<std::size_t>(x)] = root;
      x = next;
    }
    return root;
  }

  bool same(int a, int b) { return find(a) == find(b); }

  // Returns false when a and b are already in one set.
  bool merge(int a, int b) {
    int ra = find(a);
    int rb = find(b);
    if (ra == rb) return false;
    const auto sa = size_[static_cast<std::size_t>(ra)];
    const auto sb = size_[static_cast<std::size_t>(rb)];
    if (sa < sb || (sa == sb && rb < ra)) std::swap(ra, rb);
    parent_[static_cast<std::size_t>(rb)] = ra;
    size_[static_cast<std::size_t>(ra)] = sa + sb;
    return true;
  }

private:
  std::vector<int> parent_;
  std::vector<int> size_;
};

}  // namespace crules
