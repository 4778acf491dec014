#pragma once

#include <span>
#include <vector>

#include "framekit/descriptor.hpp"
#include "framekit/kdtree.hpp"

namespace framekit {

/// Exact nearest-neighbor index over one agent's place-descriptor stack.
class DescriptorIndex {
 public:
  explicit DescriptorIndex(std::span<const PlaceDescriptor> stack);

  [[nodiscard]] std::size_t source_count() const { return tree_.size(); }
  [[nodiscard]] Neighbor nearest(const PlaceDescriptor& q) const { return tree_.nearest(q.values); }
  [[nodiscard]] std::vector<Neighbor> knn(const PlaceDescriptor& q, std::size_t k) const {
    return tree_.knn(q.values, k);
  }

 private:
  KdTree<double, kDescriptorSize> tree_;
};

struct OverlapMatch {
  std::size_t k_i = 0;  ///< index into the indexed (agent-1) stack
  std::size_t k_j = 0;  ///< index into the query (agent-2) stack
  double distance = 0.0;
};

/// Throws std::invalid_argument on an empty stack.
DescriptorIndex build_index(std::span<const PlaceDescriptor> stack);

/// Globally closest (k_i, k_j) pair; ties go to the smallest k_i, then the smallest k_j.
OverlapMatch find_overlap(const DescriptorIndex& index, std::span<const PlaceDescriptor> query_stack);

/// The `k` best pairs under the same ordering, for diagnostics.
std::vector<OverlapMatch> find_overlap_top_k(const DescriptorIndex& index,
                                             std::span<const PlaceDescriptor> query_stack, std::size_t k);

}  // namespace framekit
