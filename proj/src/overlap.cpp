#include "framekit/overlap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace framekit {

namespace {

std::vector<DescriptorVector> to_vectors(std::span<const PlaceDescriptor> stack) {
  if (stack.empty()) throw std::invalid_argument("build_index: empty descriptor stack");
  std::vector<DescriptorVector> out;
  out.reserve(stack.size());
  for (const auto& q : stack) {
    if (!q.values.allFinite()) throw std::invalid_argument("build_index: non-finite descriptor");
    out.push_back(q.values);
  }
  return out;
}

bool match_less(const OverlapMatch& a, const OverlapMatch& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.k_i != b.k_i) return a.k_i < b.k_i;
  return a.k_j < b.k_j;
}

}  // namespace

DescriptorIndex::DescriptorIndex(std::span<const PlaceDescriptor> stack) : tree_(to_vectors(stack), 8) {}

DescriptorIndex build_index(std::span<const PlaceDescriptor> stack) { return DescriptorIndex(stack); }

OverlapMatch find_overlap(const DescriptorIndex& index, std::span<const PlaceDescriptor> query_stack) {
  if (query_stack.empty()) throw std::invalid_argument("find_overlap: empty query stack");
  OverlapMatch best{0, 0, std::numeric_limits<double>::infinity()};
  for (std::size_t j = 0; j < query_stack.size(); ++j) {
    const Neighbor nn = index.nearest(query_stack[j]);
    const OverlapMatch cand{nn.index, j, std::sqrt(nn.squared_distance)};
    if (match_less(cand, best)) best = cand;
  }
  return best;
}

std::vector<OverlapMatch> find_overlap_top_k(const DescriptorIndex& index,
                                             std::span<const PlaceDescriptor> query_stack, std::size_t k) {
  if (query_stack.empty()) throw std::invalid_argument("find_overlap_top_k: empty query stack");
  std::vector<OverlapMatch> all;
  for (std::size_t j = 0; j < query_stack.size(); ++j) {
    for (const auto& nn : index.knn(query_stack[j], k)) all.push_back({nn.index, j, std::sqrt(nn.squared_distance)});
  }
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), match_less);
  all.resize(keep);
  return all;
}

}  // namespace framekit
