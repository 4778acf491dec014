#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace framekit {

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = std::numeric_limits<double>::infinity();

  /// Lexicographic on (distance, index) so that equidistant hits resolve to the lowest index.
  bool operator<(const Neighbor& o) const {
    return squared_distance < o.squared_distance ||
           (squared_distance == o.squared_distance && index < o.index);
  }
};

/// Exact k-d tree over fixed-dimension points. Immutable after construction.
template <typename Scalar, int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<Scalar, Dim, 1>;

  KdTree() = default;

  template <typename Range>
  explicit KdTree(const Range& points, std::size_t leaf_size = 12) : leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    const auto n = static_cast<Eigen::Index>(std::size(points));
    if (n == 0) throw std::invalid_argument("KdTree: empty point set");
    const Eigen::Index dim = Dim == Eigen::Dynamic ? static_cast<Eigen::Index>(std::begin(points)->size()) : Dim;
    data_.resize(dim, n);
    Eigen::Index col = 0;
    for (const auto& p : points) {
      if (p.size() != dim) throw std::invalid_argument("KdTree: inconsistent point dimension");
      data_.col(col++) = p.template cast<Scalar>();
    }
    order_.resize(static_cast<std::size_t>(n));
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    nodes_.reserve(2 * static_cast<std::size_t>(n) / leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(n));
  }

  [[nodiscard]] std::size_t size() const { return order_.size(); }
  [[nodiscard]] bool empty() const { return order_.empty(); }
  [[nodiscard]] auto point(std::size_t i) const { return data_.col(static_cast<Eigen::Index>(i)); }

  [[nodiscard]] Neighbor nearest(const Point& query) const {
    std::vector<Neighbor> best = knn(query, 1);
    return best.front();
  }

  /// The k closest points sorted by (distance, index). Returns fewer when the tree is smaller.
  [[nodiscard]] std::vector<Neighbor> knn(const Point& query, std::size_t k) const {
    std::vector<Neighbor> heap;
    if (k == 0 || empty()) return heap;
    heap.reserve(k + 1);
    search_knn(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  /// All points with squared distance <= radius^2, unsorted.
  [[nodiscard]] std::vector<Neighbor> radius(const Point& query, double radius) const {
    std::vector<Neighbor> out;
    if (empty()) return out;
    search_radius(0, query, radius * radius, out);
    return out;
  }

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    Eigen::Index split_dim = 0;
    Scalar split_value = 0;
    [[nodiscard]] bool leaf() const { return left < 0; }
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= leaf_size_) return id;

    Eigen::Index best_dim = 0;
    Scalar best_spread = -1;
    for (Eigen::Index d = 0; d < data_.rows(); ++d) {
      Scalar lo = std::numeric_limits<Scalar>::max();
      Scalar hi = std::numeric_limits<Scalar>::lowest();
      for (std::uint32_t i = begin; i < end; ++i) {
        const Scalar v = data_(d, order_[i]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = d;
      }
    }
    if (best_spread <= 0) return id;  // all points coincide

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return data_(best_dim, a) < data_(best_dim, b); });
    const Scalar split = data_(best_dim, order_[mid]);

    nodes_[static_cast<std::size_t>(id)].split_dim = best_dim;
    nodes_[static_cast<std::size_t>(id)].split_value = split;
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  double squared_distance(const Point& q, std::uint32_t idx) const {
    return static_cast<double>((data_.col(idx) - q).squaredNorm());
  }

  void search_knn(std::int32_t node_id, const Point& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Neighbor cand{order_[i], squared_distance(q, order_[i])};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = static_cast<double>(q(node.split_dim) - node.split_value);
    const std::int32_t near = diff < 0 ? node.left : node.right;
    const std::int32_t far = diff < 0 ? node.right : node.left;
    search_knn(near, q, k, heap);
    // <= keeps equidistant, lower-index candidates reachable across the split plane.
    if (heap.size() < k || diff * diff <= heap.front().squared_distance) search_knn(far, q, k, heap);
  }

  void search_radius(std::int32_t node_id, const Point& q, double r2, std::vector<Neighbor>& out) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double d2 = squared_distance(q, order_[i]);
        if (d2 <= r2) out.push_back({order_[i], d2});
      }
      return;
    }
    const double diff = static_cast<double>(q(node.split_dim) - node.split_value);
    const std::int32_t near = diff < 0 ? node.left : node.right;
    const std::int32_t far = diff < 0 ? node.right : node.left;
    search_radius(near, q, r2, out);
    if (diff * diff <= r2) search_radius(far, q, r2, out);
  }

  Eigen::Matrix<Scalar, Dim, Eigen::Dynamic> data_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 12;
};

using KdTree3d = KdTree<double, 3>;

}  // namespace framekit
