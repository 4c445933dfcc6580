#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "facepipe/core.hpp"

namespace facepipe {

/// Incremental 2-d tree over points with integer payloads.
class KdTree2 {
 public:
  void insert(const Point2& p, int id);
  std::size_t size() const { return size_; }

  /// Closest point; ties resolved toward the earlier insertion.
  std::optional<int> nearest(const Point2& q) const;
  /// Whether any point lies within `radius` (inclusive) of q.
  bool any_within(const Point2& q, double radius) const;
  /// Ids of all points within `radius` (inclusive), in insertion order.
  std::vector<int> within(const Point2& q, double radius) const;

 private:
  struct Node {
    Point2 p;
    int id;
    int order;
    int axis;
    std::unique_ptr<Node> left;
    std::unique_ptr<Node> right;
  };

  std::unique_ptr<Node> root_;
  std::size_t size_ = 0;
};

}  // namespace facepipe
