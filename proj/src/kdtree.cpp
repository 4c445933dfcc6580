#include "facepipe/kdtree.hpp"

#include <algorithm>
#include <limits>

namespace facepipe {
namespace {

double coord(const Point2& p, int axis) { return axis == 0 ? p.x : p.y; }

double dist2(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace

void KdTree2::insert(const Point2& p, int id) {
  const int order = static_cast<int>(size_++);
  std::unique_ptr<Node>* slot = &root_;
  int axis = 0;
  while (*slot) {
    Node& n = **slot;
    slot = coord(p, n.axis) < coord(n.p, n.axis) ? &n.left : &n.right;
    axis = 1 - n.axis;
  }
  *slot = std::make_unique<Node>(Node{p, id, order, axis, nullptr, nullptr});
}

std::optional<int> KdTree2::nearest(const Point2& q) const {
  const Node* best = nullptr;
  double best_d2 = std::numeric_limits<double>::infinity();
  auto visit = [&](auto&& self, const Node* n) -> void {
    if (!n) return;
    const double d2 = dist2(q, n->p);
    if (d2 < best_d2 || (d2 == best_d2 && best && n->order < best->order)) {
      best = n;
      best_d2 = d2;
    }
    const double delta = coord(q, n->axis) - coord(n->p, n->axis);
    const Node* near = delta < 0 ? n->left.get() : n->right.get();
    const Node* far = delta < 0 ? n->right.get() : n->left.get();
    self(self, near);
    if (delta * delta <= best_d2) self(self, far);
  };
  visit(visit, root_.get());
  if (!best) return std::nullopt;
  return best->id;
}

std::vector<int> KdTree2::within(const Point2& q, double radius) const {
  std::vector<std::pair<int, int>> hits;  // (order, id)
  const double r2 = radius * radius;
  auto visit = [&](auto&& self, const Node* n) -> void {
    if (!n) return;
    if (dist2(q, n->p) <= r2) hits.emplace_back(n->order, n->id);
    const double delta = coord(q, n->axis) - coord(n->p, n->axis);
    // Points equal on the split axis go right.
    if (delta < 0 || delta * delta <= r2) self(self, n->left.get());
    if (delta >= 0 || delta * delta <= r2) self(self, n->right.get());
  };
  visit(visit, root_.get());
  std::sort(hits.begin(), hits.end());
  std::vector<int> ids;
  ids.reserve(hits.size());
  for (const auto& h : hits) ids.push_back(h.second);
  return ids;
}

bool KdTree2::any_within(const Point2& q, double radius) const {
  const double r2 = radius * radius;
  auto visit = [&](auto&& self, const Node* n) -> bool {
    if (!n) return false;
    if (dist2(q, n->p) <= r2) return true;
    const double delta = coord(q, n->axis) - coord(n->p, n->axis);
    if ((delta < 0 || delta * delta <= r2) && self(self, n->left.get())) return true;
    return (delta >= 0 || delta * delta <= r2) && self(self, n->right.get());
  };
  return visit(visit, root_.get());
}

}  // namespace facepipe
