#include "rangeloc/graph.hpp"

#include <algorithm>
#include <string>

#include "overloaded.hpp"
#include "rangeloc/errors.hpp"

namespace rangeloc {

namespace {

std::string id_str(NodeId id) { return std::to_string(id.index); }

}  // namespace

FactorKind kind_of(const Edge& edge) {
  return std::visit(Overloaded{
                        [](const RangeEdge&) { return FactorKind::Range; },
                        [](const SmoothnessEdge&) { return FactorKind::Smoothness; },
                        [](const RelTranslationEdge&) { return FactorKind::RelTranslation; },
                        [](const RelRotationEdge&) { return FactorKind::RelRotation; },
                        [](const RelTransformEdge&) { return FactorKind::RelTransform; },
                        [](const PoseSmoothnessEdge&) { return FactorKind::PoseSmoothness; },
                    },
                    edge);
}

std::vector<NodeId> nodes_of(const Edge& edge) {
  return std::visit(Overloaded{
                        [](const RangeEdge& e) { return std::vector<NodeId>{e.node}; },
                        [](const SmoothnessEdge& e) { return std::vector<NodeId>{e.prev, e.curr}; },
                        [](const RelTranslationEdge& e) { return std::vector<NodeId>{e.i, e.j}; },
                        [](const RelRotationEdge& e) { return std::vector<NodeId>{e.i, e.j}; },
                        [](const RelTransformEdge& e) { return std::vector<NodeId>{e.i, e.j}; },
                        [](const PoseSmoothnessEdge& e) { return std::vector<NodeId>{e.prev, e.curr}; },
                    },
                    edge);
}

void FactorGraph::insert_node(GraphNode node) {
  auto pos = std::lower_bound(nodes_.begin(), nodes_.end(), node.id,
                              [](const GraphNode& n, NodeId id) { return n.id < id; });
  if (pos != nodes_.end() && pos->id == node.id) {
    throw GraphError("add_node: duplicate node id " + id_str(node.id));
  }
  if (!node.fixed) {
    free_ids_.insert(std::lower_bound(free_ids_.begin(), free_ids_.end(), node.id), node.id);
  }
  nodes_.insert(pos, std::move(node));
}

void FactorGraph::add_node(NodeId id, const Vec3& initial) {
  insert_node(GraphNode{id, false, Pose{Mat3::Identity(), initial}});
}

void FactorGraph::add_node(NodeId id, const Pose& initial) {
  if (mode_ == GraphMode::Translation && !initial.R.isIdentity(0.0)) {
    throw GraphError("add_node: translation graphs do not carry rotations");
  }
  insert_node(GraphNode{id, false, initial});
}

void FactorGraph::add_fixed_node(NodeId id, const Vec3& value) {
  insert_node(GraphNode{id, true, Pose{Mat3::Identity(), value}});
}

void FactorGraph::add_fixed_node(NodeId id, const Pose& value) {
  insert_node(GraphNode{id, true, value});
}

const GraphNode* FactorGraph::find(NodeId id) const {
  auto pos = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                              [](const GraphNode& n, NodeId key) { return n.id < key; });
  if (pos == nodes_.end() || pos->id != id) return nullptr;
  return &*pos;
}

std::optional<std::size_t> FactorGraph::slot_of(NodeId id) const {
  auto pos = std::lower_bound(free_ids_.begin(), free_ids_.end(), id);
  if (pos == free_ids_.end() || *pos != id) return std::nullopt;
  return static_cast<std::size_t>(pos - free_ids_.begin());
}

void FactorGraph::add_factor(Edge edge) {
  const FactorKind kind = kind_of(edge);
  if (mode_ == GraphMode::Translation &&
      (kind == FactorKind::RelRotation || kind == FactorKind::RelTransform ||
       kind == FactorKind::PoseSmoothness)) {
    throw GraphError("add_factor: rotation-dependent edge in a translation graph");
  }
  const auto ids = nodes_of(edge);
  for (NodeId id : ids) {
    if (find(id) == nullptr) {
      throw GraphError("add_factor: edge references missing node " + id_str(id));
    }
  }
  if (kind == FactorKind::Smoothness || kind == FactorKind::PoseSmoothness) {
    // Consecutive in node (time) order.
    const auto first = std::lower_bound(nodes_.begin(), nodes_.end(), ids[0],
                                        [](const GraphNode& n, NodeId key) { return n.id < key; });
    const auto second = std::next(first);
    if (second == nodes_.end() || second->id != ids[1]) {
      throw GraphError("add_factor: smoothness edge must join consecutive nodes");
    }
  }
  if (ids.size() == 2 && ids[0] == ids[1]) {
    throw GraphError("add_factor: self-loop edge");
  }
  edges_.push_back(std::move(edge));
}

bool FactorGraph::is_chain() const {
  for (const Edge& edge : edges_) {
    const auto ids = nodes_of(edge);
    if (ids.size() < 2) continue;
    const auto a = slot_of(ids[0]);
    const auto b = slot_of(ids[1]);
    if (a && b && (*a > *b ? *a - *b : *b - *a) > 1) return false;
  }
  return true;
}

TranslationState FactorGraph::initial_translations() const {
  TranslationState x(3 * num_free());
  for (const GraphNode& n : nodes_) {
    if (auto s = slot_of(n.id)) x.segment<3>(3 * *s) = n.value.t;
  }
  return x;
}

PoseState FactorGraph::initial_poses() const {
  PoseState x(num_free());
  for (const GraphNode& n : nodes_) {
    if (auto s = slot_of(n.id)) x[*s] = n.value;
  }
  return x;
}

Vec3 extract_state(const TranslationState& x, std::size_t slot) {
  if (3 * slot + 3 > static_cast<std::size_t>(x.size())) {
    throw GraphError("extract_state: slot " + std::to_string(slot) + " out of range");
  }
  return x.segment<3>(3 * slot);
}

void set_state(TranslationState& x, std::size_t slot, const Vec3& value) {
  if (3 * slot + 3 > static_cast<std::size_t>(x.size())) {
    throw GraphError("set_state: slot " + std::to_string(slot) + " out of range");
  }
  x.segment<3>(3 * slot) = value;
}

namespace {

Pose node_pose(const FactorGraph& g, NodeId id, const TranslationState& x) {
  if (auto s = g.slot_of(id)) return Pose{Mat3::Identity(), x.segment<3>(3 * *s)};
  return g.find(id)->value;
}

Pose node_pose(const FactorGraph& g, NodeId id, const PoseState& x) {
  if (auto s = g.slot_of(id)) return x[*s];
  return g.find(id)->value;
}

template <typename State>
double edge_cost_impl(const FactorGraph& g, const Edge& edge, const State& x) {
  auto pose = [&](NodeId id) { return node_pose(g, id, x); };
  return std::visit(
      Overloaded{
          [&](const RangeEdge& e) {
            const double dist = (pose(e.node).t - e.factor.anchor).norm();
            return scalar_cost(e.factor.w_r, e.factor.d - dist, e.factor.loss);
          },
          [&](const SmoothnessEdge& e) {
            const double s = smoothness_residual(pose(e.curr).t, pose(e.prev).t);
            return scalar_cost(e.factor.w_s, s, e.factor.loss);
          },
          [&](const RelTranslationEdge& e) {
            const Vec3 r = rel_translation_residual(pose(e.i).t, pose(e.j).t, e.factor);
            return mahalanobis_cost(r, e.factor.W, e.factor.loss);
          },
          [&](const RelRotationEdge& e) {
            const Vec3 r = rel_rotation_residual(pose(e.i).R, pose(e.j).R, e.factor);
            return mahalanobis_cost(r, e.factor.W, e.factor.loss);
          },
          [&](const RelTransformEdge& e) {
            const Vec6 r = rel_transform_residual(pose(e.i), pose(e.j), e.factor);
            return mahalanobis_cost(r, e.factor.W, e.factor.loss);
          },
          [&](const PoseSmoothnessEdge& e) {
            const Vec6 r = pose_smoothness_residual(pose(e.curr), pose(e.prev), e.factor);
            return mahalanobis_cost(r, e.factor.W, e.factor.loss);
          },
      },
      edge);
}

}  // namespace

double edge_cost(const FactorGraph& g, const Edge& edge, const TranslationState& x) {
  return edge_cost_impl(g, edge, x);
}

double edge_cost(const FactorGraph& g, const Edge& edge, const PoseState& x) {
  return edge_cost_impl(g, edge, x);
}

double total_cost(const FactorGraph& g, const TranslationState& x) {
  if (g.mode() != GraphMode::Translation) {
    throw GraphError("total_cost: translation state passed to a pose graph");
  }
  if (static_cast<std::size_t>(x.size()) != g.state_dimension()) {
    throw GraphError("total_cost: state dimension " + std::to_string(x.size()) + " != " +
                     std::to_string(g.state_dimension()));
  }
  double sum = 0.0;
  for (const Edge& e : g.edges()) sum += edge_cost_impl(g, e, x);
  return sum;
}

double total_cost(const FactorGraph& g, const PoseState& x) {
  if (x.size() != g.num_free()) {
    throw GraphError("total_cost: pose state has " + std::to_string(x.size()) + " poses, graph has " +
                     std::to_string(g.num_free()) + " free nodes");
  }
  double sum = 0.0;
  for (const Edge& e : g.edges()) sum += edge_cost_impl(g, e, x);
  return sum;
}

}  // namespace rangeloc
