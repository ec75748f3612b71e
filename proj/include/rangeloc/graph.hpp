// Position / pose graph: nodes are robot states (optionally fixed), edges
// are constraints from the factors module.

#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "rangeloc/factors.hpp"
#include "rangeloc/lie.hpp"

namespace rangeloc {

struct NodeId {
  std::size_t index = 0;
  auto operator<=>(const NodeId&) const = default;
};

enum class GraphMode { Translation, Pose };

enum class FactorKind {
  Range,
  Smoothness,
  RelTranslation,
  RelRotation,
  RelTransform,
  PoseSmoothness,
};

struct RangeEdge {
  NodeId node;
  RangeFactor factor;
};

/// Connects two states that are adjacent in time.
struct SmoothnessEdge {
  NodeId prev;
  NodeId curr;
  SmoothnessFactor factor;
};

struct RelTranslationEdge {
  NodeId i;
  NodeId j;
  RelTranslationFactor factor;
};

struct RelRotationEdge {
  NodeId i;
  NodeId j;
  RelRotationFactor factor;
};

struct RelTransformEdge {
  NodeId i;
  NodeId j;
  RelTransformFactor factor;
};

struct PoseSmoothnessEdge {
  NodeId prev;
  NodeId curr;
  PoseSmoothnessFactor factor;
};

using Edge = std::variant<RangeEdge, SmoothnessEdge, RelTranslationEdge, RelRotationEdge,
                          RelTransformEdge, PoseSmoothnessEdge>;

FactorKind kind_of(const Edge& edge);

/// Node ids referenced by an edge, in (first, second) order.
std::vector<NodeId> nodes_of(const Edge& edge);

/// Stacked translations of the free nodes, 3 entries per node.
using TranslationState = Eigen::VectorXd;
/// Poses of the free nodes.
using PoseState = std::vector<Pose>;

struct GraphNode {
  NodeId id;
  bool fixed = false;
  Pose value;  ///< initial value for free nodes, the known value for fixed ones
};

class FactorGraph {
 public:
  explicit FactorGraph(GraphMode mode = GraphMode::Translation) : mode_(mode) {}

  GraphMode mode() const { return mode_; }

  /// Adds an optimized node. Nodes are kept sorted by id, which is their time order.
  void add_node(NodeId id, const Vec3& initial);
  void add_node(NodeId id, const Pose& initial);

  /// Adds a node with a known state; it is excluded from the optimized vector.
  void add_fixed_node(NodeId id, const Vec3& value);
  void add_fixed_node(NodeId id, const Pose& value);

  void add_factor(Edge edge);

  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::vector<Edge>& mutable_edges() { return edges_; }

  std::size_t num_free() const { return free_ids_.size(); }
  /// 3 per free node in translation mode, 6 in pose mode.
  std::size_t block_size() const { return mode_ == GraphMode::Translation ? 3 : 6; }
  std::size_t state_dimension() const { return block_size() * num_free(); }

  const GraphNode* find(NodeId id) const;
  /// Position of a free node in the state vector, nullopt for fixed nodes.
  std::optional<std::size_t> slot_of(NodeId id) const;

  /// True when every multi-node edge joins free slots at most one apart, so
  /// the Hessian is block-tridiagonal.
  bool is_chain() const;

  TranslationState initial_translations() const;
  PoseState initial_poses() const;

 private:
  void insert_node(GraphNode node);

  GraphMode mode_;
  std::vector<GraphNode> nodes_;
  std::vector<NodeId> free_ids_;  // sorted
  std::vector<Edge> edges_;
};

/// i-th 3-block of a translation state (block indexing instead of the
/// selection matrix A_i).
Vec3 extract_state(const TranslationState& x, std::size_t slot);
void set_state(TranslationState& x, std::size_t slot, const Vec3& value);

/// Cost of a single edge; defined everywhere, including robot-on-anchor.
double edge_cost(const FactorGraph& g, const Edge& edge, const TranslationState& x);
double edge_cost(const FactorGraph& g, const Edge& edge, const PoseState& x);

/// Sum of all edge costs.
double total_cost(const FactorGraph& g, const TranslationState& x);
double total_cost(const FactorGraph& g, const PoseState& x);

}  // namespace rangeloc
