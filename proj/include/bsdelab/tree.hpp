#ifndef BSDELAB_TREE_HPP
#define BSDELAB_TREE_HPP

#include <cstdint>
#include <memory>
#include <vector>

namespace bsdelab {

using NodeId = std::int32_t;

class FilteredSpace;
using SpacePtr = std::shared_ptr<const FilteredSpace>;
SpacePtr make_chain_space(double T, int steps);

// A finite filtered probability space: a scenario tree over a fixed time grid
// 0 = t_0 < t_1 < ... < t_K = T. The filtration at t_k is generated by the
// slice-k node the path sits in; the root sigma-field is trivial. All
// conditional expectations on this space are exact finite sums, which is what
// makes every identity in the solvers assertable instead of approximate.
//
// Immutable after construction; concurrent reads are safe.
class FilteredSpace {
public:
    struct Node {
        NodeId parent = -1;                 // -1 for the root
        std::int32_t time_idx = 0;
        double trans_prob = 1.0;            // one-step probability given the parent
        double prob = 1.0;                  // unconditional path probability
        std::vector<NodeId> children;
    };

    // Hard guardrail: exact enumeration must stay desk-scale.
    static constexpr std::size_t kMaxNodes = 1'000'000;

    const std::vector<double>& time_grid() const { return time_grid_; }
    double horizon() const { return time_grid_.back(); }
    int n_steps() const { return static_cast<int>(time_grid_.size()) - 1; }
    std::size_t n_nodes() const { return nodes_.size(); }

    const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
    NodeId root() const { return 0; }
    double time_of(NodeId id) const { return time_grid_[static_cast<std::size_t>(node(id).time_idx)]; }
    bool is_terminal(NodeId id) const { return node(id).time_idx == n_steps(); }

    // node ids at a given time index, in id order
    const std::vector<NodeId>& slice(int time_idx) const {
        return slices_[static_cast<std::size_t>(time_idx)];
    }
    const std::vector<NodeId>& leaves() const { return slices_.back(); }

    // time-grid increment of the step starting at this (non-terminal) node
    double dt(NodeId id) const {
        const int k = node(id).time_idx;
        return time_grid_[static_cast<std::size_t>(k) + 1] - time_grid_[static_cast<std::size_t>(k)];
    }

private:
    friend class TreeBuilder;
    friend FilteredSpace space_from_parts(std::vector<double>, std::vector<Node>);
    friend SpacePtr make_chain_space(double T, int steps);
    std::vector<double> time_grid_;
    std::vector<Node> nodes_;
    std::vector<std::vector<NodeId>> slices_;
};


// Incremental constructor. Usage:
//   TreeBuilder b(grid);            // implicitly creates the root
//   NodeId c = b.add_child(parent, trans_prob);
//   SpacePtr sp = b.build();        // validates all invariants
//
// build() checks: strictly increasing grid starting at 0; positive transition
// probabilities summing to 1 (+-1e-9, then renormalized exactly); >= 2
// children on every non-terminal node; no children on terminal nodes; node
// count below the guardrail; slice probability sums equal to 1 (+-1e-12).
class TreeBuilder {
public:
    explicit TreeBuilder(std::vector<double> time_grid);

    NodeId add_child(NodeId parent, double trans_prob);
    std::size_t n_nodes() const { return nodes_.size(); }
    const FilteredSpace::Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }

    SpacePtr build();

private:
    std::vector<double> time_grid_;
    std::vector<FilteredSpace::Node> nodes_;
    bool built_ = false;
};

// Reassemble a space from deserialized parts (ids must be dense, node 0 the
// root, children lists consistent with parents). Shares build() validation.
FilteredSpace space_from_parts(std::vector<double> time_grid,
                               std::vector<FilteredSpace::Node> nodes);

// Uniform grid 0..T with `steps` steps and constant branching with equal
// child probabilities.
SpacePtr make_uniform_space(double T, int steps, int branching);

// Single-path space (one node per slice, trivial filtration). The one
// construction exempt from the >= 2 children rule; meant for deterministic
// refinement studies, where branching adds nodes but no information.
SpacePtr make_chain_space(double T, int steps);

}  // namespace bsdelab

#endif
