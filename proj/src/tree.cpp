#include "bsdelab/tree.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bsdelab {

namespace {

void validate_grid(const std::vector<double>& grid) {
    if (grid.size() < 2) throw std::invalid_argument("time grid needs at least two points");
    if (grid.front() != 0.0) throw std::invalid_argument("time grid must start at 0");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (!(grid[i] < grid[i + 1]))
            throw std::invalid_argument("time grid must be strictly increasing");
}

void finalize(std::vector<double>& grid, std::vector<FilteredSpace::Node>& nodes,
              std::vector<std::vector<NodeId>>& slices, bool allow_chain = false) {
    validate_grid(grid);
    if (nodes.empty() || nodes[0].parent != -1)
        throw std::invalid_argument("node 0 must be the root");
    if (nodes.size() > FilteredSpace::kMaxNodes)
        throw std::invalid_argument("tree exceeds the 1e6 node guardrail");

    const int K = static_cast<int>(grid.size()) - 1;
    slices.assign(static_cast<std::size_t>(K) + 1, {});

    for (std::size_t id = 0; id < nodes.size(); ++id) {
        FilteredSpace::Node& nd = nodes[id];
        if (id == 0) {
            if (nd.time_idx != 0) throw std::invalid_argument("root must sit at time index 0");
            nd.trans_prob = 1.0;
        } else {
            if (nd.parent < 0 || static_cast<std::size_t>(nd.parent) >= nodes.size())
                throw std::invalid_argument("node " + std::to_string(id) + ": bad parent");
            if (nd.parent == static_cast<NodeId>(id))
                throw std::invalid_argument("node is its own parent");
            if (nd.time_idx != nodes[static_cast<std::size_t>(nd.parent)].time_idx + 1)
                throw std::invalid_argument("child time index must be parent + 1");
            if (!(nd.trans_prob > 0.0))
                throw std::invalid_argument("transition probabilities must be strictly positive");
        }
        if (nd.time_idx < 0 || nd.time_idx > K)
            throw std::invalid_argument("node time index out of grid range");
        slices[static_cast<std::size_t>(nd.time_idx)].push_back(static_cast<NodeId>(id));
    }

    // renormalization guard on one-step probabilities, then exact path products
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        FilteredSpace::Node& nd = nodes[id];
        const bool terminal = nd.time_idx == K;
        if (terminal) {
            if (!nd.children.empty())
                throw std::invalid_argument("terminal node has children");
            continue;
        }
        if (nd.children.size() < (allow_chain ? std::size_t{1} : std::size_t{2}))
            throw std::invalid_argument("non-terminal node " + std::to_string(id) +
                                        " has fewer than 2 children");
        double sum = 0.0;
        for (NodeId c : nd.children) sum += nodes[static_cast<std::size_t>(c)].trans_prob;
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("transition probabilities at node " + std::to_string(id) +
                                        " sum to " + std::to_string(sum));
        for (NodeId c : nd.children) nodes[static_cast<std::size_t>(c)].trans_prob /= sum;
    }
    nodes[0].prob = 1.0;
    for (int k = 0; k < K; ++k)
        for (NodeId id : slices[static_cast<std::size_t>(k)])
            for (NodeId c : nodes[static_cast<std::size_t>(id)].children)
                nodes[static_cast<std::size_t>(c)].prob =
                    nodes[static_cast<std::size_t>(id)].prob *
                    nodes[static_cast<std::size_t>(c)].trans_prob;

    for (int k = 0; k <= K; ++k) {
        double sum = 0.0;
        for (NodeId id : slices[static_cast<std::size_t>(k)])
            sum += nodes[static_cast<std::size_t>(id)].prob;
        if (std::fabs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("slice " + std::to_string(k) +
                                        " probabilities sum to " + std::to_string(sum));
    }
}

}  // namespace

TreeBuilder::TreeBuilder(std::vector<double> time_grid) : time_grid_(std::move(time_grid)) {
    validate_grid(time_grid_);
    nodes_.push_back({});  // root
}

NodeId TreeBuilder::add_child(NodeId parent, double trans_prob) {
    if (built_) throw std::logic_error("TreeBuilder already consumed");
    if (parent < 0 || static_cast<std::size_t>(parent) >= nodes_.size())
        throw std::invalid_argument("add_child: unknown parent");
    if (nodes_.size() >= FilteredSpace::kMaxNodes)
        throw std::invalid_argument("tree exceeds the 1e6 node guardrail");
    if (!(trans_prob > 0.0))
        throw std::invalid_argument("transition probabilities must be strictly positive");
    FilteredSpace::Node nd;
    nd.parent = parent;
    nd.time_idx = nodes_[static_cast<std::size_t>(parent)].time_idx + 1;
    if (nd.time_idx > static_cast<int>(time_grid_.size()) - 1)
        throw std::invalid_argument("add_child: beyond the terminal slice");
    nd.trans_prob = trans_prob;
    const NodeId id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(nd);
    nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
}

SpacePtr TreeBuilder::build() {
    if (built_) throw std::logic_error("TreeBuilder already consumed");
    built_ = true;
    auto sp = std::make_shared<FilteredSpace>();
    sp->time_grid_ = std::move(time_grid_);
    sp->nodes_ = std::move(nodes_);
    finalize(sp->time_grid_, sp->nodes_, sp->slices_);
    return sp;
}

FilteredSpace space_from_parts(std::vector<double> time_grid,
                               std::vector<FilteredSpace::Node> nodes) {
    FilteredSpace sp;
    sp.time_grid_ = std::move(time_grid);
    sp.nodes_ = std::move(nodes);
    finalize(sp.time_grid_, sp.nodes_, sp.slices_);
    return sp;
}

SpacePtr make_chain_space(double T, int steps) {
    if (steps < 1) throw std::invalid_argument("make_chain_space: steps must be >= 1");
    std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) grid[static_cast<std::size_t>(k)] = T * k / steps;
    validate_grid(grid);
    std::vector<FilteredSpace::Node> nodes(static_cast<std::size_t>(steps) + 1);
    for (int k = 1; k <= steps; ++k) {
        auto& nd = nodes[static_cast<std::size_t>(k)];
        nd.parent = k - 1;
        nd.time_idx = k;
        nd.trans_prob = 1.0;
        nodes[static_cast<std::size_t>(k) - 1].children = {static_cast<NodeId>(k)};
    }
    auto sp = std::make_shared<FilteredSpace>();
    sp->time_grid_ = std::move(grid);
    sp->nodes_ = std::move(nodes);
    finalize(sp->time_grid_, sp->nodes_, sp->slices_, /*allow_chain=*/true);
    return sp;
}

SpacePtr make_uniform_space(double T, int steps, int branching) {
    if (steps < 1 || branching < 2) throw std::invalid_argument("make_uniform_space: bad shape");
    std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) grid[static_cast<std::size_t>(k)] = T * k / steps;
    TreeBuilder b(grid);
    std::vector<NodeId> frontier{0};
    const double p = 1.0 / branching;
    for (int k = 0; k < steps; ++k) {
        std::vector<NodeId> next;
        next.reserve(frontier.size() * static_cast<std::size_t>(branching));
        for (NodeId id : frontier)
            for (int j = 0; j < branching; ++j) next.push_back(b.add_child(id, p));
        frontier = std::move(next);
    }
    return b.build();
}

}  // namespace bsdelab
