#include "bsdelab/serialize.hpp"

#include <json.hpp>
#include <stdexcept>

namespace bsdelab {

using nlohmann::json;

std::string serialize_space(const FilteredSpace& sp) {
    json j;
    j["time_grid"] = sp.time_grid();
    json nodes = json::array();
    for (std::size_t id = 0; id < sp.n_nodes(); ++id) {
        const auto& nd = sp.node(static_cast<NodeId>(id));
        json n;
        n["id"] = id;
        n["parent"] = nd.parent;
        n["time_idx"] = nd.time_idx;
        n["prob"] = nd.trans_prob;
        n["children"] = nd.children;
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    return j.dump();
}

FilteredSpace deserialize_space(const std::string& text) {
    const json j = json::parse(text);
    std::vector<double> grid = j.at("time_grid").get<std::vector<double>>();
    const json& jn = j.at("nodes");
    std::vector<FilteredSpace::Node> nodes(jn.size());
    for (const json& n : jn) {
        const auto id = n.at("id").get<std::size_t>();
        if (id >= nodes.size()) throw std::invalid_argument("deserialize_space: ids must be dense");
        FilteredSpace::Node& nd = nodes[id];
        nd.parent = n.at("parent").get<NodeId>();
        nd.time_idx = n.at("time_idx").get<std::int32_t>();
        nd.trans_prob = n.at("prob").get<double>();
        nd.children = n.at("children").get<std::vector<NodeId>>();
    }
    // children lists must agree with the parent links
    for (std::size_t id = 0; id < nodes.size(); ++id)
        for (NodeId c : nodes[id].children)
            if (c < 0 || static_cast<std::size_t>(c) >= nodes.size() ||
                nodes[static_cast<std::size_t>(c)].parent != static_cast<NodeId>(id))
                throw std::invalid_argument("deserialize_space: children/parent mismatch");
    return space_from_parts(std::move(grid), std::move(nodes));
}

std::string serialize_process(const ScalarAdapted& x) {
    json j;
    for (std::size_t id = 0; id < x.space().n_nodes(); ++id)
        j[std::to_string(id)] = x[static_cast<NodeId>(id)];
    return j.dump();
}

std::string serialize_process(const VecPredictable& x) {
    const FilteredSpace& sp = x.space();
    json j;
    for (int k = 0; k < sp.n_steps(); ++k)
        for (NodeId id : sp.slice(k)) j[std::to_string(id)] = x[id].raw();
    return j.dump();
}

ScalarAdapted deserialize_scalar_process(const SpacePtr& sp, const std::string& text) {
    const json j = json::parse(text);
    ScalarAdapted x(sp, 0.0);
    for (auto it = j.begin(); it != j.end(); ++it)
        x[static_cast<NodeId>(std::stol(it.key()))] = it.value().get<double>();
    return x;
}

}  // namespace bsdelab
