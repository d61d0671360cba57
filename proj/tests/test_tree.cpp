#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsdelab/rng.hpp"
#include "bsdelab/serialize.hpp"
#include "bsdelab/tree.hpp"

using namespace bsdelab;

TEST_CASE("uniform space shape and probabilities") {
    SpacePtr sp = make_uniform_space(1.0, 3, 2);
    CHECK(sp->n_steps() == 3);
    CHECK(sp->n_nodes() == 1 + 2 + 4 + 8);
    CHECK(sp->leaves().size() == 8);
    for (int k = 0; k <= 3; ++k) {
        double sum = 0.0;
        for (NodeId id : sp->slice(k)) sum += sp->node(id).prob;
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
    CHECK(sp->time_of(sp->root()) == 0.0);
    CHECK(sp->horizon() == 1.0);
    CHECK(sp->dt(sp->root()) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("builder validates transition probabilities") {
    TreeBuilder b({0.0, 1.0});
    b.add_child(0, 0.5);
    b.add_child(0, 0.3);  // sums to 0.8
    CHECK_THROWS_AS(b.build(), std::invalid_argument);

    TreeBuilder neg({0.0, 1.0});
    neg.add_child(0, 1.5);
    CHECK_THROWS_AS(neg.add_child(0, -0.5), std::invalid_argument);
}

TEST_CASE("builder renormalizes tiny drift") {
    TreeBuilder b({0.0, 1.0});
    b.add_child(0, 0.5 + 2e-10);
    b.add_child(0, 0.5);
    SpacePtr sp = b.build();
    double sum = 0.0;
    for (NodeId id : sp->leaves()) sum += sp->node(id).trans_prob;
    CHECK(std::fabs(sum - 1.0) < 1e-15);
}

TEST_CASE("non-terminal nodes need two children") {
    TreeBuilder b({0.0, 0.5, 1.0});
    const NodeId c1 = b.add_child(0, 0.5);
    const NodeId c2 = b.add_child(0, 0.5);
    b.add_child(c1, 1.0);  // single child on a non-terminal node
    b.add_child(c2, 0.5);
    b.add_child(c2, 0.5);
    CHECK_THROWS_AS(b.build(), std::invalid_argument);
}

TEST_CASE("chain space is the one sanctioned single-child construction") {
    SpacePtr chain = make_chain_space(1.0, 160);
    CHECK(chain->n_nodes() == 161);
    CHECK(chain->leaves().size() == 1);
    CHECK(chain->node(chain->leaves()[0]).prob == 1.0);
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(TreeBuilder({0.5, 1.0}), std::invalid_argument);   // must start at 0
    CHECK_THROWS_AS(TreeBuilder({0.0, 1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(TreeBuilder({0.0}), std::invalid_argument);
}

TEST_CASE("node guardrail refuses oversized trees") {
    // 2^21 - 1 > 1e6 nodes
    CHECK_THROWS_WITH_AS(make_uniform_space(1.0, 21, 2),
                         doctest::Contains("guardrail"), std::invalid_argument);
}

TEST_CASE("serialization round trip") {
    Rng rng(55);
    TreeBuilder b({0.0, 0.3, 0.7, 1.0});
    std::vector<NodeId> frontier{0};
    for (int k = 0; k < 3; ++k) {
        std::vector<NodeId> next;
        for (NodeId id : frontier) {
            const int kids = rng.uniform_int(2, 3);
            std::vector<double> w(static_cast<std::size_t>(kids));
            double sum = 0.0;
            for (double& x : w) { x = rng.uniform(0.2, 1.0); sum += x; }
            for (double x : w) next.push_back(b.add_child(id, x / sum));
        }
        frontier = std::move(next);
    }
    SpacePtr sp = b.build();

    const std::string text = serialize_space(*sp);
    const FilteredSpace back = deserialize_space(text);
    REQUIRE(back.n_nodes() == sp->n_nodes());
    CHECK(back.time_grid() == sp->time_grid());
    for (std::size_t id = 0; id < sp->n_nodes(); ++id) {
        const auto& a = sp->node(static_cast<NodeId>(id));
        const auto& c = back.node(static_cast<NodeId>(id));
        CHECK(a.parent == c.parent);
        CHECK(a.time_idx == c.time_idx);
        CHECK(a.children == c.children);
        CHECK(a.trans_prob == doctest::Approx(c.trans_prob).epsilon(1e-15));
        CHECK(a.prob == doctest::Approx(c.prob).epsilon(1e-15));
    }

    ScalarAdapted x(sp, 0.0);
    for (std::size_t id = 0; id < sp->n_nodes(); ++id)
        x[static_cast<NodeId>(id)] = rng.uniform(-2.0, 2.0);
    const ScalarAdapted xr = deserialize_scalar_process(sp, serialize_process(x));
    for (std::size_t id = 0; id < sp->n_nodes(); ++id)
        CHECK(xr[static_cast<NodeId>(id)] == x[static_cast<NodeId>(id)]);
}

TEST_CASE("golden serialized form of a minimal tree") {
    TreeBuilder b({0.0, 1.0});
    b.add_child(0, 0.25);
    b.add_child(0, 0.75);
    SpacePtr sp = b.build();
    CHECK(serialize_space(*sp) ==
          "{\"nodes\":[{\"children\":[1,2],\"id\":0,\"parent\":-1,\"prob\":1.0,"
          "\"time_idx\":0},{\"children\":[],\"id\":1,\"parent\":0,\"prob\":0.25,"
          "\"time_idx\":1},{\"children\":[],\"id\":2,\"parent\":0,\"prob\":0.75,"
          "\"time_idx\":1}],\"time_grid\":[0.0,1.0]}");

    ScalarAdapted x(sp, 0.0);
    x[1] = 2.5;
    CHECK(serialize_process(x) == "{\"0\":0.0,\"1\":2.5,\"2\":0.0}");
}

TEST_CASE("deserialization rejects inconsistent links") {
    SpacePtr sp = make_uniform_space(1.0, 1, 2);
    std::string text = serialize_space(*sp);
    // corrupt: claim node 2's parent is 1
    const auto pos = text.find("\"parent\":0", text.find("\"id\":2"));
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 10, "\"parent\":1");
    CHECK_THROWS_AS(deserialize_space(text), std::invalid_argument);
}
