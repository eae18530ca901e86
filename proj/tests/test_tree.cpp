#include <doctest.h>

#include <algorithm>
#include <set>

#include "support/random_instances.hpp"
#include "treerate/tree.hpp"

using namespace treerate;

namespace {

Tree star(int m) {
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    for (int i = 1; i <= m; ++i) edges.emplace_back(0, i);
    return Tree::from_edges(edges);
}

Tree complete_binary(int height) {
    int interior = (1 << height) - 1;
    std::vector<int> degrees(static_cast<std::size_t>(interior), 2);
    return Tree::from_level_order_degrees(degrees);
}

}  // namespace

TEST_CASE("star tree: leaves and interior") {
    Tree t = star(4);
    CHECK(t.node_count() == 5);
    CHECK(t.leaf_count() == 4);
    CHECK(t.degree(t.root()) == 4);
    CHECK(t.is_interior(t.root()));
    for (NodeId v : t.leaves()) CHECK(t.parent(v) == t.root());
}

TEST_CASE("complete binary tree of height 3") {
    Tree t = complete_binary(3);
    CHECK(t.node_count() == 15);
    CHECK(t.leaf_count() == 8);
    int interior = 0;
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i))) ++interior;
    CHECK(interior == 7);
    CHECK(t.max_depth() == 3);
}

TEST_CASE("multiple parents are rejected") {
    std::vector<std::pair<std::int64_t, std::int64_t>> edges{{1, 2}, {1, 3}, {3, 4}, {2, 4}};
    CHECK_THROWS_WITH_AS(Tree::from_edges(edges), doctest::Contains("multiple parents"),
                         std::invalid_argument);
}

TEST_CASE("cycles are rejected") {
    std::vector<std::pair<std::int64_t, std::int64_t>> cyc{{1, 2}, {2, 3}, {3, 1}};
    CHECK_THROWS_WITH_AS(Tree::from_edges(cyc), doctest::Contains("cycle"), std::invalid_argument);
    CHECK_THROWS_AS(Tree::from_edges(cyc, 1), std::invalid_argument);

    std::vector<std::pair<std::int64_t, std::int64_t>> stray{{1, 2}, {1, 3}, {4, 5}, {5, 4}};
    CHECK_THROWS_AS(Tree::from_edges(stray, 1), std::invalid_argument);
}

TEST_CASE("unary interior nodes need the override") {
    std::vector<std::pair<std::int64_t, std::int64_t>> chain{{0, 1}, {1, 2}};
    CHECK_THROWS_WITH_AS(Tree::from_edges(chain), doctest::Contains("forward degree 1"),
                         std::invalid_argument);
    TreeBuildOptions opts;
    opts.allow_unary = true;
    Tree t = Tree::from_edges(chain, std::nullopt, opts);
    CHECK(t.node_count() == 3);
    CHECK(t.depth(*t.find_external(2)) == 2);
}

TEST_CASE("node guard trips fast") {
    TreeBuildOptions opts;
    opts.max_nodes = 10;
    std::vector<int> degrees(20, 2);
    CHECK_THROWS_AS(Tree::from_level_order_degrees(degrees, opts), GuardExceeded);
}

TEST_CASE("breadth-first ids: parents precede children, labels round-trip") {
    Rng rng(7);
    Tree t = testgen::random_tree(rng, 500);
    for (std::size_t i = 1; i < t.node_count(); ++i)
        CHECK(t.parent(static_cast<NodeId>(i)) < static_cast<NodeId>(i));
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        CHECK(*t.find_external(t.external_id(x)) == x);
    }
}

TEST_CASE("cone at the root and at a leaf") {
    Tree t = complete_binary(3);
    Cone root_cone = cone(t, t.root());
    CHECK(root_cone.nodes.size() == t.node_count());
    CHECK(root_cone.leaves.size() == t.leaf_count());

    NodeId leaf = t.leaves()[3];
    Cone leaf_cone = cone(t, leaf);
    CHECK(leaf_cone.nodes == std::vector<NodeId>{leaf});
    CHECK(leaf_cone.leaves == std::vector<NodeId>{leaf});

    CHECK_THROWS_AS(cone(t, 99), std::invalid_argument);
}

TEST_CASE("cone at an inner node of a height-2 binary tree") {
    Tree t = complete_binary(2);
    NodeId left = t.children(t.root())[0];
    Cone c = cone(t, left);
    CHECK(c.nodes.size() == 3);
    CHECK(c.leaves.size() == 2);
}

TEST_CASE("cone partition: children leaves tile the parent cone") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        Tree t = testgen::random_tree(rng, 300);
        for (std::size_t i = 0; i < t.node_count(); ++i) {
            NodeId x = static_cast<NodeId>(i);
            if (!t.is_interior(x)) continue;
            Cone cx = cone(t, x);
            std::set<NodeId> tiled;
            for (NodeId y : t.children(x)) {
                Cone cy = cone(t, y);
                for (NodeId v : cy.leaves) {
                    CHECK(!tiled.count(v));  // disjoint
                    tiled.insert(v);
                }
            }
            std::set<NodeId> whole(cx.leaves.begin(), cx.leaves.end());
            CHECK(tiled == whole);
        }
    }
}

TEST_CASE("path lengths") {
    Tree t = complete_binary(5);
    LengthFunction unit = LengthFunction::unit(t);
    CHECK(unit.path_length(t, t.root()) == 0.0);
    for (NodeId v : t.leaves()) CHECK(unit.path_length(t, v) == 5.0);

    SUBCASE("two custom edges add up") {
        Tree s = complete_binary(2);
        std::vector<double> vals(s.node_count(), 1.0);
        for (NodeId v : s.leaves()) vals[static_cast<std::size_t>(v)] = 0.0;
        vals[0] = 2.0;                                           // root
        vals[static_cast<std::size_t>(s.children(0)[0])] = 3.0;  // left child
        LengthFunction l = LengthFunction::table(s, vals);
        NodeId grandchild = s.children(s.children(0)[0])[1];
        CHECK(l.path_length(s, grandchild) == doctest::Approx(5.0).epsilon(1e-15));
    }
}

TEST_CASE("lengths are rejected at leaves and must be positive") {
    Tree t = star(3);
    LengthFunction unit = LengthFunction::unit(t);
    CHECK_THROWS_AS(unit.at(t, t.leaves()[0]), std::logic_error);
    std::vector<double> vals(t.node_count(), 0.0);
    CHECK_THROWS_AS(LengthFunction::table(t, vals), std::invalid_argument);
}

TEST_CASE("path length increases strictly along geodesics") {
    Rng rng(23);
    for (int rep = 0; rep < 10; ++rep) {
        Tree t = testgen::random_tree(rng, 400);
        LengthFunction l = testgen::random_lengths(rng, t);
        auto len = l.all_path_lengths(t);
        for (NodeId v : t.leaves()) {
            for (NodeId y = v; y != t.root(); y = t.parent(y))
                CHECK(len[static_cast<std::size_t>(y)] >
                      len[static_cast<std::size_t>(t.parent(y))]);
        }
        // all_path_lengths agrees with the per-node walk
        for (std::size_t i = 0; i < t.node_count(); ++i)
            CHECK(len[i] ==
                  doctest::Approx(l.path_length(t, static_cast<NodeId>(i))).epsilon(1e-12));
    }
}

TEST_CASE("cross sections: boundary, root, and a double hit") {
    Tree t = complete_binary(3);
    auto leaves = t.leaves();

    CrossSection boundary = CrossSection::validate(t, leaves);
    CHECK(boundary.members().size() == t.leaf_count());
    for (std::size_t i = 0; i < t.node_count(); ++i)
        CHECK(boundary.in_subtree(static_cast<NodeId>(i)));  // T^S = T

    std::vector<NodeId> root_only{t.root()};
    CrossSection at_root = CrossSection::validate(t, root_only);
    CHECK(at_root.members().size() == 1);
    CHECK(at_root.in_subtree(t.root()));
    CHECK(!at_root.in_subtree(t.children(t.root())[0]));

    std::vector<NodeId> twice{t.root(), leaves[5]};
    SectionCheck chk = CrossSection::check(t, twice);
    CHECK(!chk.ok);
    CHECK(chk.witness == leaves[5]);
    CHECK(chk.hits == 2);
    CHECK_THROWS_WITH_AS(CrossSection::validate(t, twice),
                         doctest::Contains("not a cross section"), std::invalid_argument);

    std::vector<NodeId> miss{t.children(t.root())[0]};
    SectionCheck chk2 = CrossSection::check(t, miss);
    CHECK(!chk2.ok);
    CHECK(chk2.hits == 0);
}

TEST_CASE("depth sections validate on every tree") {
    Rng rng(31);
    for (int rep = 0; rep < 15; ++rep) {
        Tree t = testgen::random_tree(rng, 400);
        for (int n = 0; n <= t.max_depth() + 1; ++n) {
            CrossSection s = CrossSection::at_depth(t, n);
            CHECK(CrossSection::check(t, s.members()).ok);
        }
        CrossSection s0 = CrossSection::at_depth(t, 0);
        CHECK(s0.members().size() == 1);  // just the root
    }
}
