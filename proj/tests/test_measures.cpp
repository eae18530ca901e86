#include <doctest.h>

#include <cmath>

#include "support/random_instances.hpp"
#include "treerate/bounds.hpp"
#include "treerate/measures.hpp"

using namespace treerate;

namespace {

Tree complete_binary(int height) {
    std::vector<int> degrees(static_cast<std::size_t>((1 << height) - 1), 2);
    return Tree::from_level_order_degrees(degrees);
}

ForwardKernel uniform_kernel(const Tree& t) {
    std::vector<std::vector<double>> rows(t.node_count());
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (t.is_interior(x))
            rows[i].assign(static_cast<std::size_t>(t.degree(x)), 1.0 / t.degree(x));
    }
    return ForwardKernel::from_rows(t, std::move(rows));
}

}  // namespace

TEST_CASE("uniform star: hitting masses 1/M") {
    std::vector<int> degrees{4};
    Tree t = Tree::from_level_order_degrees(degrees);
    LeafDistribution p = kernel_to_leaf(t, uniform_kernel(t));
    for (NodeId v : t.leaves()) CHECK(p.mass(v) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(p.cone_mass(t.root()) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("fair coin flips: height-2 leaves carry 1/4") {
    Tree t = complete_binary(2);
    LeafDistribution p = kernel_to_leaf(t, uniform_kernel(t));
    for (NodeId v : t.leaves()) CHECK(p.mass(v) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("two-branch tree: branch-1 leaves carry theta/d1^n") {
    double theta = 0.3;
    int d1 = 2, d2 = 3, n = 3;
    IndispInstance inst = build_indisp_instance(theta, d1, d2, n);
    // rebuild the same law through the kernel route
    std::vector<std::vector<double>> rows(inst.tree.node_count());
    for (std::size_t i = 0; i < inst.tree.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        if (!inst.tree.is_interior(x)) continue;
        if (x == inst.tree.root())
            rows[i] = {theta, 1.0 - theta};
        else
            rows[i].assign(static_cast<std::size_t>(inst.tree.degree(x)),
                           1.0 / inst.tree.degree(x));
    }
    LeafDistribution p = kernel_to_leaf(inst.tree, ForwardKernel::from_rows(inst.tree, rows));
    double m1 = theta / std::pow(d1, n);
    int count1 = 0;
    for (NodeId v : inst.tree.leaves()) {
        CHECK(p.mass(v) == doctest::Approx(inst.p.mass(v)).epsilon(1e-14));
        if (std::abs(p.mass(v) - m1) < 1e-15) ++count1;
    }
    CHECK(count1 == static_cast<int>(std::pow(d1, n)));
}

TEST_CASE("kernel and leaf representations are mutually inverse") {
    Tree t = complete_binary(3);
    Rng rng(5);
    for (int rep = 0; rep < 25; ++rep) {
        LeafDistribution p = testgen::random_leaf_law(rng, t);
        ForwardKernel k = leaf_to_kernel(t, p);
        LeafDistribution back = kernel_to_leaf(t, k);
        for (NodeId v : t.leaves()) CHECK(back.mass(v) == doctest::Approx(p.mass(v)).epsilon(1e-12));

        ForwardKernel k2 = testgen::random_kernel(rng, t);
        LeafDistribution q = kernel_to_leaf(t, k2);
        ForwardKernel back2 = leaf_to_kernel(t, q);
        for (std::size_t i = 0; i < t.node_count(); ++i) {
            NodeId x = static_cast<NodeId>(i);
            if (!t.is_interior(x)) continue;
            REQUIRE(back2.supported(x));
            for (std::size_t j = 0; j < k2.row(x).size(); ++j)
                CHECK(back2.row(x)[j] == doctest::Approx(k2.row(x)[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("law concentrated on one leaf gives a deterministic spine") {
    Tree t = complete_binary(3);
    NodeId target = t.leaves()[5];
    std::vector<double> mass(t.node_count(), 0.0);
    mass[static_cast<std::size_t>(target)] = 1.0;
    LeafDistribution p = LeafDistribution::from_node_masses(t, mass);
    ForwardKernel k = leaf_to_kernel(t, p);
    // along the spine each row is an indicator; off the spine unsupported
    for (NodeId y = target; y != t.root(); y = t.parent(y)) {
        NodeId x = t.parent(y);
        REQUIRE(k.supported(x));
        auto ch = t.children(x);
        for (std::size_t j = 0; j < ch.size(); ++j)
            CHECK(k.row(x)[j] == (ch[j] == y ? 1.0 : 0.0));
    }
    int unsupported = 0;
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i)) && !k.supported(static_cast<NodeId>(i)))
            ++unsupported;
    CHECK(unsupported > 0);
}

TEST_CASE("unnormalized rows and misplaced masses are rejected") {
    Tree t = complete_binary(2);
    std::vector<std::vector<double>> rows(t.node_count());
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i))) rows[i] = {0.6, 0.6};
    CHECK_THROWS_WITH_AS(ForwardKernel::from_rows(t, rows), doctest::Contains("unnormalized"),
                         std::invalid_argument);

    std::vector<double> mass(t.node_count(), 0.0);
    mass[0] = 1.0;  // root is interior
    CHECK_THROWS_WITH_AS(LeafDistribution::from_node_masses(t, mass),
                         doctest::Contains("interior"), std::invalid_argument);
}

TEST_CASE("section distributions") {
    Tree t = complete_binary(2);
    LeafDistribution p = kernel_to_leaf(t, uniform_kernel(t));

    CrossSection boundary = CrossSection::validate(t, t.leaves());
    auto ps = section_distribution(t, p, boundary);
    for (std::size_t i = 0; i < ps.size(); ++i)
        CHECK(ps[i] == doctest::Approx(p.mass(boundary.members()[i])).epsilon(1e-15));

    std::vector<NodeId> root_only{t.root()};
    auto pr = section_distribution(t, p, CrossSection::validate(t, root_only));
    REQUIRE(pr.size() == 1);
    CHECK(pr[0] == doctest::Approx(1.0).epsilon(1e-15));

    CrossSection level1 = CrossSection::at_depth(t, 1);
    auto pl = section_distribution(t, p, level1);
    REQUIRE(pl.size() == 2);
    CHECK(pl[0] == doctest::Approx(0.5).epsilon(1e-15));  // first kernel row
    CHECK(pl[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("section masses sum to one on random sections") {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        Tree t = testgen::random_tree(rng, 300);
        LeafDistribution p = testgen::random_leaf_law(rng, t);
        for (int n = 0; n <= t.max_depth(); ++n) {
            auto ps = section_distribution(t, p, CrossSection::at_depth(t, n));
            double sum = 0.0;
            for (double v : ps) sum += v;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("expected length: constant depth, two-branch value, route identity") {
    Tree t = complete_binary(4);
    LeafDistribution p = kernel_to_leaf(t, uniform_kernel(t));
    LengthFunction unit = LengthFunction::unit(t);
    CHECK(expected_length(t, p, unit) == doctest::Approx(4.0).epsilon(1e-14));

    IndispInstance inst = build_indisp_instance(0.25, 2, 4, 5);
    LengthFunction u2 = LengthFunction::unit(inst.tree);
    CHECK(expected_length(inst.tree, inst.p, u2) == doctest::Approx(6.0).epsilon(1e-12));

    Rng rng(41);
    for (int rep = 0; rep < 15; ++rep) {
        Tree s = testgen::random_tree(rng, 400);
        LeafDistribution q = testgen::random_leaf_law(rng, s);
        LengthFunction l = testgen::random_lengths(rng, s);
        double boundary = expected_length(s, q, l);
        double interior = expected_length_interior(s, q, l);
        CHECK(boundary == doctest::Approx(interior).epsilon(1e-12));
        CrossSection all = CrossSection::validate(s, s.leaves());
        CHECK(expected_length(s, q, l, all) == doctest::Approx(boundary).epsilon(1e-12));
    }
}

TEST_CASE("node averages: star mass, normalization, harmonic identity") {
    std::vector<int> star_degrees{5};
    Tree star = Tree::from_level_order_degrees(star_degrees);
    LeafDistribution sp = kernel_to_leaf(star, uniform_kernel(star));
    LengthFunction su = LengthFunction::unit(star);
    NodeAverageMeasure mu = NodeAverageMeasure::compute(star, sp, su);
    CHECK(mu.at(star.root()) == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(43);
    for (int rep = 0; rep < 15; ++rep) {
        Tree t = testgen::random_tree(rng, 500);
        LeafDistribution p = testgen::random_leaf_law(rng, t);
        LengthFunction l = testgen::random_lengths(rng, t);
        NodeAverageMeasure m = NodeAverageMeasure::compute(t, p, l);

        double total = 0.0;
        double harmonic = 0.0;
        for (std::size_t i = 0; i < t.node_count(); ++i) {
            NodeId x = static_cast<NodeId>(i);
            total += m.at(x);
            if (t.is_interior(x) && m.at(x) > 0.0) harmonic += m.at(x) / l.at(t, x);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

        LengthFunction unit = LengthFunction::unit(t);
        double expect = expected_length(t, p, unit) / expected_length(t, p, l);
        CHECK(harmonic == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("cone masses shrink toward the leaves") {
    Rng rng(47);
    Tree t = testgen::random_tree(rng, 400);
    LeafDistribution p = testgen::random_leaf_law(rng, t);
    for (std::size_t i = 1; i < t.node_count(); ++i) {
        NodeId x = static_cast<NodeId>(i);
        CHECK(p.cone_mass(x) <= p.cone_mass(t.parent(x)) + 1e-15);
    }
}

TEST_CASE("dead subtrees: unsupported rows, zero node average") {
    Tree t = complete_binary(3);
    // kill the entire right half
    std::vector<double> mass(t.node_count(), 0.0);
    auto leaves = t.leaves();
    for (std::size_t i = 0; i < 4; ++i)
        mass[static_cast<std::size_t>(leaves[i])] = 0.25;
    LeafDistribution p = LeafDistribution::from_node_masses(t, mass);

    NodeId right = t.children(t.root())[1];
    CHECK(!p.supported(right));
    ForwardKernel k = leaf_to_kernel(t, p);
    CHECK(!k.supported(right));
    CHECK(k.supported(t.root()));

    LengthFunction unit = LengthFunction::unit(t);
    NodeAverageMeasure mu = NodeAverageMeasure::compute(t, p, unit);
    CHECK(mu.at(right) == 0.0);
    CHECK(expected_length(t, p, unit) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("degenerate root-only law has no node average") {
    std::vector<int> degs{0};
    Tree t = Tree::from_level_order_degrees(degs);  // a single leaf-root
    std::vector<double> mass{1.0};
    LeafDistribution p = LeafDistribution::from_node_masses(t, mass);
    LengthFunction unit = LengthFunction::unit(t);
    CHECK_THROWS_WITH_AS(NodeAverageMeasure::compute(t, p, unit),
                         doctest::Contains("expected length is zero"), std::invalid_argument);
}
