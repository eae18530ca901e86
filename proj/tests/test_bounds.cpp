#include <doctest.h>

#include <cmath>

#include "support/random_instances.hpp"
#include "treerate/bounds.hpp"
#include "treerate/entropy.hpp"
#include "treerate/kahan.hpp"

using namespace treerate;

namespace {

Tree complete_nary(int degree, int height) {
    std::size_t interior = 0, level = 1;
    for (int k = 0; k < height; ++k) {
        interior += level;
        level *= static_cast<std::size_t>(degree);
    }
    std::vector<int> degrees(interior, degree);
    return Tree::from_level_order_degrees(degrees);
}

}  // namespace

TEST_CASE("the comparison constant") {
    CHECK(std::abs(compare_constant() - kCompareC) < 1e-15);
    CHECK(std::abs(compare_constant() - 1.25) < 5e-4);
}

TEST_CASE("geometric dominating family: tails, mean, moments") {
    DominatingPmf g = DominatingPmf::geometric(0.5);
    CHECK(g.tail(1) == doctest::Approx(1.0));
    CHECK(g.tail(3) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g.finite_mean());
    CHECK(g.mean() == doctest::Approx(2.0).epsilon(1e-12));

    for (std::size_t m : {std::size_t{1}, std::size_t{2}, std::size_t{5}, std::size_t{13}}) {
        KahanSum direct;
        for (std::size_t n = m; n < 400; ++n)
            direct.add(static_cast<double>(n) * g.prob(n));
        CHECK(g.tail_first_moment(m) == doctest::Approx(direct.value()).epsilon(1e-12));
    }
}

TEST_CASE("quadratic power-law tails have no mean and are rejected") {
    DominatingPmf zeta2 = DominatingPmf::power_law(2.0);
    CHECK(!zeta2.finite_mean());
    CHECK_THROWS_WITH_AS(TightnessCertificate::dominated(zeta2),
                         doctest::Contains("finite mean"), std::invalid_argument);

    DominatingPmf zeta3 = DominatingPmf::power_law(3.0);
    CHECK(zeta3.finite_mean());
    CHECK(zeta3.tail(1) == doctest::Approx(1.0).epsilon(1e-6));
    KahanSum direct;
    for (std::size_t n = 4; n < 20000; ++n) direct.add(static_cast<double>(n) * zeta3.prob(n));
    CHECK(zeta3.tail_first_moment(4) == doctest::Approx(direct.value()).epsilon(1e-4));
}

TEST_CASE("table pmf round trip") {
    DominatingPmf tbl = DominatingPmf::table({0.5, 0.25, 0.25});
    CHECK(tbl.finite_mean());
    CHECK(tbl.mean() == doctest::Approx(1.75).epsilon(1e-15));
    CHECK(tbl.tail(3) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(tbl.tail(4) == 0.0);
    CHECK_THROWS_AS(DominatingPmf::table({0.5, 0.25}), std::invalid_argument);
}

TEST_CASE("certificate selection: cutoffs shrink the entropy tail below eps") {
    TightnessCertificate cert = TightnessCertificate::dominated(DominatingPmf::geometric(0.5));
    std::size_t last_cutoff = 0;
    for (double eps : {0.5, 0.1, 0.01, 1e-4}) {
        CutoffSelection sel = cert.select(eps);
        CHECK(sel.tail_entropy_bound < eps);
        CHECK(sel.m_eps == doctest::Approx(static_cast<double>(sel.cutoff - 1)));
        CHECK(sel.cutoff >= last_cutoff);
        last_cutoff = sel.cutoff;
    }
    CHECK_THROWS_AS(cert.select(0.0), std::invalid_argument);

    // comparable q-side needs a larger cutoff for the same eps
    CutoffSelection plain = cert.select(0.01);
    CutoffSelection scaled = cert.select_comparable(0.01, 3.0);
    CHECK(scaled.cutoff >= plain.cutoff);
}

TEST_CASE("row verification against the dominating tails") {
    TightnessCertificate cert = TightnessCertificate::dominated(DominatingPmf::geometric(0.5));
    std::vector<double> good{0.5, 0.25, 0.25};
    cert.verify_row(good);  // tails (1, .5, .25) all within (1, .5, .25)
    std::vector<double> bad{0.4, 0.4, 0.2};
    CHECK_THROWS_WITH_AS(cert.verify_row(bad), doctest::Contains("exceeds"),
                         std::invalid_argument);

    Tree t = complete_nary(3, 2);
    std::vector<std::vector<double>> rows(t.node_count());
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i))) rows[i] = {0.5, 0.3, 0.2};
    ForwardKernel k = ForwardKernel::from_rows(t, rows);
    TightnessCertificate c2 = certify_tightness(t, k, DominatingPmf::geometric(0.5));
    CHECK(c2.mode() == TightnessCertificate::Mode::dominated);
}

TEST_CASE("comparability of two laws extends the certificate") {
    Tree t = complete_nary(2, 3);
    Rng rng(31);
    LeafDistribution p = testgen::random_leaf_law(rng, t, 0.5);
    LeafDistribution q = testgen::random_leaf_law(rng, t, 0.5);
    TightnessCertificate cert = TightnessCertificate::dominated(DominatingPmf::geometric(0.5));
    // mixing with half the uniform law keeps mass ratios within a factor 16
    cert.set_comparability(t, p, q, 16.0);
    CHECK(cert.comparability().has_value());
    CHECK_THROWS_AS(cert.set_comparability(t, p, q, 1.0000001), std::invalid_argument);
}

TEST_CASE("q-types: single, distinct, permuted") {
    Tree t = complete_nary(2, 3);
    std::vector<std::vector<double>> rows(t.node_count());
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i))) rows[i] = {0.5, 0.5};
    QTypePartition uni = q_type_partition(t, ForwardKernel::from_rows(t, rows));
    CHECK(uni.single_type());

    // permutations of one row stay one type; a genuinely different row splits
    std::vector<std::vector<double>> rows2 = rows;
    rows2[0] = {0.3, 0.7};
    rows2[1] = {0.7, 0.3};
    rows2[2] = {0.25, 0.75};
    QTypePartition part = q_type_partition(t, ForwardKernel::from_rows(t, rows2));
    CHECK(part.type_count == 3);  // {.3,.7} twice, {.25,.75}, and the {.5,.5} rest
    CHECK(part.type_of[0] == part.type_of[1]);
    CHECK(part.type_of[0] != part.type_of[2]);

    // different row sizes are different types
    std::vector<int> degs{2, 3, 2};
    Tree mixed = Tree::from_level_order_degrees(degs);
    std::vector<std::vector<double>> rows3(mixed.node_count());
    rows3[0] = {0.5, 0.5};
    rows3[1] = {0.5, 0.3, 0.2};
    rows3[2] = {0.5, 0.5};
    QTypePartition sized = q_type_partition(mixed, ForwardKernel::from_rows(mixed, rows3));
    CHECK(sized.type_count == 2);
}

TEST_CASE("comparison bound: identical laws") {
    Tree t = complete_nary(3, 3);
    Rng rng(41);
    LeafDistribution p = testgen::random_leaf_law(rng, t, 0.2);
    LengthFunction l = testgen::random_lengths(rng, t);
    TightnessCertificate cert = TightnessCertificate::finite(t);
    BoundReport r = compare_bound(t, p, p, l, 0.0, 0.1, cert);
    CHECK(r.lhs == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r.term2 == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r.term3 == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r.holds);
}

TEST_CASE("constant q-type and unit lengths collapse the mu-term") {
    Tree t = complete_nary(3, 3);
    std::vector<std::vector<double>> rows(t.node_count());
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i))) rows[i] = {0.2, 0.3, 0.5};
    ForwardKernel kq = ForwardKernel::from_rows(t, rows);
    LeafDistribution q = kernel_to_leaf(t, kq);

    Rng rng(43);
    LeafDistribution p = testgen::random_leaf_law(rng, t, 0.3);
    LengthFunction unit = LengthFunction::unit(t);
    TightnessCertificate cert = TightnessCertificate::finite(t);

    BoundReport r = compare_bound(t, p, q, unit, 0.0, 0.2, cert);
    CHECK(r.sup_hq_over_l == doctest::Approx(r.inf_hq_over_l).epsilon(1e-12));
    CHECK(r.term3 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.l_factor == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.holds);

    SingleTypeBoundReport sr = boeam_bound(t, p, std::vector<double>{0.2, 0.3, 0.5}, 0.2, 0.0, cert);
    CHECK(sr.lhs == doctest::Approx(r.lhs).epsilon(1e-12));
    CHECK(sr.rhs == doctest::Approx(r.rhs).epsilon(1e-12));
    CHECK(sr.holds);
    CHECK(sr.constant_height);
    CHECK(sr.height == 3);
}

TEST_CASE("comparison bound holds on random instances") {
    Rng rng(47);
    for (int rep = 0; rep < 100; ++rep) {
        Tree t = testgen::random_tree(rng, 400);
        LeafDistribution p = testgen::random_leaf_law(rng, t);
        LeafDistribution q = testgen::random_leaf_law(rng, t, 0.25);
        LengthFunction l = rep % 2 ? testgen::random_lengths(rng, t) : LengthFunction::unit(t);
        double delta = rng.uniform(0.01, 0.49);
        double eps = rep % 3 == 0 ? 0.0 : rng.uniform(0.0, 0.2);
        TightnessCertificate cert = TightnessCertificate::finite(t);
        BoundReport r = compare_bound(t, p, q, l, eps, delta, cert);
        CHECK(r.holds);
        CHECK(r.lhs <= r.rhs + 1e-12);
    }
}

TEST_CASE("parameter domains of the comparison bound") {
    Tree t = complete_nary(2, 2);
    Rng rng(53);
    LeafDistribution p = testgen::random_leaf_law(rng, t, 0.5);
    LengthFunction unit = LengthFunction::unit(t);
    TightnessCertificate fin = TightnessCertificate::finite(t);
    CHECK_THROWS_AS(compare_bound(t, p, p, unit, 0.0, 0.5, fin), std::invalid_argument);
    CHECK_THROWS_AS(compare_bound(t, p, p, unit, -0.1, 0.2, fin), std::invalid_argument);
    TightnessCertificate dom = TightnessCertificate::dominated(DominatingPmf::geometric(0.5));
    CHECK_THROWS_WITH_AS(compare_bound(t, p, p, unit, 0.0, 0.2, dom),
                         doctest::Contains("bounded forward degrees"), std::invalid_argument);
}

TEST_CASE("single-type bound: product laws and perturbations of them") {
    Tree t = complete_nary(3, 3);
    std::vector<double> q_row{0.2, 0.3, 0.5};
    std::vector<std::vector<double>> rows(t.node_count());
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i))) rows[i] = q_row;
    LeafDistribution q = kernel_to_leaf(t, ForwardKernel::from_rows(t, rows));
    TightnessCertificate cert = TightnessCertificate::finite(t);

    SingleTypeBoundReport self = boeam_bound(t, q, q_row, 0.1, 0.0, cert);
    CHECK(self.lhs <= 1e-12);

    // mixing toward an alternative row: the gap and the divergence shrink together
    std::vector<double> alt{0.6, 0.2, 0.2};
    double prev_rhs = 1e9;
    for (int k = 0; k <= 16; k += 4) {
        double w = std::ldexp(1.0, -k);  // 2^-k
        std::vector<std::vector<double>> rows_k(t.node_count());
        for (std::size_t i = 0; i < t.node_count(); ++i)
            if (t.is_interior(static_cast<NodeId>(i))) {
                rows_k[i].resize(q_row.size());
                for (std::size_t j = 0; j < q_row.size(); ++j)
                    rows_k[i][j] = (1.0 - w) * q_row[j] + w * alt[j];
            }
        LeafDistribution pk = kernel_to_leaf(t, ForwardKernel::from_rows(t, rows_k));
        double dr = kl(t, pk, q) / 3.0;
        double delta = std::min(0.49, std::max(1e-3, std::pow(dr, 0.25)));
        SingleTypeBoundReport r = boeam_bound(t, pk, q_row, delta, 0.0, cert);
        CHECK(r.holds);
        if (k > 0) CHECK(r.rhs <= prev_rhs + 1e-12);
        prev_rhs = r.rhs;
        if (k == 16) CHECK(r.lhs < 1e-2);
    }

    // a tree with a different degree somewhere cannot carry the single type
    std::vector<int> degs{3, 3, 2, 3};
    Tree broken = Tree::from_level_order_degrees(degs);
    Rng rng(59);
    LeafDistribution bp = testgen::random_leaf_law(rng, broken, 0.5);
    CHECK_THROWS_WITH_AS(
        boeam_bound(broken, bp, q_row, 0.1, 0.0, TightnessCertificate::finite(broken)),
        doctest::Contains("single q-type"), std::invalid_argument);
}

TEST_CASE("entropy-length form of the bound") {
    Tree t = complete_nary(4, 3);
    // mixed rows with entropy >= 1 keep the plain form valid
    Rng rng(61);
    std::vector<std::vector<double>> rows(t.node_count());
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i)))
            rows[i] = testgen::random_prob_vector(rng, 4, 0.5);
    ForwardKernel kq = ForwardKernel::from_rows(t, rows);
    LeafDistribution q = kernel_to_leaf(t, kq);
    TightnessCertificate cert = TightnessCertificate::finite(t);

    EntropyLengthBoundReport self = entropy_length_bound(t, q, kq, 0.2, 0.0, cert);
    CHECK(self.lhs <= 1e-12);  // H(Q)/l_q(Q) = 1 on the nose
    CHECK(self.holds);

    for (int rep = 0; rep < 25; ++rep) {
        LeafDistribution p = testgen::random_leaf_law(rng, t, 0.3);
        double delta = rng.uniform(0.05, 0.45);
        EntropyLengthBoundReport r = entropy_length_bound(t, p, kq, delta, 0.0, cert);
        CHECK(r.holds);
        CHECK(r.holds_full);
        CHECK(r.rhs_full <= r.rhs + 1e-12);  // H_q >= 1 keeps L <= 1
    }

    // a deterministic row degenerates the length
    std::vector<std::vector<double>> det = rows;
    det[0] = {1.0, 0.0, 0.0, 0.0};
    ForwardKernel kdet = ForwardKernel::from_rows(t, det);
    LeafDistribution pd = testgen::random_leaf_law(rng, t, 0.5);
    CHECK_THROWS_WITH_AS(entropy_length_bound(t, pd, kdet, 0.2, 0.0, cert),
                         doctest::Contains("deterministic"), std::invalid_argument);
}

TEST_CASE("section variant: root section reproduces the plain mu-term") {
    Rng rng(67);
    Tree t = testgen::random_tree(rng, 300);
    LeafDistribution p = testgen::random_leaf_law(rng, t, 0.2);
    LeafDistribution q = testgen::random_leaf_law(rng, t, 0.2);
    LengthFunction l = testgen::random_lengths(rng, t);
    TightnessCertificate cert = TightnessCertificate::finite(t);

    std::vector<NodeId> root_only{t.root()};
    CrossSection s = CrossSection::validate(t, root_only);
    SectionVariantReport v = section_variant_bound(t, p, q, l, s, 0.0, 0.2, cert);
    CHECK(v.sup_outside == doctest::Approx(v.base.sup_hq_over_l).epsilon(1e-15));
    CHECK(v.inf_outside == doctest::Approx(v.base.inf_hq_over_l).epsilon(1e-15));
    CHECK(v.section_length_ratio == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(v.term3_variant == doctest::Approx(v.base.term3).epsilon(1e-12));
    CHECK(v.holds);
}

TEST_CASE("section variant: constant tail entropy kills the starred part") {
    // root row differs; everything below level 1 is fair-coin
    Tree t = complete_nary(2, 4);
    std::vector<std::vector<double>> rows(t.node_count());
    for (std::size_t i = 0; i < t.node_count(); ++i)
        if (t.is_interior(static_cast<NodeId>(i)))
            rows[i] = i == 0 ? std::vector<double>{0.9, 0.1} : std::vector<double>{0.5, 0.5};
    LeafDistribution q = kernel_to_leaf(t, ForwardKernel::from_rows(t, rows));
    Rng rng(71);
    LeafDistribution p = testgen::random_leaf_law(rng, t, 0.3);
    LengthFunction unit = LengthFunction::unit(t);
    TightnessCertificate cert = TightnessCertificate::finite(t);

    CrossSection level1 = CrossSection::at_depth(t, 1);
    SectionVariantReport v = section_variant_bound(t, p, q, unit, level1, 0.0, 0.2, cert);
    CHECK(v.sup_outside == doctest::Approx(v.inf_outside).epsilon(1e-12));
    CHECK(v.holds);
}

TEST_CASE("section variant on the two-branch tree") {
    IndispInstance inst = build_indisp_instance(0.25, 2, 4, 3);
    LengthFunction unit = LengthFunction::unit(inst.tree);
    TightnessCertificate cert = TightnessCertificate::finite(inst.tree);
    CrossSection level1 = CrossSection::at_depth(inst.tree, 1);
    for (double delta : {0.05, 0.2, 0.45}) {
        SectionVariantReport v =
            section_variant_bound(inst.tree, inst.p, inst.q, unit, level1, 0.0, delta, cert);
        CHECK(v.holds);
        CHECK(v.base.holds);
    }
}

TEST_CASE("two-branch closed forms match the explicit tree") {
    SUBCASE("fair theta gives zero divergence") {
        IndispExample ex = indisp_example(0.5, 2, 4, 3);
        CHECK(ex.kl_pq == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(ex.kl_numeric == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(ex.gap_limit == doctest::Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("equal degrees cancel the limit gap") {
        IndispExample ex = indisp_example(0.3, 3, 3, 2);
        CHECK(ex.gap_limit == doctest::Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("theta = 1/4, d1 = 2, d2 = 4 up to n = 6") {
        for (int n = 1; n <= 6; ++n) {
            IndispExample ex = indisp_example(0.25, 2, 4, n);
            REQUIRE(ex.verified_numerically);
            CHECK(std::abs(ex.entropy_p - ex.entropy_p_numeric) <=
                  1e-10 * (1.0 + std::abs(ex.entropy_p)));
            CHECK(std::abs(ex.kl_pq - ex.kl_numeric) <= 1e-10);
            CHECK(ex.expected_length_numeric == doctest::Approx(n + 1.0).epsilon(1e-12));
        }
    }
    SUBCASE("domain checks") {
        CHECK_THROWS_AS(indisp_example(0.0, 2, 2, 3), std::invalid_argument);
        CHECK_THROWS_AS(indisp_example(0.5, 1, 2, 3), std::invalid_argument);
        CHECK_THROWS_AS(indisp_example(0.5, 2, 2, 0), std::invalid_argument);
        CHECK_THROWS_AS(build_indisp_instance(0.25, 4, 4, 15, 100000), GuardExceeded);
    }
}

TEST_CASE("the mu-term cannot be dropped: closed forms at astronomical n") {
    // theta = 1/4, d1 = 2, d2 = 16: the rate gap tends to 0.75 while the
    // delta-optimised first two terms shrink like n^{-1/4}; by n = 1e12
    // they sit below a tenth of the gap. All quantities are closed-form.
    double theta = 0.25;
    IndispExample ex = indisp_example(theta, 2, 16, 1, false);
    CHECK(ex.gap_limit == doctest::Approx(0.75).epsilon(1e-14));

    double n = 1e12;
    double kl_rate = ex.kl_pq / (n + 1.0);
    double best = 1e300;
    for (double delta = 1e-6; delta < 0.5; delta *= 1.15) {
        double t1 = 16.0 * phi(delta);  // max forward degree is 16, eps = 0
        double t2 = compare_constant() / delta * std::sqrt(kl_rate);
        best = std::min(best, t1 + t2);
    }
    CHECK(ex.gap_limit > 10.0 * best);

    // sanity: at laptop-scale n the same minimum is still far too big,
    // which is exactly why the closed-form evaluation is needed
    double kl_rate_small = ex.kl_pq / 1e4;
    double best_small = 1e300;
    for (double delta = 1e-6; delta < 0.5; delta *= 1.15) {
        double t1 = 16.0 * phi(delta);
        double t2 = compare_constant() / delta * std::sqrt(kl_rate_small);
        best_small = std::min(best_small, t1 + t2);
    }
    CHECK(ex.gap_limit < 10.0 * best_small);
}
