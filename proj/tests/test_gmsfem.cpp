#include "doctest.h"

#include "ms/gmsfem.hpp"

#include <Eigen/Dense>

using namespace ms;

namespace {

CoefficientField channels(const GridHierarchy& g, double contrast,
                          uint64_t seed) {
    FieldSpec spec;
    spec.kind = "channels";
    spec.contrast = contrast;
    spec.seed = seed;
    return generate_field(spec, g);
}

} // namespace

TEST_CASE("snapshot spaces") {
    GridHierarchy g(3, 3, 4);
    auto kappa = channels(g, 1e3, 7);
    int cn = g.coarse_node(1, 1);

    SUBCASE("all-fine: one orthonormal column per interior node") {
        auto snap = build_snapshots(g, kappa, cn, SnapshotSpace::Kind::AllFine);
        CHECK(snap.count() == snap.region.num_interior());
        Mat G = snap.columns.transpose() * snap.columns;
        CHECK((G - Mat::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff() <
              1e-12);
    }
    SUBCASE("harmonic: interior PDE residual vanishes") {
        auto snap = build_snapshots(g, kappa, cn, SnapshotSpace::Kind::Harmonic);
        CHECK(snap.count() == static_cast<int>(snap.region.boundary_nodes.size()));
        SpMat A = assemble_stiffness(g, kappa, snap.region);
        Mat R = A * snap.columns;
        for (int i = 0; i < snap.region.num_nodes(); ++i)
            if (!snap.region.is_boundary[i])
                CHECK(R.row(i).cwiseAbs().maxCoeff() < 1e-8 * kappa.max());
    }
    SUBCASE("harmonic with kappa = 1 contains global linears") {
        auto kone = CoefficientField::constant(g, 1.0);
        auto snap = build_snapshots(g, kappa, cn, SnapshotSpace::Kind::Harmonic);
        snap = build_snapshots(g, kone, cn, SnapshotSpace::Kind::Harmonic);
        // superposition of the delta traces with linear weights
        Vec lin(snap.region.num_nodes());
        for (int i = 0; i < snap.region.num_nodes(); ++i) {
            auto p = g.node_pos(snap.region.nodes[i]);
            lin[i] = p.x() + 2.0 * p.y();
        }
        Vec coef(snap.count());
        for (int c = 0; c < snap.count(); ++c) {
            auto p = g.node_pos(snap.region.boundary_nodes[c]);
            coef[c] = p.x() + 2.0 * p.y();
        }
        CHECK((snap.columns * coef - lin).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("oversampled solve region grows, boundary neighborhoods do not") {
        // a 5x5 coarse grid has a genuinely interior neighborhood at (2,2)
        GridHierarchy g5(5, 5, 4);
        auto k5 = channels(g5, 1e3, 7);
        SnapshotOpts opts;
        opts.layers = 2;
        auto in = build_snapshots(g5, k5, g5.coarse_node(2, 2),
                                  SnapshotSpace::Kind::HarmonicOversampled, opts);
        CHECK(in.solve_region.num_nodes() > in.region.num_nodes());
        auto bd = build_snapshots(g5, k5, g5.coarse_node(1, 0),
                                  SnapshotSpace::Kind::HarmonicOversampled, opts);
        CHECK(bd.solve_region.num_nodes() == bd.region.num_nodes());
    }
    SUBCASE("randomized determinism") {
        SnapshotOpts opts;
        opts.count = 10;
        opts.seed = 42;
        auto a = build_snapshots(g, kappa, cn, SnapshotSpace::Kind::Randomized,
                                 opts);
        auto b = build_snapshots(g, kappa, cn, SnapshotSpace::Kind::Randomized,
                                 opts);
        CHECK(a.columns == b.columns);
        opts.seed = 43;
        auto c = build_snapshots(g, kappa, cn, SnapshotSpace::Kind::Randomized,
                                 opts);
        CHECK((a.columns - c.columns).cwiseAbs().maxCoeff() > 1e-6);
    }
}

TEST_CASE("spectral weight") {
    GridHierarchy g(4, 4, 4);
    auto kone = CoefficientField::constant(g, 1.0);
    std::vector<Vec> hats;
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn)
        hats.push_back(g.hat_values(cn));

    SUBCASE("kappa = 1 with hats gives the closed-form constant") {
        WeightField w = compute_weight(g, kone, hats);
        double expect = 2.0 / (g.Hx() * g.Hx()) + 2.0 / (g.Hy() * g.Hy());
        CHECK((w.tri.array() - expect).abs().maxCoeff() < 1e-9);
    }
    SUBCASE("nonnegative and linear in kappa") {
        GridHierarchy gh(3, 3, 4);
        auto kappa = channels(gh, 100.0, 3);
        std::vector<Vec> h2;
        for (int cn = 0; cn < gh.num_coarse_nodes(); ++cn)
            h2.push_back(gh.hat_values(cn));
        WeightField w = compute_weight(gh, kappa, h2);
        CHECK(w.tri.minCoeff() >= 0.0);
        CoefficientField k3(gh, 3.0 * kappa.values());
        WeightField w3 = compute_weight(gh, k3, h2);
        CHECK((w3.tri - 3.0 * w.tri).cwiseAbs().maxCoeff() < 1e-9 * w.tri.maxCoeff());
    }
    SUBCASE("ms-basis PoU is kappa-scale invariant") {
        GridHierarchy gh(3, 3, 4);
        auto kappa = channels(gh, 100.0, 3);
        CoefficientField k3(gh, 3.0 * kappa.values());
        auto pou = partition_of_unity(gh, kappa, PouKind::Ms);
        auto pou3 = partition_of_unity(gh, k3, PouKind::Ms);
        for (int cn = 0; cn < gh.num_coarse_nodes(); ++cn)
            CHECK((pou[cn] - pou3[cn]).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("local spectral problem") {
    GridHierarchy g(3, 3, 4);
    auto kappa = channels(g, 1e3, 7);
    auto pou = partition_of_unity(g, kappa, PouKind::Ms);
    WeightField w = compute_weight(g, kappa, pou);
    int cn = g.coarse_node(1, 1);
    auto snap = build_snapshots(g, kappa, cn, SnapshotSpace::Kind::Harmonic);

    SUBCASE("eigenvalues match the dense pencil oracle") {
        SpMat A = assemble_stiffness(g, kappa, snap.region);
        SpMat S = assemble_weighted_mass(
            g, [&](int t) { return w.tri[t]; }, snap.region);
        Mat Ai = snap.columns.transpose() * A * snap.columns;
        Mat Si = snap.columns.transpose() * S * snap.columns;
        auto oracle = generalized_eig(Ai, Si, 5);
        auto frag = spectral_offline(g, kappa, w, snap, 4);
        for (int k = 0; k < 4; ++k)
            CHECK(frag.eigenvalues[k] ==
                  doctest::Approx(oracle.values[k]).epsilon(1e-7));
        CHECK(frag.excluded == doctest::Approx(oracle.values[4]).epsilon(1e-7));
        // ascending and s-normalized
        for (int k = 0; k + 1 < 4; ++k)
            CHECK(frag.eigenvalues[k] <= frag.eigenvalues[k + 1] + 1e-12);
    }
    SUBCASE("taking every snapshot preserves the span") {
        auto frag = spectral_offline(g, kappa, w, snap, snap.count());
        CHECK(static_cast<int>(frag.vectors.size()) ==
              snap.count() - frag.truncated);
        CHECK(std::isinf(frag.excluded));
        // every snapshot column lies in the span of the eigenvectors
        Mat V(snap.region.num_nodes(), frag.vectors.size());
        for (size_t k = 0; k < frag.vectors.size(); ++k)
            for (int i = 0; i < snap.region.num_nodes(); ++i)
                V(i, k) = frag.vectors[k][snap.region.nodes[i]];
        Eigen::ColPivHouseholderQR<Mat> qr(V);
        Vec proj = V * qr.solve(snap.columns.col(0));
        CHECK((proj - snap.columns.col(0)).norm() <
              1e-7 * snap.columns.col(0).norm());
    }
}

TEST_CASE("offline assembly") {
    GridHierarchy g(3, 3, 4);
    auto kone = CoefficientField::constant(g, 1.0);
    std::vector<Vec> hats;
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn)
        hats.push_back(g.hat_values(cn));

    SUBCASE("constant eigenvector with linear PoU recovers the hat") {
        int cn = g.coarse_node(1, 1);
        OfflineFragment frag;
        frag.node = cn;
        frag.eigenvalues = Vec::Zero(1);
        frag.vectors = {Vec::Ones(g.num_fine_nodes())};
        auto off = assemble_offline(g, {frag}, hats,
                                    SnapshotSpace::Kind::Harmonic, 0);
        REQUIRE(off.dof() == 1);
        CHECK((off.columns[0] - g.hat_values(cn)).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("column counts and support confinement") {
        GmsfemOptions opts;
        opts.kind = SnapshotSpace::Kind::Harmonic;
        opts.l = 2;
        auto kappa = channels(g, 100.0, 1);
        auto off = build_offline(g, kappa, opts);
        CHECK(off.dof() == 2 * g.num_coarse_nodes());
        for (int c = 0; c < off.dof(); ++c) {
            Region w = g.neighborhood(off.column_node[c]);
            Vec mask = Vec::Zero(g.num_fine_nodes());
            for (int n : w.nodes) mask[n] = 1.0;
            for (int n = 0; n < g.num_fine_nodes(); ++n)
                if (mask[n] == 0.0) CHECK(off.columns[c][n] == 0.0);
        }
        // eigenvalues ascending, lambda* finite and positive
        CHECK(off.lambda_star() > 0.0);
        CHECK(std::isfinite(off.lambda_star()));
    }
}

TEST_CASE("gmsfem solve") {
    SUBCASE("all-fine with every snapshot is exact") {
        GridHierarchy g(3, 3, 4);
        auto kappa = channels(g, 1e3, 5);
        FineProblem fp(g, kappa);
        GmsfemOptions opts;
        opts.kind = SnapshotSpace::Kind::AllFine;
        opts.l = 0; // whole snapshot space
        auto off = build_offline(g, kappa, opts);
        auto sol = gmsfem_solve(g, off, fp, [](Eigen::Vector2d) { return 1.0; },
                                [](Eigen::Vector2d p) { return p.x(); });
        CHECK(sol.errors.energy_pct < 1e-8);
    }
    SUBCASE("energy error strictly decreases in l on a high-contrast field") {
        GridHierarchy g(5, 5, 6);
        auto kappa = channels(g, 1e4, 11);
        FineProblem fp(g, kappa);
        double prev = std::numeric_limits<double>::infinity();
        for (int l = 1; l <= 4; ++l) {
            GmsfemOptions opts;
            opts.l = l;
            auto off = build_offline(g, kappa, opts);
            auto sol =
                gmsfem_solve(g, off, fp, [](Eigen::Vector2d) { return 0.0; },
                             [](Eigen::Vector2d p) { return p.x(); });
            CHECK(sol.errors.energy_pct < prev);
            prev = sol.errors.energy_pct;
        }
        CHECK(prev < 40.0);
    }
    SUBCASE("randomized snapshots stay close to full harmonic") {
        GridHierarchy g(4, 4, 6);
        auto kappa = channels(g, 1e3, 2);
        FineProblem fp(g, kappa);
        auto f = [](Eigen::Vector2d) { return 1.0; };
        auto bc = [](Eigen::Vector2d p) { return p.x(); };
        GmsfemOptions href;
        href.kind = SnapshotSpace::Kind::Harmonic;
        href.l = 2;
        double harmonic_err =
            gmsfem_solve(g, build_offline(g, kappa, href), fp, f, bc)
                .errors.energy_pct;
        for (uint64_t seed : {1, 2, 3, 4, 5}) {
            GmsfemOptions r;
            r.kind = SnapshotSpace::Kind::Randomized;
            r.l = 2;
            r.buffer = 8;
            r.seed = seed;
            double err = gmsfem_solve(g, build_offline(g, kappa, r), fp, f, bc)
                             .errors.energy_pct;
            CHECK(err <= 1.5 * harmonic_err + 0.5);
        }
    }
    SUBCASE("offline serialization round trip is bit-identical") {
        GridHierarchy g(3, 3, 4);
        auto kappa = channels(g, 100.0, 9);
        FineProblem fp(g, kappa);
        GmsfemOptions opts;
        opts.l = 2;
        opts.seed = 17;
        auto off = build_offline(g, kappa, opts);
        auto f = [](Eigen::Vector2d) { return 1.0; };
        auto bc = [](Eigen::Vector2d p) { return p.y(); };
        auto sol = gmsfem_solve(g, off, fp, f, bc);
        save_offline(off, g, "/tmp/ms_offline_test.bin");
        auto off2 = load_offline("/tmp/ms_offline_test.bin", g);
        CHECK(off2.kind == off.kind);
        CHECK(off2.seed == off.seed);
        CHECK(off2.lambda_star() == off.lambda_star());
        auto sol2 = gmsfem_solve(g, off2, fp, f, bc);
        REQUIRE(sol2.fine.size() == sol.fine.size());
        CHECK(std::memcmp(sol.fine.data(), sol2.fine.data(),
                          sizeof(double) * sol.fine.size()) == 0);
    }
}

TEST_CASE("eigenvalue gap marks high-contrast features") {
    // one dominant channel through the middle neighborhoods: the first
    // eigenvalue is tiny, then a large gap
    GridHierarchy g(4, 4, 6);
    Eigen::VectorXd vals = Eigen::VectorXd::Ones(g.num_fine_cells());
    for (int i = 0; i < g.nxf(); ++i)
        vals[g.fine_cell(i, g.nyf() / 2)] = 1e4; // horizontal channel
    CoefficientField kappa(g, vals);
    auto pou = partition_of_unity(g, kappa, PouKind::Ms);
    WeightField w = compute_weight(g, kappa, pou);
    int cn = g.coarse_node(2, 2); // neighborhood crossed by the channel
    auto snap = build_snapshots(g, kappa, cn, SnapshotSpace::Kind::Harmonic);
    auto frag = spectral_offline(g, kappa, w, snap, 3);
    CHECK(frag.eigenvalues[0] < 0.1 * frag.eigenvalues[1]);
}
