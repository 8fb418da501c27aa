#include "doctest.h"

#include "ms/dg.hpp"

#include <Eigen/Dense>

using namespace ms;

namespace {

CoefficientField two_channels(const GridHierarchy& g, double contrast) {
    Vec cells = Vec::Ones(g.num_fine_cells());
    int nx = g.nxf(), ny = g.nyf();
    int rowA = ny / 3, rowB = 2 * ny / 3;
    for (int i = 0; i < nx; ++i) {
        if (i <= 2 * nx / 3) cells[g.fine_cell(i, rowA)] = contrast;
        if (i >= nx / 3) cells[g.fine_cell(i, rowB)] = contrast;
    }
    return CoefficientField(g, cells);
}

// least-squares residual of target against the span of the columns
double span_residual(const Mat& cols, const Vec& target) {
    Vec c = cols.colPivHouseholderQr().solve(target);
    return (cols * c - target).norm() / std::max(target.norm(), 1e-300);
}

} // namespace

TEST_CASE("dg snapshots: linears, POD dedup and degenerate mode") {
    GridHierarchy g(3, 3, 4);
    auto kappa = CoefficientField::constant(g, 1.0);
    int block = g.coarse_block(1, 1);
    auto snap = dg_snapshots(g, kappa, block, 2);
    // restriction collapses dependent columns
    CHECK(snap.raw_count > snap.count());
    CHECK(snap.truncated == snap.raw_count - snap.count());
    CHECK(snap.count() <= snap.region.num_nodes());
    // restricted span contains the global linears for constant kappa
    Mat restr(snap.region.num_nodes(), snap.count());
    for (int i = 0; i < snap.region.num_nodes(); ++i)
        restr.row(i) = snap.columns.row(
            snap.solve_region.local(snap.region.nodes[i]));
    for (auto lin : {+[](Eigen::Vector2d p) { return p.x(); },
                     +[](Eigen::Vector2d p) { return 1.0 - p.y(); }}) {
        Vec target(snap.region.num_nodes());
        for (int i = 0; i < snap.region.num_nodes(); ++i)
            target[i] = lin(g.node_pos(snap.region.nodes[i]));
        CHECK(span_residual(restr, target) < 1e-7);
    }
    // layers = 0: snapshots live on K itself, none dropped
    auto flat = dg_snapshots(g, kappa, block, 0);
    CHECK(flat.solve_region.num_nodes() == flat.region.num_nodes());
    CHECK(flat.count() == flat.raw_count);
    CHECK(flat.truncated == 0);
}

TEST_CASE("dg spectral problem") {
    GridHierarchy g(2, 2, 3);
    auto kappa = two_channels(g, 20.0);
    auto snap = dg_snapshots(g, kappa, g.coarse_block(0, 0), 1);
    auto frag = dg_spectral(g, kappa, snap, snap.count());
    for (int k = 0; k < frag.eigenvalues.size(); ++k) {
        CHECK(frag.eigenvalues[k] >= -1e-9);
        if (k > 0) CHECK(frag.eigenvalues[k] >= frag.eigenvalues[k - 1]);
    }
    // full selection preserves the restricted span
    Mat restr(snap.region.num_nodes(), snap.count());
    for (int i = 0; i < snap.region.num_nodes(); ++i)
        restr.row(i) = snap.columns.row(
            snap.solve_region.local(snap.region.nodes[i]));
    Mat basis(snap.region.num_nodes(), frag.vectors.size());
    for (size_t k = 0; k < frag.vectors.size(); ++k)
        basis.col(k) = frag.vectors[k];
    for (int k = 0; k < restr.cols(); ++k)
        CHECK(span_residual(basis, restr.col(k)) < 1e-6);

    // 2x2 closed form on a truncated snapshot pair
    DgSnapshotSpace tiny = snap;
    tiny.columns = snap.columns.leftCols(2);
    auto tf = dg_spectral(g, kappa, tiny, 2);
    SpMat Ap = assemble_stiffness(g, kappa, tiny.solve_region);
    Mat A = tiny.columns.transpose() * Ap * tiny.columns;
    Mat R(tiny.region.num_nodes(), 2);
    for (int i = 0; i < tiny.region.num_nodes(); ++i)
        R.row(i) = tiny.columns.row(
            tiny.solve_region.local(tiny.region.nodes[i]));
    Mat S = R.transpose() * dg_boundary_mass(g, kappa, tiny.region) * R;
    double a = S.determinant();
    double b = -(A(0, 0) * S(1, 1) + A(1, 1) * S(0, 0) - A(0, 1) * S(1, 0) -
                 A(1, 0) * S(0, 1));
    double c = A.determinant();
    double disc = std::sqrt(std::max(0.0, b * b - 4 * a * c));
    CHECK(tf.eigenvalues[0] ==
          doctest::Approx((-b - disc) / (2 * a)).epsilon(1e-6));
    CHECK(tf.eigenvalues[1] ==
          doctest::Approx((-b + disc) / (2 * a)).epsilon(1e-6));
}

TEST_CASE("ipdg matrix is symmetric") {
    GridHierarchy g(3, 3, 4);
    auto kappa = two_channels(g, 1e3);
    auto off = build_dg_offline(g, kappa, 3, 1);
    auto sys = ipdg_assemble(g, kappa, off,
                             [](Eigen::Vector2d) { return 1.0; },
                             [](Eigen::Vector2d p) { return p.x(); });
    double scale = sys.A.cwiseAbs().maxCoeff();
    CHECK((sys.A - sys.A.transpose()).cwiseAbs().maxCoeff() < 1e-12 * scale);
}

TEST_CASE("ipdg exactness for kappa = 1 with linears in the space") {
    GridHierarchy g(3, 3, 4);
    auto kappa = CoefficientField::constant(g, 1.0);
    FineProblem fp(g, kappa);
    auto off = build_dg_offline(g, kappa, 0, 1); // full snapshot span
    auto sol = ipdg_solve(g, kappa, off, fp, [](Eigen::Vector2d) { return 0.0; },
                          [](Eigen::Vector2d p) { return p.x(); });
    CHECK(sol.energy_pct < 1e-8 * 100);
    for (size_t b = 0; b < off.regions.size(); ++b)
        for (int i = 0; i < off.regions[b].num_nodes(); ++i) {
            double x = g.node_pos(off.regions[b].nodes[i]).x();
            CHECK(std::abs(sol.local[b][i] - x) < 1e-8);
        }

    // constant data: zero jumps everywhere
    auto cs = ipdg_solve(g, kappa, off, fp, [](Eigen::Vector2d) { return 0.0; },
                         [](Eigen::Vector2d) { return 3.5; });
    CHECK(cs.jump < 1e-8);
}

TEST_CASE("penalty monotonicity and convergence toward the conforming limit") {
    GridHierarchy g(3, 3, 4);
    auto kappa = two_channels(g, 100.0);
    FineProblem fp(g, kappa);
    auto f = [](Eigen::Vector2d) { return 1.0; };
    auto bc = [](Eigen::Vector2d) { return 0.0; };

    auto lo = build_dg_offline(g, kappa, 4, 1, 8.0);
    auto hi = build_dg_offline(g, kappa, 4, 1, 16.0);
    CHECK(ipdg_solve(g, kappa, hi, fp, f, bc).jump <=
          ipdg_solve(g, kappa, lo, fp, f, bc).jump + 1e-12);

    // with f = 0 the conforming solution is blockwise harmonic, so the full
    // snapshot space captures it and the gap shrinks as the penalty grows
    auto zero = [](Eigen::Vector2d) { return 0.0; };
    auto gbc = [](Eigen::Vector2d p) { return p.x() * p.y(); };
    std::vector<double> gaps;
    for (double gamma : {10.0, 100.0, 1000.0}) {
        auto off = build_dg_offline(g, kappa, 0, 1, gamma);
        gaps.push_back(ipdg_solve(g, kappa, off, fp, zero, gbc).l2_pct);
    }
    CHECK(gaps[1] < gaps[0]);
    CHECK(gaps[2] < gaps[1]);
}

TEST_CASE("error decreases with more basis functions") {
    GridHierarchy g(4, 4, 5);
    auto kappa = two_channels(g, 1e4);
    FineProblem fp(g, kappa);
    auto f = [](Eigen::Vector2d) { return 1.0; };
    auto bc = [](Eigen::Vector2d) { return 0.0; };
    std::vector<double> errs;
    for (int l = 1; l <= 4; ++l) {
        auto off = build_dg_offline(g, kappa, l, 1);
        errs.push_back(ipdg_solve(g, kappa, off, fp, f, bc).energy_pct);
    }
    CHECK(errs.back() < errs.front());
}

TEST_CASE("penalty below the coercivity threshold is flagged") {
    GridHierarchy g(3, 3, 4);
    auto kappa = two_channels(g, 100.0);
    FineProblem fp(g, kappa);
    auto off = build_dg_offline(g, kappa, 4, 1, 1e-6);
    CHECK_THROWS_AS(ipdg_solve(g, kappa, off, fp,
                               [](Eigen::Vector2d) { return 1.0; },
                               [](Eigen::Vector2d) { return 0.0; }),
                    std::runtime_error);
}
