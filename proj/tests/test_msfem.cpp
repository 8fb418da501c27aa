#include "doctest.h"

#include "ms/homogenization.hpp"
#include "ms/msfem.hpp"

#include <Eigen/Dense>

using namespace ms;

namespace {

CoefficientField checkerboard(const GridHierarchy& g, double contrast,
                              int period) {
    FieldSpec spec;
    spec.kind = "checkerboard";
    spec.contrast = contrast;
    spec.period = period;
    return generate_field(spec, g);
}

} // namespace

TEST_CASE("kappa = 1 recovers the hat functions") {
    GridHierarchy g(2, 2, 4);
    auto kappa = CoefficientField::constant(g, 1.0);
    for (auto basis : {ms_basis(g, kappa), ms_basis_oversampled(g, kappa, 2)}) {
        for (int cn = 0; cn < g.num_coarse_nodes(); ++cn)
            CHECK((basis.values[cn] - g.hat_values(cn)).cwiseAbs().maxCoeff() <
                  1e-10);
    }
}

TEST_CASE("partition of unity for heterogeneous fields") {
    // constants are kappa-harmonic and the boundary traces sum to 1
    GridHierarchy g(3, 3, 4);
    FieldSpec spec;
    spec.kind = "channels";
    spec.contrast = 100.0;
    spec.seed = 5;
    auto kappa = generate_field(spec, g);
    auto basis = ms_basis(g, kappa);
    Vec sum = Vec::Zero(g.num_fine_nodes());
    for (const Vec& v : basis.values) sum += v;
    CHECK((sum.array() - 1.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("linear-bc basis: hat traces and confined support") {
    GridHierarchy g(3, 3, 4);
    auto kappa = checkerboard(g, 20.0, 2);
    auto basis = ms_basis(g, kappa);
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn) {
        Vec hat = g.hat_values(cn);
        Region supp = Region::from_tris(g, g.hat_support_tris(cn));
        // equals the hat on every coarse element boundary inside the support
        for (int n : supp.boundary_nodes)
            CHECK(basis.values[cn][n] == doctest::Approx(hat[n]).epsilon(1e-12));
        // on fine nodes lying on any coarse edge the trace is the hat trace
        for (int n = 0; n < g.num_fine_nodes(); ++n) {
            auto p = g.node_pos(n);
            double sx = p.x() * g.nx(), sy = p.y() * g.ny();
            bool on_coarse_line =
                std::abs(sx - std::round(sx)) < 1e-12 ||
                std::abs(sy - std::round(sy)) < 1e-12 ||
                std::abs((sx - std::floor(sx)) - (sy - std::floor(sy))) < 1e-12;
            if (on_coarse_line)
                CHECK(basis.values[cn][n] ==
                      doctest::Approx(hat[n]).epsilon(1e-10));
        }
        // support confined to the hat support
        Vec mask = Vec::Zero(g.num_fine_nodes());
        for (int n : supp.nodes) mask[n] = 1.0;
        for (int n = 0; n < g.num_fine_nodes(); ++n)
            if (mask[n] == 0.0) CHECK(basis.values[cn][n] == 0.0);
        // nodal delta property at coarse nodes
        for (int cm = 0; cm < g.num_coarse_nodes(); ++cm) {
            auto [I, J] = g.coarse_node_coords(cm);
            int fn = g.fine_node(I * g.refine(), J * g.refine());
            CHECK(basis.values[cn][fn] ==
                  doctest::Approx(cn == cm ? 1.0 : 0.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("oversampled combination is the identity for constant kappa") {
    GridHierarchy g(3, 3, 4);
    auto kappa = CoefficientField::constant(g, 2.0);
    for (int ct = 0; ct < g.num_coarse_tris(); ++ct) {
        Mat C = oversample_combination(g, kappa, ct, 2);
        CHECK((C - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("oversampling does not worsen the coarse error") {
    // periodic field with eps/H = 1/8
    GridHierarchy g(8, 8, 16);
    auto kappa = checkerboard(g, 10.0, 1);
    FineProblem fp(g, kappa);
    auto f = [](Eigen::Vector2d) { return 1.0; };
    auto bc = [](Eigen::Vector2d p) { return p.x(); };
    auto lin = msfem_solve(g, ms_basis(g, kappa), fp, f, bc);
    auto ovs = msfem_solve(g, ms_basis_oversampled(g, kappa, g.default_layers()),
                           fp, f, bc);
    CHECK(ovs.errors.energy_pct <= lin.errors.energy_pct + 1e-9);
    CHECK(lin.errors.energy_pct < 50.0);
}

TEST_CASE("coarse stiffness is consistent with the homogenized stiffness") {
    // resolved periodic laminate, eps/H = 1/16
    GridHierarchy g(4, 4, 32);
    FieldSpec spec;
    spec.kind = "laminate";
    spec.contrast = 4.0;
    spec.period = 1;
    auto kappa = generate_field(spec, g);
    FineProblem fp(g, kappa);
    Mat A_ms = Mat(msfem_coarse_stiffness(g, ms_basis(g, kappa), fp));
    Mat A_hom = Mat(coarse_tensor_stiffness(g, homogenize_all(g, kappa, 0)));
    for (int i = 0; i < A_hom.rows(); ++i)
        for (int j = 0; j < A_hom.cols(); ++j) {
            double m = std::max(std::abs(A_ms(i, j)), std::abs(A_hom(i, j)));
            if (m < 1e-12) continue;
            CHECK(std::abs(A_ms(i, j) - A_hom(i, j)) <= 0.05 * m);
        }
}

namespace {

// P1 evaluation of a nodal function of grid g at an arbitrary point
double p1_eval(const GridHierarchy& g, const Vec& u, Eigen::Vector2d p) {
    double x = p.x() / g.hx(), y = p.y() / g.hy();
    int i = std::min(static_cast<int>(x), g.nxf() - 1);
    int j = std::min(static_cast<int>(y), g.nyf() - 1);
    double xi = x - i, eta = y - j;
    double v00 = u[g.fine_node(i, j)], v10 = u[g.fine_node(i + 1, j)];
    double v01 = u[g.fine_node(i, j + 1)], v11 = u[g.fine_node(i + 1, j + 1)];
    if (xi >= eta) return (1 - xi) * v00 + (xi - eta) * v10 + eta * v11;
    return (1 - eta) * v00 + xi * v11 + (eta - xi) * v01;
}

} // namespace

TEST_CASE("refining the fine mesh decreases the error") {
    // refine 5 -> 10 with the same physical field, both errors measured
    // against the refine-10 reference
    GridHierarchy g5(4, 4, 5), g10(4, 4, 10);
    FieldSpec spec;
    spec.kind = "laminate";
    spec.contrast = 10.0;
    spec.period = 1;
    auto k5 = generate_field(spec, g5);
    spec.period = 2;
    auto k10 = generate_field(spec, g10);
    FineProblem fp5(g5, k5), fp10(g10, k10);
    auto f = [](Eigen::Vector2d) { return 1.0; };
    auto bc = [](Eigen::Vector2d p) { return p.x() + p.y(); };
    auto s5 = msfem_solve(g5, ms_basis(g5, k5), fp5, f, bc);
    auto s10 = msfem_solve(g10, ms_basis(g10, k10), fp10, f, bc);
    Vec ref10 = fp10.solve(f, bc);
    Vec u5on10(g10.num_fine_nodes());
    for (int n = 0; n < g10.num_fine_nodes(); ++n)
        u5on10[n] = p1_eval(g5, s5.fine, g10.node_pos(n));
    auto e5 = relative_errors(fp10, u5on10, ref10);
    CHECK(s10.errors.energy_pct < e5.energy_pct);
}

TEST_CASE("coarse solution is the a-orthogonal projection") {
    GridHierarchy g(4, 4, 4);
    auto kappa = checkerboard(g, 50.0, 2);
    FineProblem fp(g, kappa);
    auto f = [](Eigen::Vector2d p) { return 1.0 + p.y(); };
    auto bc = [](Eigen::Vector2d p) { return p.x(); };
    auto basis = ms_basis(g, kappa);
    auto sol = msfem_solve(g, basis, fp, f, bc);
    Vec ref = fp.solve(f, bc);
    SpMat R = basis.columns(g);
    Vec resid = R.transpose() * (fp.stiffness() * (ref - sol.fine));
    for (int cn = 0; cn < g.num_coarse_nodes(); ++cn)
        if (!g.coarse_node_on_boundary(cn)) CHECK(std::abs(resid[cn]) < 1e-8);
}
