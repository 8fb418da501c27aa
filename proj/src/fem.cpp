#include "ms/fem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace ms {

TriGeometry tri_geometry(const GridHierarchy& g, int t) {
    auto nd = g.tri_nodes(t);
    Eigen::Vector2d p0 = g.node_pos(nd[0]), p1 = g.node_pos(nd[1]),
                    p2 = g.node_pos(nd[2]);
    double det = (p1 - p0).x() * (p2 - p0).y() - (p2 - p0).x() * (p1 - p0).y();
    TriGeometry geo;
    geo.area = 0.5 * std::abs(det);
    geo.grad[0] = Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / det;
    geo.grad[1] = Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / det;
    geo.grad[2] = Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / det;
    return geo;
}

Eigen::Vector2d tri_gradient(const GridHierarchy& g, int t,
                             const std::array<double, 3>& nodal) {
    auto geo = tri_geometry(g, t);
    return nodal[0] * geo.grad[0] + nodal[1] * geo.grad[1] +
           nodal[2] * geo.grad[2];
}

namespace {

template <typename CellCoef>
SpMat assemble_stiffness_impl(const GridHierarchy& g, CellCoef coef,
                              const Region& region) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(region.tris.size() * 9);
    for (int t : region.tris) {
        auto nd = g.tri_nodes(t);
        auto geo = tri_geometry(g, t);
        double k = coef(t);
        int loc[3] = {region.local(nd[0]), region.local(nd[1]),
                      region.local(nd[2])};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                trip.emplace_back(loc[a], loc[b],
                                  k * geo.area * geo.grad[a].dot(geo.grad[b]));
    }
    SpMat A(region.num_nodes(), region.num_nodes());
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

} // namespace

SpMat assemble_stiffness(const GridHierarchy& g, const CoefficientField& kappa,
                         const Region& region) {
    return assemble_stiffness_impl(
        g, [&](int t) { return kappa.tri(t); }, region);
}

SpMat assemble_mass(const GridHierarchy& g, const Region& region) {
    return assemble_weighted_mass(
        g, [](int) { return 1.0; }, region);
}

SpMat assemble_weighted_mass(const GridHierarchy& g,
                             const std::function<double(int)>& tri_weight,
                             const Region& region) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(region.tris.size() * 9);
    for (int t : region.tris) {
        auto nd = g.tri_nodes(t);
        double w = tri_weight(t) * g.tri_area() / 12.0;
        int loc[3] = {region.local(nd[0]), region.local(nd[1]),
                      region.local(nd[2])};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                trip.emplace_back(loc[a], loc[b], w * (a == b ? 2.0 : 1.0));
    }
    SpMat M(region.num_nodes(), region.num_nodes());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

DirichletSolver::DirichletSolver(const GridHierarchy& g,
                                 const CoefficientField& kappa,
                                 const Region& region)
    : region_(&region) {
    if (region.boundary_nodes.empty())
        throw std::runtime_error("DirichletSolver: region has no boundary");
    A_ = assemble_stiffness(g, kappa, region);
    for (int i = 0; i < region.num_nodes(); ++i)
        (region.is_boundary[i] ? boundary_ : interior_).push_back(i);

    std::vector<int> pos(region.num_nodes(), -1);
    for (int i = 0; i < static_cast<int>(interior_.size()); ++i)
        pos[interior_[i]] = i;
    std::vector<int> bpos(region.num_nodes(), -1);
    for (int i = 0; i < static_cast<int>(boundary_.size()); ++i)
        bpos[boundary_[i]] = i;

    std::vector<Eigen::Triplet<double>> tii, tib;
    for (int col = 0; col < A_.outerSize(); ++col)
        for (SpMat::InnerIterator it(A_, col); it; ++it) {
            int r = static_cast<int>(it.row()), c = col;
            if (pos[r] < 0) continue;
            if (pos[c] >= 0)
                tii.emplace_back(pos[r], pos[c], it.value());
            else
                tib.emplace_back(pos[r], bpos[c], it.value());
        }
    SpMat A_ii(interior_.size(), interior_.size());
    A_ii.setFromTriplets(tii.begin(), tii.end());
    A_ib_.resize(interior_.size(), boundary_.size());
    A_ib_.setFromTriplets(tib.begin(), tib.end());
    ldlt_.compute(A_ii);
    if (ldlt_.info() != Eigen::Success)
        throw std::runtime_error("DirichletSolver: interior factorization failed");
}

Vec DirichletSolver::solve(const Vec& boundary_values, const Vec& rhs) const {
    if (boundary_values.size() != static_cast<Eigen::Index>(boundary_.size()))
        throw std::invalid_argument("DirichletSolver: boundary value size");
    Vec rhs_i = Vec::Zero(interior_.size());
    if (rhs.size() > 0) {
        if (rhs.size() != region_->num_nodes())
            throw std::invalid_argument("DirichletSolver: rhs size");
        for (size_t i = 0; i < interior_.size(); ++i)
            rhs_i[i] = rhs[interior_[i]];
    }
    rhs_i -= A_ib_ * boundary_values;
    Vec u_i = ldlt_.solve(rhs_i);
    Vec u = Vec::Zero(region_->num_nodes());
    for (size_t i = 0; i < interior_.size(); ++i) u[interior_[i]] = u_i[i];
    for (size_t i = 0; i < boundary_.size(); ++i)
        u[boundary_[i]] = boundary_values[i];
    return u;
}

Vec DirichletSolver::solve_zero_bc(const Vec& rhs_local) const {
    return solve(Vec::Zero(boundary_.size()), rhs_local);
}

FineProblem::FineProblem(const GridHierarchy& g, const CoefficientField& kappa)
    : g_(&g), region_(g.full_region()) {
    solver_ = std::make_unique<DirichletSolver>(g, kappa, region_);
    M_ = assemble_mass(g, region_);
}

Vec FineProblem::interpolate(
    const std::function<double(Eigen::Vector2d)>& f) const {
    Vec v(g_->num_fine_nodes());
    for (int n = 0; n < g_->num_fine_nodes(); ++n) v[n] = f(g_->node_pos(n));
    return v;
}

Vec FineProblem::boundary_values(
    const std::function<double(Eigen::Vector2d)>& bc) const {
    const auto& bnd = region_.boundary_nodes;
    Vec v(bnd.size());
    for (size_t i = 0; i < bnd.size(); ++i) v[i] = bc(g_->node_pos(bnd[i]));
    return v;
}

Vec FineProblem::solve(const std::function<double(Eigen::Vector2d)>& f,
                       const std::function<double(Eigen::Vector2d)>& bc) const {
    return solve_nodal(interpolate(f), boundary_values(bc));
}

Vec FineProblem::solve_nodal(const Vec& f_nodal, const Vec& bc_boundary) const {
    return solver_->solve(bc_boundary, M_ * f_nodal);
}

double FineProblem::energy_norm(const Vec& u) const {
    return std::sqrt(std::max(0.0, u.dot(stiffness() * u)));
}

double FineProblem::l2_norm(const Vec& u) const {
    return std::sqrt(std::max(0.0, u.dot(M_ * u)));
}

EigenDecomposition generalized_eig(const Mat& A, const Mat& S, int k) {
    const int n = static_cast<int>(A.rows());
    if (k > n) throw std::invalid_argument("generalized_eig: k > dim");
    Eigen::LLT<Mat> llt(S);
    Mat S_used = S;
    if (llt.info() != Eigen::Success) {
        double shift = 1e-12 * S.trace() / n;
        S_used = S + shift * Mat::Identity(n, n);
        llt.compute(S_used);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error(
                "generalized_eig: S numerically singular beyond regularization");
    }
    // reduce to a standard symmetric problem: L^-1 A L^-T
    Mat L = llt.matrixL();
    Mat B = llt.matrixL().solve(A.transpose()).transpose();
    B = llt.matrixL().solve(B);
    B = 0.5 * (B + B.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(B);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("generalized_eig: eigensolver failed");
    EigenDecomposition out;
    out.values = es.eigenvalues().head(k);
    Mat Y = es.eigenvectors().leftCols(k);
    out.vectors = L.transpose().triangularView<Eigen::Upper>().solve(Y);
    return out;
}

ErrorPair relative_errors(const FineProblem& fp, const Vec& u, const Vec& ref) {
    Vec d = u - ref;
    double er = fp.energy_norm(ref), lr = fp.l2_norm(ref);
    ErrorPair e;
    e.energy_pct = er > 0 ? 100.0 * fp.energy_norm(d) / er : 0.0;
    e.l2_pct = lr > 0 ? 100.0 * fp.l2_norm(d) / lr : 0.0;
    return e;
}

} // namespace ms
