#include "ms/mixed.hpp"

#include <Eigen/Dense>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace ms {

namespace {

// the four flux dofs of a fine cell: left, right, bottom, top
std::array<int, 4> cell_edges(const GridHierarchy& g, int c) {
    auto [i, j] = g.cell_coords(c);
    return {mixed_vedge(g, i, j), mixed_vedge(g, i + 1, j),
            mixed_hedge(g, i, j), mixed_hedge(g, i, j + 1)};
}

bool edge_on_domain_boundary(const GridHierarchy& g, int e) {
    int nv = mixed_num_vedges(g);
    if (e < nv) {
        int i = e % (g.nxf() + 1);
        return i == 0 || i == g.nxf();
    }
    int j = (e - nv) / g.nxf();
    return j == 0 || j == g.nyf();
}

// signed divergence integrals: int_c div(v) = hy (vR - vL) + hx (vT - vB)
void add_div_row(const GridHierarchy& g, int c, int row,
                 std::vector<Eigen::Triplet<double>>& trip) {
    auto e = cell_edges(g, c);
    trip.emplace_back(row, e[0], -g.hy());
    trip.emplace_back(row, e[1], g.hy());
    trip.emplace_back(row, e[2], -g.hx());
    trip.emplace_back(row, e[3], g.hx());
}

} // namespace

std::vector<int> all_fine_cells(const GridHierarchy& g) {
    std::vector<int> cells(g.num_fine_cells());
    for (int c = 0; c < g.num_fine_cells(); ++c) cells[c] = c;
    return cells;
}

SpMat mixed_mass(const GridHierarchy& g, const CoefficientField& kappa,
                 const std::vector<int>& cells) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(cells.size() * 8);
    double scale = g.hx() * g.hy() / 3.0;
    for (int c : cells) {
        auto e = cell_edges(g, c);
        double w = scale / kappa.cell(c);
        for (int pair = 0; pair < 2; ++pair) {
            int a = e[2 * pair], b = e[2 * pair + 1];
            trip.emplace_back(a, a, w);
            trip.emplace_back(b, b, w);
            trip.emplace_back(a, b, 0.5 * w);
            trip.emplace_back(b, a, 0.5 * w);
        }
    }
    SpMat M(mixed_num_fluxes(g), mixed_num_fluxes(g));
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

Vec mixed_divergence(const GridHierarchy& g, const Vec& flux) {
    Vec div(g.num_fine_cells());
    for (int c = 0; c < g.num_fine_cells(); ++c) {
        auto e = cell_edges(g, c);
        div[c] = (flux[e[1]] - flux[e[0]]) / g.hx() +
                 (flux[e[3]] - flux[e[2]]) / g.hy();
    }
    return div;
}

FineMixedProblem::FineMixedProblem(const GridHierarchy& g,
                                   const CoefficientField& kappa)
    : g_(&g) {
    M_ = mixed_mass(g, kappa, all_fine_cells(g));
    std::vector<Eigen::Triplet<double>> btrip;
    for (int c = 0; c < g.num_fine_cells(); ++c) add_div_row(g, c, c, btrip);
    B_ = SpMat(g.num_fine_cells(), mixed_num_fluxes(g));
    B_.setFromTriplets(btrip.begin(), btrip.end());

    for (int e = 0; e < mixed_num_fluxes(g); ++e)
        (edge_on_domain_boundary(g, e) ? boundary_ : interior_).push_back(e);

    // saddle system over (interior fluxes, cell pressures, mean multiplier)
    int ni = static_cast<int>(interior_.size());
    int nc = g.num_fine_cells();
    std::vector<int> pos(mixed_num_fluxes(g), -1);
    for (int k = 0; k < ni; ++k) pos[interior_[k]] = k;
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < ni; ++k)
        for (SpMat::InnerIterator it(M_, interior_[k]); it; ++it)
            if (pos[it.row()] >= 0) trip.emplace_back(pos[it.row()], k, it.value());
    for (int c = 0; c < nc; ++c) {
        auto e = cell_edges(g, c);
        double coef[4] = {-g.hy(), g.hy(), -g.hx(), g.hx()};
        for (int q = 0; q < 4; ++q) {
            if (pos[e[q]] < 0) continue;
            trip.emplace_back(pos[e[q]], ni + c, -coef[q]); // -B^T block
            trip.emplace_back(ni + c, pos[e[q]], -coef[q]); // -B block
        }
        double area = g.hx() * g.hy();
        trip.emplace_back(ni + c, ni + nc, area);
        trip.emplace_back(ni + nc, ni + c, area);
    }
    SpMat K(ni + nc + 1, ni + nc + 1);
    K.setFromTriplets(trip.begin(), trip.end());
    lu_.compute(K);
    if (lu_.info() != Eigen::Success)
        throw std::runtime_error("FineMixedProblem: factorization failed");
}

Vec FineMixedProblem::cell_source(
    const std::function<double(Eigen::Vector2d)>& f) const {
    const GridHierarchy& g = *g_;
    Vec F(g.num_fine_cells());
    for (int c = 0; c < g.num_fine_cells(); ++c) {
        auto [i, j] = g.cell_coords(c);
        Eigen::Vector2d mid((i + 0.5) * g.hx(), (j + 0.5) * g.hy());
        F[c] = f(mid) * g.hx() * g.hy();
    }
    return F;
}

Vec FineMixedProblem::boundary_flux(
    const std::function<double(Eigen::Vector2d, Eigen::Vector2d)>& bc) const {
    const GridHierarchy& g = *g_;
    Vec v = Vec::Zero(mixed_num_fluxes(g));
    for (int j = 0; j < g.nyf(); ++j) {
        Eigen::Vector2d left(0.0, (j + 0.5) * g.hy());
        Eigen::Vector2d right(1.0, (j + 0.5) * g.hy());
        v[mixed_vedge(g, 0, j)] = -bc(left, {-1.0, 0.0});
        v[mixed_vedge(g, g.nxf(), j)] = bc(right, {1.0, 0.0});
    }
    for (int i = 0; i < g.nxf(); ++i) {
        Eigen::Vector2d bot((i + 0.5) * g.hx(), 0.0);
        Eigen::Vector2d top((i + 0.5) * g.hx(), 1.0);
        v[mixed_hedge(g, i, 0)] = -bc(bot, {0.0, -1.0});
        v[mixed_hedge(g, i, g.nyf())] = bc(top, {0.0, 1.0});
    }
    return v;
}

MixedSolution FineMixedProblem::solve_cellwise(const Vec& cell_source,
                                               const Vec& boundary_flux) const {
    const GridHierarchy& g = *g_;
    // compatibility: total source equals outward boundary flux
    double out = 0.0;
    for (int j = 0; j < g.nyf(); ++j)
        out += g.hy() * (boundary_flux[mixed_vedge(g, g.nxf(), j)] -
                         boundary_flux[mixed_vedge(g, 0, j)]);
    for (int i = 0; i < g.nxf(); ++i)
        out += g.hx() * (boundary_flux[mixed_hedge(g, i, g.nyf())] -
                         boundary_flux[mixed_hedge(g, i, 0)]);
    double total = cell_source.sum();
    double scale = cell_source.cwiseAbs().sum() + std::abs(out) + 1.0;
    if (std::abs(total - out) > 1e-8 * scale)
        throw std::invalid_argument(
            "FineMixedProblem: incompatible data (source " +
            std::to_string(total) + " vs boundary flux " + std::to_string(out) +
            ")");

    int ni = static_cast<int>(interior_.size());
    int nc = g.num_fine_cells();
    Vec vb = Vec::Zero(mixed_num_fluxes(g));
    for (int e : boundary_) vb[e] = boundary_flux[e];
    Vec mb = M_ * vb;
    Vec bb = B_ * vb;
    Vec rhs = Vec::Zero(ni + nc + 1);
    for (int k = 0; k < ni; ++k) rhs[k] = -mb[interior_[k]];
    for (int c = 0; c < nc; ++c) rhs[ni + c] = -(cell_source[c] - bb[c]);
    Vec x = lu_.solve(rhs);

    MixedSolution sol;
    sol.flux = vb;
    for (int k = 0; k < ni; ++k) sol.flux[interior_[k]] = x[k];
    sol.pressure = x.segment(ni, nc);
    sol.pressure.array() -= sol.pressure.mean();
    return sol;
}

MixedSolution FineMixedProblem::solve(
    const std::function<double(Eigen::Vector2d)>& f,
    const std::function<double(Eigen::Vector2d, Eigen::Vector2d)>& flux_bc)
    const {
    return solve_cellwise(cell_source(f), boundary_flux(flux_bc));
}

double FineMixedProblem::velocity_norm(const Vec& flux) const {
    return std::sqrt(std::max(0.0, flux.dot(M_ * flux)));
}

std::vector<CoarseEdge> mixed_coarse_edges(const GridHierarchy& g) {
    std::vector<CoarseEdge> edges;
    for (int J = 0; J < g.ny(); ++J)
        for (int I = 0; I <= g.nx(); ++I) {
            CoarseEdge e;
            e.id = static_cast<int>(edges.size());
            e.vertical = true;
            e.I = I;
            e.J = J;
            e.boundary = I == 0 || I == g.nx();
            edges.push_back(e);
        }
    for (int J = 0; J <= g.ny(); ++J)
        for (int I = 0; I < g.nx(); ++I) {
            CoarseEdge e;
            e.id = static_cast<int>(edges.size());
            e.vertical = false;
            e.I = I;
            e.J = J;
            e.boundary = J == 0 || J == g.ny();
            edges.push_back(e);
        }
    return edges;
}

namespace {

// mixed Neumann solve on one coarse block with every boundary flux
// prescribed; factorized once, reused across the snapshots of its edges
class BlockMixedSolver {
  public:
    BlockMixedSolver(const GridHierarchy& g, const CoefficientField& kappa,
                     int block)
        : g_(&g), cells_(g.block_fine_cells(block)) {
        std::map<int, int> count;
        for (int c : cells_)
            for (int e : cell_edges(g, c)) ++count[e];
        for (auto [e, n] : count) {
            local_[e] = static_cast<int>(edges_.size());
            edges_.push_back(e);
            if (n == 2)
                interior_.push_back(local_[e]);
            else
                boundary_.push_back(local_[e]);
        }
        int ne = static_cast<int>(edges_.size());
        int nc = static_cast<int>(cells_.size());
        SpMat Mg = mixed_mass(g, kappa, cells_);
        std::vector<Eigen::Triplet<double>> mt, bt;
        for (int k = 0; k < ne; ++k)
            for (SpMat::InnerIterator it(Mg, edges_[k]); it; ++it)
                mt.emplace_back(local_.at(static_cast<int>(it.row())), k,
                                it.value());
        M_ = SpMat(ne, ne);
        M_.setFromTriplets(mt.begin(), mt.end());
        for (int ci = 0; ci < nc; ++ci) {
            auto e = cell_edges(g, cells_[ci]);
            double coef[4] = {-g.hy(), g.hy(), -g.hx(), g.hx()};
            for (int q = 0; q < 4; ++q)
                bt.emplace_back(ci, local_.at(e[q]), coef[q]);
        }
        B_ = SpMat(nc, ne);
        B_.setFromTriplets(bt.begin(), bt.end());

        int ni = static_cast<int>(interior_.size());
        std::vector<int> pos(ne, -1);
        for (int k = 0; k < ni; ++k) pos[interior_[k]] = k;
        std::vector<Eigen::Triplet<double>> kt;
        for (int k = 0; k < ni; ++k)
            for (SpMat::InnerIterator it(M_, interior_[k]); it; ++it)
                if (pos[it.row()] >= 0)
                    kt.emplace_back(pos[it.row()], k, it.value());
        for (int ci = 0; ci < nc; ++ci) {
            auto e = cell_edges(g, cells_[ci]);
            double coef[4] = {-g.hy(), g.hy(), -g.hx(), g.hx()};
            for (int q = 0; q < 4; ++q) {
                int le = local_.at(e[q]);
                if (pos[le] < 0) continue;
                kt.emplace_back(pos[le], ni + ci, -coef[q]);
                kt.emplace_back(ni + ci, pos[le], -coef[q]);
            }
            double area = g.hx() * g.hy();
            kt.emplace_back(ni + ci, ni + nc, area);
            kt.emplace_back(ni + nc, ni + ci, area);
        }
        SpMat K(ni + nc + 1, ni + nc + 1);
        K.setFromTriplets(kt.begin(), kt.end());
        lu_.compute(K);
        if (lu_.info() != Eigen::Success)
            throw std::runtime_error("edge_snapshots: local factorization "
                                     "failed on block " +
                                     std::to_string(block));
    }

    // boundary_values maps global flux id -> prescribed value; alpha is the
    // constant divergence over the block. Returns (global flux id, value)
    // pairs for the block interior.
    std::vector<std::pair<int, double>>
    solve(const std::map<int, double>& boundary_values, double alpha) const {
        int ne = static_cast<int>(edges_.size());
        int ni = static_cast<int>(interior_.size());
        int nc = static_cast<int>(cells_.size());
        Vec vb = Vec::Zero(ne);
        for (auto [e, val] : boundary_values) {
            auto it = local_.find(e);
            if (it != local_.end()) vb[it->second] = val;
        }
        Vec mb = M_ * vb;
        Vec bb = B_ * vb;
        double area = g_->hx() * g_->hy();
        Vec rhs = Vec::Zero(ni + nc + 1);
        for (int k = 0; k < ni; ++k) rhs[k] = -mb[interior_[k]];
        for (int ci = 0; ci < nc; ++ci)
            rhs[ni + ci] = -(alpha * area - bb[ci]);
        Vec x = lu_.solve(rhs);
        std::vector<std::pair<int, double>> out;
        out.reserve(ni);
        for (int k = 0; k < ni; ++k)
            out.emplace_back(edges_[interior_[k]], x[k]);
        return out;
    }

  private:
    const GridHierarchy* g_;
    std::vector<int> cells_;
    std::vector<int> edges_;            // global flux ids
    std::unordered_map<int, int> local_;
    std::vector<int> interior_, boundary_; // local indices
    SpMat M_, B_;
    Eigen::SparseLU<SpMat> lu_;
};

} // namespace

EdgeSnapshotSpace edge_snapshots(const GridHierarchy& g,
                                 const CoefficientField& kappa,
                                 const CoarseEdge& edge) {
    EdgeSnapshotSpace snap;
    snap.edge = edge;
    int r = g.refine();
    if (edge.vertical) {
        for (int j = edge.J * r; j < (edge.J + 1) * r; ++j)
            snap.fine_edges.push_back(mixed_vedge(g, edge.I * r, j));
        if (edge.I > 0) snap.blocks.push_back(g.coarse_block(edge.I - 1, edge.J));
        if (edge.I < g.nx())
            snap.blocks.push_back(g.coarse_block(edge.I, edge.J));
    } else {
        for (int i = edge.I * r; i < (edge.I + 1) * r; ++i)
            snap.fine_edges.push_back(mixed_hedge(g, i * 1, edge.J * r));
        if (edge.J > 0) snap.blocks.push_back(g.coarse_block(edge.I, edge.J - 1));
        if (edge.J < g.ny())
            snap.blocks.push_back(g.coarse_block(edge.I, edge.J));
    }
    for (int b : snap.blocks) {
        auto bc = g.block_fine_cells(b);
        snap.cells.insert(snap.cells.end(), bc.begin(), bc.end());
    }

    double elen = edge.vertical ? g.hy() : g.hx();
    double block_area = (1.0 / g.nx()) * (1.0 / g.ny());
    std::vector<std::unique_ptr<BlockMixedSolver>> solvers;
    solvers.reserve(snap.blocks.size());
    for (int b : snap.blocks)
        solvers.push_back(std::make_unique<BlockMixedSolver>(g, kappa, b));

    int J = static_cast<int>(snap.fine_edges.size());
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < J; ++j) {
        std::map<int, double> bc{{snap.fine_edges[j], 1.0}};
        trip.emplace_back(snap.fine_edges[j], j, 1.0);
        for (size_t s = 0; s < solvers.size(); ++s) {
            // outward flux through e_j: +|e| for the lower/left block, -|e|
            // for the upper/right one (dof sign is along +x / +y)
            bool minus_side = snap.blocks[s] ==
                              (edge.vertical
                                   ? (edge.I > 0 ? g.coarse_block(edge.I - 1,
                                                                  edge.J)
                                                 : -1)
                                   : (edge.J > 0 ? g.coarse_block(edge.I,
                                                                  edge.J - 1)
                                                 : -1));
            double alpha = (minus_side ? elen : -elen) / block_area;
            for (auto [e, val] : solvers[s]->solve(bc, alpha))
                trip.emplace_back(e, j, val);
        }
    }
    snap.columns = SpMat(mixed_num_fluxes(g), J);
    snap.columns.setFromTriplets(trip.begin(), trip.end());
    return snap;
}

MixedFragment mixed_spectral(const GridHierarchy& g,
                             const CoefficientField& kappa,
                             const EdgeSnapshotSpace& snap, int l) {
    int J = static_cast<int>(snap.columns.cols());
    Mat C = Mat(snap.columns);
    double elen = snap.edge.vertical ? g.hy() : g.hx();

    // a_i: edge trace Gram
    Mat T(snap.fine_edges.size(), J);
    for (size_t j = 0; j < snap.fine_edges.size(); ++j)
        T.row(j) = C.row(snap.fine_edges[j]);
    Mat A = elen * T.transpose() * T;

    // s_i: kappa^{-1} velocity mass + divergence product
    SpMat M = mixed_mass(g, kappa, snap.cells);
    Mat S = C.transpose() * M * C;
    double area = g.hx() * g.hy();
    Mat D(snap.cells.size(), J);
    for (size_t ci = 0; ci < snap.cells.size(); ++ci) {
        auto e = cell_edges(g, snap.cells[ci]);
        for (int k = 0; k < J; ++k)
            D(ci, k) = (C(e[1], k) - C(e[0], k)) / g.hx() +
                       (C(e[3], k) - C(e[2], k)) / g.hy();
    }
    S += area * D.transpose() * D;

    auto eig = generalized_eig(A, S, std::min(l, J));
    MixedFragment frag;
    frag.eigenvalues = eig.values;
    frag.coefs = eig.vectors;
    return frag;
}

MixedOfflineSpace build_mixed_offline(const GridHierarchy& g,
                                      const CoefficientField& kappa, int l) {
    MixedOfflineSpace off;
    off.l = l;
    auto edges = mixed_coarse_edges(g);
    off.eigenvalues.assign(edges.size(), Vec());
    std::vector<Eigen::Triplet<double>> trip;
    int col = 0;
    for (const CoarseEdge& e : edges) {
        off.snaps.push_back(edge_snapshots(g, kappa, e));
        if (e.boundary) continue;
        MixedFragment frag = mixed_spectral(g, kappa, off.snaps.back(), l);
        off.eigenvalues[e.id] = frag.eigenvalues;
        for (int k = 0; k < frag.coefs.cols(); ++k) {
            Vec v = off.snaps.back().columns * frag.coefs.col(k);
            for (int row = 0; row < v.size(); ++row)
                if (v[row] != 0.0) trip.emplace_back(row, col, v[row]);
            off.column_edge.push_back(e.id);
            ++col;
        }
    }
    off.columns = SpMat(mixed_num_fluxes(g), col);
    off.columns.setFromTriplets(trip.begin(), trip.end());
    return off;
}

MixedCoarseSolution mixed_coarse_solve(
    const GridHierarchy& g, const CoefficientField& kappa,
    const MixedOfflineSpace& off, const FineMixedProblem& fine,
    const std::function<double(Eigen::Vector2d)>& f,
    const std::function<double(Eigen::Vector2d, Eigen::Vector2d)>& flux_bc) {
    Vec F = fine.cell_source(f);
    Vec vb = fine.boundary_flux(flux_bc);

    // boundary lifting: edge-average data through the boundary snapshots
    Vec v_p = Vec::Zero(mixed_num_fluxes(g));
    for (const EdgeSnapshotSpace& snap : off.snaps) {
        if (!snap.edge.boundary) continue;
        Vec c(snap.fine_edges.size());
        for (size_t j = 0; j < snap.fine_edges.size(); ++j)
            c[j] = vb[snap.fine_edges[j]];
        v_p += snap.columns * c;
    }

    // coarse divergence integrals per block
    int nb = g.num_coarse_blocks();
    std::vector<Eigen::Triplet<double>> bt;
    for (int c = 0; c < g.num_fine_cells(); ++c)
        add_div_row(g, c, g.block_of_fine_cell(c), bt);
    SpMat Bc(nb, mixed_num_fluxes(g));
    Bc.setFromTriplets(bt.begin(), bt.end());
    Vec F_K = Vec::Zero(nb);
    for (int c = 0; c < g.num_fine_cells(); ++c)
        F_K[g.block_of_fine_cell(c)] += F[c];

    const SpMat& M = fine.mass();
    int n = off.dof();
    Mat BR = Mat(Bc * off.columns);
    Mat K = Mat::Zero(n + nb + 1, n + nb + 1);
    K.topLeftCorner(n, n) = Mat(off.columns.transpose() * M * off.columns);
    K.block(0, n, n, nb) = -BR.transpose();
    K.block(n, 0, nb, n) = -BR;
    double block_area = (1.0 / g.nx()) * (1.0 / g.ny());
    for (int b = 0; b < nb; ++b) {
        K(n + b, n + nb) = block_area;
        K(n + nb, n + b) = block_area;
    }
    Vec rhs = Vec::Zero(n + nb + 1);
    rhs.head(n) = -(off.columns.transpose() * (M * v_p));
    rhs.segment(n, nb) = -(F_K - Bc * v_p);

    Eigen::FullPivLU<Mat> lu(K);
    if (lu.rank() < K.rows()) {
        std::string msg = "mixed_coarse_solve: singular saddle system (rank " +
                          std::to_string(lu.rank()) + " of " +
                          std::to_string(K.rows()) + "); inf-sup failure";
        throw std::runtime_error(msg);
    }
    Vec x = lu.solve(rhs);

    MixedCoarseSolution sol;
    sol.flux = v_p + off.columns * x.head(n);
    sol.pressure = x.segment(n, nb);
    sol.pressure.array() -= sol.pressure.mean();

    MixedSolution ref = fine.solve_cellwise(F, vb);
    double denom = fine.velocity_norm(ref.flux);
    sol.velocity_err_pct =
        denom > 0 ? 100.0 * fine.velocity_norm(sol.flux - ref.flux) / denom
                  : 0.0;
    return sol;
}

} // namespace ms
