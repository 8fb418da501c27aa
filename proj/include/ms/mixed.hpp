#pragma once

#include "ms/fem.hpp"

#include <Eigen/SparseLU>

namespace ms {

// Lowest-order mixed discretization on the rectangular fine grid: one flux
// unknown per fine edge (the normal component, signed along +x / +y) and one
// pressure per fine cell. Vertical edges come first.
inline int mixed_num_vedges(const GridHierarchy& g) {
    return (g.nxf() + 1) * g.nyf();
}
inline int mixed_num_fluxes(const GridHierarchy& g) {
    return (g.nxf() + 1) * g.nyf() + g.nxf() * (g.nyf() + 1);
}
// vertical edge at x = i*hx spanning cell row j (i in 0..nxf, j in 0..nyf-1)
inline int mixed_vedge(const GridHierarchy& g, int i, int j) {
    return j * (g.nxf() + 1) + i;
}
// horizontal edge at y = j*hy spanning cell column i
inline int mixed_hedge(const GridHierarchy& g, int i, int j) {
    return mixed_num_vedges(g) + j * g.nxf() + i;
}

// kappa^{-1}-weighted velocity mass matrix over a cell set (global flux
// numbering); pass all cells for the full grid.
SpMat mixed_mass(const GridHierarchy& g, const CoefficientField& kappa,
                 const std::vector<int>& cells);
std::vector<int> all_fine_cells(const GridHierarchy& g);

// Cellwise divergence of a flux vector.
Vec mixed_divergence(const GridHierarchy& g, const Vec& flux);

struct MixedSolution {
    Vec flux;     // per fine edge
    Vec pressure; // per fine cell, mean zero
};

// Fine reference solve with Neumann (flux) boundary data; pressure pinned to
// zero mean. Data must satisfy the compatibility condition int f = flux out.
class FineMixedProblem {
  public:
    FineMixedProblem(const GridHierarchy& g, const CoefficientField& kappa);

    const GridHierarchy& grid() const { return *g_; }
    const SpMat& mass() const { return M_; }

    // flux_bc(midpoint, outward normal) -> v.n on the domain boundary
    MixedSolution solve(
        const std::function<double(Eigen::Vector2d)>& f,
        const std::function<double(Eigen::Vector2d, Eigen::Vector2d)>& flux_bc)
        const;
    // cell_source: integral of f per fine cell; boundary_flux: full flux
    // vector whose boundary-edge entries hold the prescribed values
    MixedSolution solve_cellwise(const Vec& cell_source,
                                 const Vec& boundary_flux) const;

    Vec cell_source(const std::function<double(Eigen::Vector2d)>& f) const;
    Vec boundary_flux(const std::function<double(Eigen::Vector2d,
                                                 Eigen::Vector2d)>& bc) const;

    double velocity_norm(const Vec& flux) const; // sqrt(int kappa^-1 |v|^2)

  private:
    const GridHierarchy* g_;
    SpMat M_;
    std::vector<int> interior_; // flux dofs not on the domain boundary
    std::vector<int> boundary_;
    SpMat B_;                   // cell x flux divergence integrals
    Eigen::SparseLU<SpMat> lu_; // saddle point over (interior flux, p, mu)
};

// Rectangular coarse edges (block interfaces plus domain-boundary faces).
struct CoarseEdge {
    int id = -1;
    bool vertical = true; // normal along +x (vertical) or +y (horizontal)
    int I = 0, J = 0;     // vertical: x = I*Hx, rows J; horizontal: y = J*Hy
    bool boundary = false;
};

std::vector<CoarseEdge> mixed_coarse_edges(const GridHierarchy& g);

// Velocity snapshots of one coarse edge: unit normal trace on one fine edge
// of E, zero normal trace on the rest of the boundary of the one- or
// two-block neighborhood, blockwise-constant divergence.
struct EdgeSnapshotSpace {
    CoarseEdge edge;
    std::vector<int> fine_edges; // flux ids on E, ordered along the edge
    std::vector<int> blocks;     // coarse blocks of omega_E
    std::vector<int> cells;      // fine cells of omega_E
    SpMat columns;               // num_fluxes x J_i
};

EdgeSnapshotSpace edge_snapshots(const GridHierarchy& g,
                                 const CoefficientField& kappa,
                                 const CoarseEdge& edge);

// Edge spectral problem a_i(v,w) = int_E (v.n)(w.n) against
// s_i(v,w) = int_{omega_E} kappa^{-1} v.w + div(v) div(w).
struct MixedFragment {
    Vec eigenvalues; // ascending, first l
    Mat coefs;       // snapshot coefficients of the kept eigenvectors
};

MixedFragment mixed_spectral(const GridHierarchy& g,
                             const CoefficientField& kappa,
                             const EdgeSnapshotSpace& snap, int l);

struct MixedOfflineSpace {
    int l = 0;
    std::vector<EdgeSnapshotSpace> snaps; // every coarse edge, by edge id
    std::vector<Vec> eigenvalues;         // per interior edge (by edge id)
    SpMat columns;                        // velocity basis, interior edges
    std::vector<int> column_edge;

    int dof() const { return static_cast<int>(columns.cols()); }
};

MixedOfflineSpace build_mixed_offline(const GridHierarchy& g,
                                      const CoefficientField& kappa, int l);

struct MixedCoarseSolution {
    Vec flux;         // v_H as a fine flux vector
    Vec pressure;     // per coarse block, mean zero
    double velocity_err_pct = 0.0; // vs fine, kappa^{-1}-weighted norm
};

// Saddle-point coarse solve; boundary data lifted through the boundary-edge
// snapshot spaces so v_H.n matches the edge averages of flux_bc exactly.
MixedCoarseSolution mixed_coarse_solve(
    const GridHierarchy& g, const CoefficientField& kappa,
    const MixedOfflineSpace& off, const FineMixedProblem& fine,
    const std::function<double(Eigen::Vector2d)>& f,
    const std::function<double(Eigen::Vector2d, Eigen::Vector2d)>& flux_bc);

} // namespace ms
