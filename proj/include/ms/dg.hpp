#pragma once

#include "ms/fem.hpp"

namespace ms {

// Oversampled harmonic snapshots of one coarse block K: one solve per fine
// boundary node of K+, restricted to K, with POD removing directions whose
// restrictions are linearly dependent.
struct DgSnapshotSpace {
    int block = -1;
    Region region;       // K
    Region solve_region; // K+, equal to region when layers == 0
    Mat columns;         // local nodal values on solve_region, post-POD
    int raw_count = 0;   // boundary nodes of K+ before POD
    int truncated = 0;   // POD-discarded directions

    int count() const { return static_cast<int>(columns.cols()); }
};

DgSnapshotSpace dg_snapshots(const GridHierarchy& g,
                             const CoefficientField& kappa, int block,
                             int layers);

// Block spectral problem a_i(v,w) = int_{K+} kappa grad v . grad w against
// s_i(v,w) = int_{boundary of K} kappa v w; eigenfunctions restricted to K.
struct DgFragment {
    int block = -1;
    Vec eigenvalues;          // ascending, first l
    std::vector<Vec> vectors; // local nodal values on the block region
};

DgFragment dg_spectral(const GridHierarchy& g, const CoefficientField& kappa,
                       const DgSnapshotSpace& snap, int l);

// Boundary mass matrix int_{boundary of K} kappa v w in the block's local
// numbering (kappa taken from the cell inside the block).
SpMat dg_boundary_mass(const GridHierarchy& g, const CoefficientField& kappa,
                       const Region& block_region);

struct DgOfflineSpace {
    int l = 0;
    double gamma = 0.0;
    std::vector<Region> regions;         // per coarse block
    std::vector<std::vector<Vec>> basis; // per block, local nodal vectors
    std::vector<Vec> eigenvalues;        // per block

    int dof() const;
    std::pair<int, int> locate(int column) const; // (block, local index)
};

// gamma <= 0 selects the default 4 * (max basis count per block).
DgOfflineSpace build_dg_offline(const GridHierarchy& g,
                                const CoefficientField& kappa, int l,
                                int layers, double gamma = 0.0);

struct DgSystem {
    Mat A;
    Vec b;
};

// Symmetric IPDG coupling over the coarse skeleton; Dirichlet data enters
// through the boundary-edge consistency and penalty terms.
DgSystem ipdg_assemble(const GridHierarchy& g, const CoefficientField& kappa,
                       const DgOfflineSpace& off,
                       const std::function<double(Eigen::Vector2d)>& f,
                       const std::function<double(Eigen::Vector2d)>& bc);

struct DgSolution {
    Vec coef;
    std::vector<Vec> local; // per block, local nodal values of u_H
    double energy_pct = 0.0; // broken energy + jump seminorm, relative
    double l2_pct = 0.0;
    double jump = 0.0;       // jump seminorm of u_H against the data
};

DgSolution ipdg_solve(const GridHierarchy& g, const CoefficientField& kappa,
                      const DgOfflineSpace& off, const FineProblem& fine,
                      const std::function<double(Eigen::Vector2d)>& f,
                      const std::function<double(Eigen::Vector2d)>& bc);

} // namespace ms
