#pragma once

#include "ms/coefficient.hpp"
#include "ms/grid.hpp"

#include <Eigen/Core>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <memory>

namespace ms {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Constant gradients of the three P1 basis functions on a fine triangle.
struct TriGeometry {
    std::array<Eigen::Vector2d, 3> grad;
    double area;
};
TriGeometry tri_geometry(const GridHierarchy& g, int t);

// Gradient of a P1 function given its three nodal values on triangle t.
Eigen::Vector2d tri_gradient(const GridHierarchy& g, int t,
                             const std::array<double, 3>& nodal);

// Stiffness over a region with scalar cell-wise kappa; local node numbering
// of the region, symmetric positive semidefinite.
SpMat assemble_stiffness(const GridHierarchy& g, const CoefficientField& kappa,
                         const Region& region);
// P1 mass matrix over a region.
SpMat assemble_mass(const GridHierarchy& g, const Region& region);
// Mass matrix with a piecewise-constant (per fine triangle) weight.
SpMat assemble_weighted_mass(const GridHierarchy& g,
                             const std::function<double(int)>& tri_weight,
                             const Region& region);

// Dirichlet solves on a region with the region boundary as the Dirichlet
// set. The interior factorization is built once and reused across
// right-hand sides (snapshot batches).
class DirichletSolver {
  public:
    DirichletSolver(const GridHierarchy& g, const CoefficientField& kappa,
                    const Region& region);

    const Region& region() const { return *region_; }

    // boundary_values: one value per region boundary node (in the order of
    // region().boundary_nodes); rhs: load vector in local numbering (may be
    // empty for zero rhs). Returns local nodal values on the whole region.
    Vec solve(const Vec& boundary_values, const Vec& rhs = Vec()) const;

    // Zero-Dirichlet solve, rhs in local numbering restricted to interior
    // handled internally.
    Vec solve_zero_bc(const Vec& rhs_local) const;

    const SpMat& stiffness() const { return A_; } // full local matrix

  private:
    const Region* region_;
    SpMat A_;
    SpMat A_ib_; // interior x boundary coupling
    std::vector<int> interior_; // local indices
    std::vector<int> boundary_; // local indices
    Eigen::SimplicialLDLT<SpMat> ldlt_;
};

// Global fine reference problem with Dirichlet data on the domain boundary.
class FineProblem {
  public:
    FineProblem(const GridHierarchy& g, const CoefficientField& kappa);

    const GridHierarchy& grid() const { return *g_; }
    const SpMat& stiffness() const { return solver_->stiffness(); }
    const SpMat& mass() const { return M_; }
    const Region& region() const { return solver_->region(); }

    // f and bc as point functions; bc interpolated at fine boundary nodes.
    Vec solve(const std::function<double(Eigen::Vector2d)>& f,
              const std::function<double(Eigen::Vector2d)>& bc) const;
    // nodal data variant: f_nodal is a fine nodal function, bc values at
    // domain boundary nodes (in domain_boundary_nodes order).
    Vec solve_nodal(const Vec& f_nodal, const Vec& bc_boundary) const;

    Vec load_vector(const Vec& f_nodal) const { return M_ * f_nodal; }

    double energy_norm(const Vec& u) const;
    double l2_norm(const Vec& u) const;

    Vec interpolate(const std::function<double(Eigen::Vector2d)>& f) const;
    Vec boundary_values(const std::function<double(Eigen::Vector2d)>& bc) const;

  private:
    const GridHierarchy* g_;
    Region region_;
    std::unique_ptr<DirichletSolver> solver_;
    SpMat M_;
};

// Dense symmetric generalized eigenproblem A x = lambda S x, A PSD,
// S PD after at most one regularizing shift. Eigenvalues ascending,
// eigenvectors S-orthonormal.
struct EigenDecomposition {
    Vec values;
    Mat vectors; // columns
};
EigenDecomposition generalized_eig(const Mat& A, const Mat& S, int k);

// Relative error pair (energy, l2) of u against the reference, in percent.
struct ErrorPair {
    double energy_pct;
    double l2_pct;
};
ErrorPair relative_errors(const FineProblem& fp, const Vec& u, const Vec& ref);

} // namespace ms
