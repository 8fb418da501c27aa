#pragma once

#include "ms/fem.hpp"

namespace ms {

// One multiscale basis function per coarse node, stored on the full fine
// grid (support is the node's hat support).
struct MsBasisSet {
    enum class Variant { LinearBc, Oversampled };
    Variant variant = Variant::LinearBc;
    std::vector<Vec> values; // per coarse node, fine nodal values
    int layers = 0;          // oversampling width (Oversampled only)

    SpMat columns(const GridHierarchy& g) const; // R0, fine x N_c
};

// kappa-harmonic extension of the hat traces, solved per coarse element.
MsBasisSet ms_basis(const GridHierarchy& g, const CoefficientField& kappa);

// Hou-Wu oversampling: per coarse element, kappa-harmonic solves on K+ with
// affine boundary data, combined so nodal values are delta at the element
// vertices, restricted to K, glued conformingly across element interfaces.
MsBasisSet ms_basis_oversampled(const GridHierarchy& g,
                                const CoefficientField& kappa, int layers);

// Combination matrix of the oversampled construction for one coarse element:
// row b holds the coefficients of phi_b in terms of the K+ solves, so that
// phi_b(x_c) = delta_bc at the element vertices. Identity for constant kappa.
Mat oversample_combination(const GridHierarchy& g, const CoefficientField& kappa,
                           int coarse_tri, int layers);

struct MsfemSolution {
    Vec coarse;   // coefficient per coarse node
    Vec fine;     // expanded to the fine grid
    ErrorPair errors;
};

SpMat msfem_coarse_stiffness(const GridHierarchy& g, const MsBasisSet& basis,
                             const FineProblem& fine);

MsfemSolution msfem_solve(const GridHierarchy& g, const MsBasisSet& basis,
                          const FineProblem& fine,
                          const std::function<double(Eigen::Vector2d)>& f,
                          const std::function<double(Eigen::Vector2d)>& bc);

// Basis export: per node, the fine nodal values as a raw double array.
void save_basis(const MsBasisSet& basis, const std::string& path);

} // namespace ms
