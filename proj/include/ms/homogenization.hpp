#pragma once

#include "ms/fem.hpp"

namespace ms {

// Per-coarse-block 2x2 upscaled tensor obtained by flux averaging.
struct UpscaledTensorField {
    enum class Variant { Plain, Oversampled };
    Variant variant = Variant::Plain;
    std::vector<Eigen::Matrix2d> tensors; // per coarse block

    void save_csv(const std::string& path) const;
};

// Two cell problems with Dirichlet data x_l on the block boundary,
// flux-averaged over the block.
Eigen::Matrix2d homogenize_block(const GridHierarchy& g,
                                 const CoefficientField& kappa, int block);

// Cell problems on the oversampled block, averaging restricted to the
// target block. layers = 0 degenerates to homogenize_block.
Eigen::Matrix2d homogenize_block_oversampled(const GridHierarchy& g,
                                             const CoefficientField& kappa,
                                             int block, int layers);

UpscaledTensorField homogenize_all(const GridHierarchy& g,
                                   const CoefficientField& kappa, int layers);

// Coarse P1 stiffness on the triangulation with per-block tensors
// (symmetrized); one row/column per coarse node.
SpMat coarse_tensor_stiffness(const GridHierarchy& g,
                              const UpscaledTensorField& tensors);

// P1 evaluation of a coarse nodal function at every fine node.
Vec evaluate_coarse_p1(const GridHierarchy& g, const Vec& coarse);

struct HomogenizedSolution {
    Vec coarse;     // per coarse node
    Vec fine;       // coarse solution evaluated at fine nodes
    ErrorPair errors;
};

// Coarse solve on the upscaled field; errors measured against the fine
// reference solution after nodal interpolation.
HomogenizedSolution solve_homogenized(
    const GridHierarchy& g, const UpscaledTensorField& tensors,
    const FineProblem& fine, const std::function<double(Eigen::Vector2d)>& f,
    const std::function<double(Eigen::Vector2d)>& bc);

} // namespace ms
