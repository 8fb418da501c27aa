#pragma once

#include "ms/gmsfem.hpp"

#include <limits>
#include <string>
#include <vector>

namespace ms {

// Norm of the local residual functional R_i(v) = (f,v) - a(u_H,v) over
// V_i = H^1_0(w_i): the energy norm of its Riesz representative.
// global_residual = M f_nodal - A u_H on the fine grid.
double residual_norm(const DirichletSolver& local, const Vec& global_residual);
double residual_norm(const GridHierarchy& g, const CoefficientField& kappa,
                     int coarse_node, const Vec& global_residual);

// Factorized zero-Dirichlet solvers on every coarse neighborhood, built once
// and reused across enrichment iterations.
class NeighborhoodSolvers {
  public:
    NeighborhoodSolvers(const GridHierarchy& g, const CoefficientField& kappa);

    int size() const { return static_cast<int>(solvers_.size()); }
    const DirichletSolver& operator[](int cn) const { return *solvers_[cn]; }

  private:
    std::vector<Region> regions_;
    std::vector<std::unique_ptr<DirichletSolver>> solvers_;
};

// Per-neighborhood residual norms and eigenvalue-weighted indicators
// eta_i^2 = r_i^2 / lambda_{l_i+1}.
struct IndicatorSet {
    std::vector<double> r;    // residual norms
    std::vector<double> eta2; // indicators
    int iteration = 0;

    double total() const;
};

IndicatorSet compute_indicators(const NeighborhoodSolvers& locals,
                                const std::vector<double>& excluded,
                                const Vec& global_residual);

// Smallest prefix of the descending-eta^2 order whose sum reaches
// theta * total; ties broken by original index; all-zero -> empty.
std::vector<int> dorfler_mark(const std::vector<double>& eta2, double theta);

struct HistoryRow {
    int iteration = 0;
    int dof = 0;
    double energy_pct = 0.0;
    double l2_pct = 0.0;
    double eta2_sum = 0.0;
    int marked = 0;
    std::string kind = "offline"; // offline | online
};

void save_history_csv(const std::vector<HistoryRow>& history,
                      const std::string& path);

struct AdaptOptions {
    GmsfemOptions gms;        // gms.l = initial per-neighborhood count
    double theta = 0.7;
    double tol = 0.0;         // stop when sum eta_i^2 <= tol
    int max_dof = std::numeric_limits<int>::max();
    int max_iter = 20;
    int increment = 1;        // basis functions added per marked neighborhood
};

struct AdaptResult {
    OfflineSpace space;               // final enriched space
    GmsfemSolution solution;          // final coarse solution
    std::vector<HistoryRow> history;  // one row per iteration
    std::vector<int> l;               // final per-neighborhood counts
    std::vector<std::string> warnings;
};

// Offline adaptive enrichment: solve, indicate, Dorfler-mark, append the
// next local eigenfunctions on marked neighborhoods, repeat.
AdaptResult adapt_loop(const GridHierarchy& g, const CoefficientField& kappa,
                       const FineProblem& fine,
                       const std::function<double(Eigen::Vector2d)>& f,
                       const std::function<double(Eigen::Vector2d)>& bc,
                       const AdaptOptions& opts);

} // namespace ms
