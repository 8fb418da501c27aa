#pragma once

#include "ms/adaptivity.hpp"

namespace ms {

// Residual-driven online basis function: the Riesz representative of the
// local residual functional on V_i = H^1_0(w_i).
struct OnlineBasis {
    int node = -1;
    Vec phi;            // fine nodal values, support in w_i, zero trace
    double norm = 0.0;  // energy norm; equals the residual norm
    int iteration = 0;
    bool zero = false;  // residual vanished; do not enrich
};

OnlineBasis online_basis(const DirichletSolver& local, const GridHierarchy& g,
                         const Vec& global_residual, int node,
                         int iteration = 0);

// Greedy maximal subset of marked neighborhoods with pairwise disjoint w's,
// visited in descending-indicator order (ties by index).
std::vector<int> nonoverlap_select(const std::vector<int>& marked,
                                   const std::vector<double>& eta2,
                                   const GridHierarchy& g);

struct OnlineOptions {
    double theta = 0.7;
    double tol = 0.0; // stop when sum eta_i^2 <= tol
    int max_iter = 10;
};

struct OnlineResult {
    OfflineSpace space;              // offline space plus online columns
    GmsfemSolution solution;
    std::vector<HistoryRow> history; // first row offline, then online
    std::vector<OnlineBasis> added;
};

// Online enrichment: indicators, Dorfler mark, non-overlapping selection,
// append Riesz representatives, re-solve. The space only grows; excluded
// eigenvalues stay those of the offline space.
OnlineResult online_loop(const GridHierarchy& g, const CoefficientField& kappa,
                         const OfflineSpace& offline, const FineProblem& fine,
                         const std::function<double(Eigen::Vector2d)>& f,
                         const std::function<double(Eigen::Vector2d)>& bc,
                         const OnlineOptions& opts);

} // namespace ms
