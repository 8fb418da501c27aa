#pragma once

#include "ms/fem.hpp"
#include "ms/msfem.hpp"

#include <limits>
#include <string>

namespace ms {

// Local snapshot space of one coarse neighborhood w_i.
struct SnapshotSpace {
    enum class Kind { AllFine, Harmonic, HarmonicOversampled, Randomized };
    Kind kind = Kind::Harmonic;
    int node = -1;       // coarse node id
    Region region;       // w_i
    Region solve_region; // w_i, or w_i+ for the oversampled kinds
    Mat columns;         // local nodal values on solve_region, one per snapshot
    std::uint64_t seed = 0;
    int truncated = 0;   // POD-discarded directions

    int count() const { return static_cast<int>(columns.cols()); }
};

struct SnapshotOpts {
    int layers = 0;          // oversampled kinds
    int count = 0;           // randomized: l + buffer
    std::uint64_t seed = 0;  // randomized
};

SnapshotSpace::Kind snapshot_kind_from_string(const std::string& s);
std::string to_string(SnapshotSpace::Kind kind);

SnapshotSpace build_snapshots(const GridHierarchy& g,
                              const CoefficientField& kappa, int node,
                              SnapshotSpace::Kind kind,
                              const SnapshotOpts& opts = {});

// Spectral weight kappa~ = sum_i kappa grad(chi_i) . grad(chi_i), piecewise
// constant per fine triangle.
struct WeightField {
    Vec tri; // per fine triangle
};

WeightField compute_weight(const GridHierarchy& g, const CoefficientField& kappa,
                           const std::vector<Vec>& pou);

// Result of the local spectral problem in one neighborhood: the l smallest
// eigenpairs of a(v,w) = lambda s(v,w) over the snapshot span.
struct OfflineFragment {
    int node = -1;
    Vec eigenvalues;     // kept eigenvalues, ascending
    double excluded = std::numeric_limits<double>::infinity(); // lambda_{l+1}
    std::vector<Vec> vectors; // fine nodal values, unit s-norm, before PoU
    int truncated = 0;   // directions dropped on a near-singular s-matrix
};

// All eigenpairs of the local pencil in snapshot-coefficient space
// (s-orthonormal columns); cheap to keep around for later enrichment.
struct LocalSpectrum {
    int node = -1;
    Vec values;    // ascending
    Mat coefs;     // snapshot coefficients, one eigenvector per column
    int truncated = 0;
};

LocalSpectrum local_spectrum(const GridHierarchy& g,
                             const CoefficientField& kappa,
                             const WeightField& weight,
                             const SnapshotSpace& snap);

// Eigenvector in fine coordinates, restricted to w_i.
Vec expand_eigenvector(const GridHierarchy& g, const SnapshotSpace& snap,
                       const Vec& coef);

OfflineFragment spectral_offline(const GridHierarchy& g,
                                 const CoefficientField& kappa,
                                 const WeightField& weight,
                                 const SnapshotSpace& snap, int l);

// Global offline space: PoU-multiplied eigenvectors gathered into columns.
struct OfflineSpace {
    SnapshotSpace::Kind kind = SnapshotSpace::Kind::Harmonic;
    std::uint64_t seed = 0;
    std::vector<int> l;           // per coarse node
    std::vector<Vec> eigenvalues; // per coarse node, kept values
    std::vector<double> excluded; // per coarse node, lambda_{l+1} (inf if none)
    std::vector<Vec> columns;     // fine nodal vectors, support in w_i
    std::vector<int> column_node; // owning coarse node per column

    int dof() const { return static_cast<int>(columns.size()); }
    // Smallest first-excluded eigenvalue across neighborhoods.
    double lambda_star() const;
    SpMat matrix(int num_fine_nodes) const; // R_off
};

enum class PouKind { Ms, Linear };

OfflineSpace assemble_offline(const GridHierarchy& g,
                              const std::vector<OfflineFragment>& fragments,
                              const std::vector<Vec>& pou,
                              SnapshotSpace::Kind kind, std::uint64_t seed);

// Partition-of-unity nodal vectors for the requested kind.
std::vector<Vec> partition_of_unity(const GridHierarchy& g,
                                    const CoefficientField& kappa,
                                    PouKind kind);

struct GmsfemOptions {
    SnapshotSpace::Kind kind = SnapshotSpace::Kind::Harmonic;
    int l = 2;               // uniform basis count per neighborhood
    int layers = -1;         // oversampled kinds; -1 = grid default
    int buffer = 8;          // randomized: count = l + buffer
    std::uint64_t seed = 0;
    PouKind pou = PouKind::Ms;
};

// Full offline pipeline: PoU, weight, snapshots, spectral, assembly.
OfflineSpace build_offline(const GridHierarchy& g, const CoefficientField& kappa,
                           const GmsfemOptions& opts);

struct GmsfemSolution {
    Vec coef;  // one coefficient per offline column
    Vec fine;  // u_H on the fine grid
    ErrorPair errors;
};

// Coarse Galerkin solve R_off^T A R_off; Dirichlet data handled by zeroing
// boundary rows of the columns and lifting bc through the boundary nodes.
GmsfemSolution gmsfem_solve(const GridHierarchy& g, const OfflineSpace& off,
                            const FineProblem& fine,
                            const std::function<double(Eigen::Vector2d)>& f,
                            const std::function<double(Eigen::Vector2d)>& bc);

// Binary round trip; reload reproduces gmsfem_solve output bit-identically.
void save_offline(const OfflineSpace& off, const GridHierarchy& g,
                  const std::string& path);
OfflineSpace load_offline(const std::string& path, const GridHierarchy& g);

} // namespace ms
