#pragma once

#include "ms/grid.hpp"

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace ms {

// Cell-wise scalar permeability on the fine grid. Both triangles of a fine
// cell share the cell value.
class CoefficientField {
  public:
    CoefficientField() = default;
    CoefficientField(const GridHierarchy& g, Eigen::VectorXd cell_values);

    static CoefficientField constant(const GridHierarchy& g, double value);

    double cell(int c) const { return values_[c]; }
    double tri(int t) const { return values_[t / 2]; }
    const Eigen::VectorXd& values() const { return values_; }
    double min() const { return min_; }
    double max() const { return max_; }
    double contrast() const { return max_ / min_; }

    // Transpose of the underlying cell image (x and y swapped); requires a
    // square fine grid.
    CoefficientField transposed(const GridHierarchy& g) const;

  private:
    Eigen::VectorXd values_;
    double min_ = 0, max_ = 0;
};

// Generators used by the experiment driver and tests. All deterministic
// per (spec, seed).
struct FieldSpec {
    std::string kind = "constant"; // constant|laminate|checkerboard|channels|inclusions|file
    double value = 1.0;            // constant
    double contrast = 1.0;         // max/min for the heterogeneous kinds
    int period = 1;                // laminate/checkerboard period in coarse cells
    int num_channels = 2;          // channels
    int num_inclusions = 8;        // inclusions
    uint64_t seed = 0;
    std::string path;              // file kind
};

CoefficientField generate_field(const FieldSpec& spec, const GridHierarchy& g);

void save_field(const CoefficientField& f, const GridHierarchy& g,
                const std::string& path);
CoefficientField load_field(const GridHierarchy& g, const std::string& path);

} // namespace ms
