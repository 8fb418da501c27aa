#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace ms {

// One table row in the style "method | #basis (DOF) | e_a | e_2 | Lambda* |
// iterations". lambda_star is NaN when the method has no spectral gap.
struct ReportRow {
    std::string method;
    int dof = 0;
    double energy_pct = 0.0;
    double l2_pct = 0.0;
    double lambda_star = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::string config_hash; // hex of the canonical config serialization
    std::uint64_t seed = 0;
    std::string version = "1.0.0";

    // Within each method, rows are kept sorted by DOF (stable).
    void sort_rows();

    // Both serializations are deterministic: no timestamps or wall times.
    void save_csv(const std::string& path) const;
    void save_json(const std::string& path) const;
    static ExperimentReport load_json(const std::string& path);
};

// FNV-1a over a canonical string; stable across platforms.
std::string stable_hash(const std::string& canonical);

} // namespace ms
