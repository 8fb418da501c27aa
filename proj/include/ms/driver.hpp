#pragma once

#include "ms/coefficient.hpp"
#include "ms/report.hpp"

#include <functional>
#include <string>

namespace ms {

// Validated experiment description; unknown keys in the serialized form are
// rejected at parse time.
struct ExperimentConfig {
    // grid
    int nx = 4, ny = 4, refine = 8;
    // coefficient field
    FieldSpec field;
    // method: homogenize | msfem | gmsfem | adapt | online | mixed | dg
    std::string method = "gmsfem";
    // method options
    std::string snapshots = "harmonic"; // gmsfem snapshot kind
    std::string variant = "linear";     // msfem: linear | oversampled
    std::string pou = "ms";             // gmsfem partition of unity: ms | linear
    int l = 2;                          // basis count per neighborhood/edge
    int sweep = 0;                      // > 0: emit rows for l = 1..sweep
    int layers = -1;                    // oversampling width; -1 = grid default
    int buffer = 8;                     // randomized snapshot surplus
    double theta = 0.7;                 // Dorfler parameter
    double tol = 0.0;                   // adaptivity stopping tolerance
    int max_iter = 10;
    int increment = 1;                  // offline adaptivity enrichment step
    double gamma = 0.0;                 // dg penalty; <= 0 selects the default
    bool dump_basis = false;
    // data: bc in {zero, x, y, xy}; f in {zero, one, localized, balanced}
    std::string bc = "x";
    std::string f = "zero";
    // run control
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int threads = 1;

    std::string canonical() const; // stable serialization used for hashing
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

std::function<double(Eigen::Vector2d)> data_function(const std::string& name);

// Runs the configured experiment; pure computation, no file output.
ExperimentReport run(const ExperimentConfig& cfg);

// run() plus artifact emission into cfg.out_dir: report.csv, report.json,
// field.txt and (optionally) basis/offline.bin.
ExperimentReport run_and_write(const ExperimentConfig& cfg);

} // namespace ms
