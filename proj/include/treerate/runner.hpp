#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

namespace treerate {

enum class ExitCode : int {
    ok = 0,
    schema_error = 2,
    guard_tripped = 3,
    invariant_violation = 4,
};

// Runs one named experiment from a config object:
//   { "experiment": "lansit-check" | "divergence" | "compare-bound" | "indisp"
//                 | "entropy-rate" | "kakutani" | "perturb-sim",
//     "seed": <int, where meaningful>, "output": "file.csv",
//     "params": { ... } }
// Input paths inside params resolve relative to `base_dir`. Identical
// config + seed produces byte-identical output files.
ExitCode run_experiment(const nlohmann::json& config, const std::string& base_dir,
                        std::ostream& log);

ExitCode run_experiment_file(const std::string& config_path, std::ostream& log);

}  // namespace treerate
