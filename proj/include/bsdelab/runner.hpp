#ifndef BSDELAB_RUNNER_HPP
#define BSDELAB_RUNNER_HPP

#include <cstdint>
#include <iosfwd>
#include <string>

#include "bsdelab/config.hpp"

namespace bsdelab {

// Experiment orchestration: builds the configured model/problem, runs the
// named experiment, writes results.csv (plus per-experiment detail files) and
// manifest.json into the output directory.
//
// Exit-code contract: 0 all assertions passed, 1 assertion failure (artifacts
// still written), 2 invalid config. CSV bodies are deterministic functions of
// config + seed; wall-clock lives in the manifest only.
struct RunResult {
    int exit_code = 0;
    bool all_pass = false;
    std::string out_dir;
    std::string run_id;
    std::string manifest_json;
};

RunResult run_experiment(const RunConfig& cfg);

// `report`: pretty-print a previous run's manifest; returns the exit code.
int report_manifest(const std::string& out_dir, std::ostream& os);

std::uint64_t fnv1a64(const std::string& data);
std::string format_double(double v);  // shortest round-trip decimal, CSV-stable

}  // namespace bsdelab

#endif
