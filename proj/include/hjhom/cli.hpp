// Batch front end: a JSON run configuration selects a command (effective,
// cell, evolve, corrector, compare) over a Hamiltonian/potential pair and
// the run writes deterministic CSV/JSON artifacts plus a gnuplot script,
// named <command>_<hash> by the hash of the resolved configuration.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "hjhom/effective.hpp"
#include "hjhom/hamiltonian.hpp"
#include "hjhom/potential.hpp"

namespace hjhom {

struct RunConfig {
  std::string command;       // effective | cell | evolve | corrector | compare
  nlohmann::json hamiltonian;  // {"type":"w_well"} or {"type":"table",...}
  nlohmann::json potential;    // {"type":"cosine","mbar":...} | random_phase
                               // | block_random
  nlohmann::json params;       // command-specific parameters
  std::string out_dir = ".";
  uint64_t seed = 1;
  int workers = 1;             // recorded in artifacts; runs are sequential

  nlohmann::json resolved() const;  // canonical echo used for hashing
};

struct RunResult {
  std::vector<std::string> artifacts;  // paths written, in order
  nlohmann::json summary;              // same object stored in the .json
};

// Throws InvariantError("cli_config", ...) on malformed input.
RunConfig parse_config(const nlohmann::json& j);

HamiltonianPtr build_hamiltonian(const nlohmann::json& spec);
PotentialModelPtr build_potential(const nlohmann::json& spec, uint64_t seed);

// Execute one configured run and write its artifacts under out_dir.
RunResult run_command(const RunConfig& config);

// Full process entry: parses flags (--config, --out, --seed, --workers),
// prints a machine-readable JSON result to stdout, and returns the exit
// code (0 on success, 2 with {"error":{"invariant":...}} on failure).
int run_cli(int argc, const char* const* argv);

}  // namespace hjhom
