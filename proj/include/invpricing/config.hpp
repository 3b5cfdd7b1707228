#pragma once

#include <iosfwd>
#include <string>

#include "invpricing/oracle.hpp"
#include "invpricing/policy.hpp"
#include "invpricing/sim.hpp"
#include "invpricing/solver.hpp"

namespace invpricing {

/**
 * Everything a CLI run needs. Built only through parse_config/load_config,
 * which validate every field before returning.
 *
 * File format: INI sections [demand] [cost] [model] [solver] [sim] [oracle]
 * [verify] [output], one `key = value` per line, `;` or `#` comments.
 * Missing keys take the defaults of the linear A=10 fixture.
 */
struct RunConfig {
  ModelParams model;
  SolverOptions solver;
  SimConfig sim;
  ChainSpec chain;
  OracleOptions oracle;
  VerificationOptions verify;
  std::string out_dir = "out";
};

/// Throws ConfigInvalid for syntax, unknown keys and bad values, ModelInvalid
/// or SpecInvalid when a module rejects the values.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

}  // namespace invpricing
