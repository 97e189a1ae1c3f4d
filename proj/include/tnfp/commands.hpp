#pragma once

#include <iosfwd>
#include <string>

#include "tnfp/config.hpp"

namespace tnfp {

/// Pipeline stages behind the command-line tool. Each reads its inputs from
/// the files named in the config, writes its artifact to `out` and logs
/// progress to `log`. Errors are thrown (ConfigError, InputError,
/// DivergenceError, ...); the tool maps them to exit codes.

/// Simulates the SDE and writes the estimated domain file.
void cmd_estimate_domain(const RunConfig& config, const std::string& out, std::ostream& log);

/// Trains a model on the domain in [domain] file (or resumes [model]
/// checkpoint) and writes the checkpoint to `out` plus the loss CSV.
void cmd_train(const RunConfig& config, const std::string& out, std::ostream& log);

/// Integrates the checkpointed model over the candidate cubes and writes the
/// refined isotropic domain file.
void cmd_refine(const RunConfig& config, const std::string& out, std::ostream& log);

/// Relative errors against the exact Gibbs density, as a one-row CSV.
void cmd_eval(const RunConfig& config, const std::string& out, std::ostream& log);

/// Two-coordinate slice of the model density as CSV.
void cmd_export_slice(const RunConfig& config, const std::string& out, std::ostream& log);

/// Integrals of the model density over cubes of the given radii as CSV.
void cmd_integrate_table(const RunConfig& config, const std::string& out, std::ostream& log);

/// Default loss CSV path for a checkpoint path.
std::string loss_csv_path(const RunConfig& config, const std::string& out);

}  // namespace tnfp
