#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tnfp/domain.hpp"
#include "tnfp/tffn.hpp"
#include "tnfp/training.hpp"
#include "tnfp/trbfn.hpp"

namespace tnfp {

/// How a domain file was produced.
struct DomainProvenance {
  std::string method;      // "estimate", "estimate-anisotropic", "refine"
  std::string benchmark;
  std::uint64_t seed = 0;
  int trajectories = 0;
  long long burnin_steps = 0;
  long long terminal_steps = 0;
  double step_size = 0.0;
  double margin = 0.0;
  long long samples = 0;   // retained points
  double threshold = 0.0;  // refine only
};

struct DomainFile {
  Domain domain;
  DomainProvenance provenance;
};

/// JSON text, keys in fixed order, doubles in shortest round-trip form.
void write_domain_file(const std::string& path, const DomainFile& file);
/// Throws InputError when the file is missing or malformed.
DomainFile read_domain_file(const std::string& path);

enum class ModelFamily { Trbfn, Tffn };
ModelFamily parse_family(std::string_view name);
std::string_view family_name(ModelFamily family);

enum class Precision { Single, Double };
Precision parse_precision(std::string_view name);
std::string_view precision_name(Precision precision);

/// Everything needed to rebuild a model and continue its training run.
struct Checkpoint {
  ModelFamily family = ModelFamily::Trbfn;
  Precision precision = Precision::Single;
  std::string benchmark;
  Domain domain;
  int rank = 0;
  std::vector<RbfKind> kinds;  // trbfn
  MlpShape shape;              // tffn
  int quad_panels = 16;        // tffn
  int quad_points = 16;        // tffn
  std::uint64_t seed = 0;
  std::vector<double> params;  // raw parameters, exact for either precision
  TrainState state;
};

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
/// Throws InputError when the file is missing, malformed or of another version.
Checkpoint read_checkpoint(const std::string& path);

template <class Real>
Checkpoint make_checkpoint(const TrbfnModel<Real>& model) {
  Checkpoint c;
  c.family = ModelFamily::Trbfn;
  c.precision = sizeof(Real) == sizeof(float) ? Precision::Single : Precision::Double;
  c.domain = model.domain();
  c.rank = model.rank();
  c.kinds = model.kinds();
  c.params.assign(model.params().begin(), model.params().end());
  return c;
}

template <class Real>
Checkpoint make_checkpoint(const TffnModel<Real>& model) {
  Checkpoint c;
  c.family = ModelFamily::Tffn;
  c.precision = sizeof(Real) == sizeof(float) ? Precision::Single : Precision::Double;
  c.domain = model.domain();
  c.rank = model.rank();
  c.shape = model.shape();
  c.quad_panels = model.quad_panels();
  c.quad_points = model.quad_points();
  c.params.assign(model.params().begin(), model.params().end());
  return c;
}

/// Rebuilds the model stored in a checkpoint (refreshed). Throws InputError
/// on a family mismatch or a parameter count that does not fit the shape.
template <class Model>
Model restore_model(const Checkpoint& c);

}  // namespace tnfp
