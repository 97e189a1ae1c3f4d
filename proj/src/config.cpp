#include "tnfp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tnfp/errors.hpp"
#include "tnfp/evaluation.hpp"

namespace tnfp {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string where(const std::string& key) { return "config key '" + key + "'"; }

double to_double(const std::string& key, std::string_view text) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(where(key) + ": '" + t + "' is not a number");
  }
  return value;
}

template <class Int>
Int to_int(const std::string& key, std::string_view text) {
  const std::string t = trim(text);
  Int value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    // Accept integral values written in floating form, e.g. 1e5.
    const double d = to_double(key, t);
    if (d != static_cast<double>(static_cast<Int>(d))) {
      throw ConfigError(where(key) + ": '" + t + "' is not an integer");
    }
    return static_cast<Int>(d);
  }
  return value;
}

bool to_bool(const std::string& key, std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(where(key) + ": '" + t + "' is not a boolean");
}

std::vector<std::string> split(std::string_view text) {
  std::vector<std::string> items;
  std::string current;
  for (const char ch : text) {
    if (ch == ',') {
      items.push_back(trim(current));
      current.clear();
    } else {
      current += ch;
    }
  }
  if (!trim(current).empty() || !items.empty()) items.push_back(trim(current));
  return items;
}

std::vector<double> to_doubles(const std::string& key, std::string_view text) {
  std::vector<double> values;
  for (const std::string& item : split(text)) values.push_back(to_double(key, item));
  return values;
}

std::vector<int> to_ints(const std::string& key, std::string_view text) {
  std::vector<int> values;
  for (const std::string& item : split(text)) values.push_back(to_int<int>(key, item));
  return values;
}

template <class T, class F>
std::string join(const std::vector<T>& values, F format) {
  std::string text;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) text += ", ";
    text += format(values[k]);
  }
  return text;
}

std::string doubles_text(const std::vector<double>& values) { return join(values, format_double); }

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

// Keys by "section.key"; global keys have an empty section.
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_int<std::uint64_t>(k, v); }},
      {"precision", [](RunConfig& c, const std::string&, const std::string& v) { c.precision = parse_precision(trim(v)); }},
      {"threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = to_int<int>(k, v); }},
      {"sde.benchmark", [](RunConfig& c, const std::string&, const std::string& v) { c.benchmark = trim(v); }},
      {"sde.step_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.sde.step_size = to_double(k, v); }},
      {"sde.burnin_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.sde.burnin_steps = to_int<long long>(k, v); }},
      {"sde.terminal_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.sde.terminal_steps = to_int<long long>(k, v); }},
      {"sde.trajectories", [](RunConfig& c, const std::string& k, const std::string& v) { c.sde.num_trajectories = to_int<int>(k, v); }},
      {"sde.margin", [](RunConfig& c, const std::string& k, const std::string& v) { c.sde.margin = to_double(k, v); }},
      {"sde.anisotropic", [](RunConfig& c, const std::string& k, const std::string& v) { c.anisotropic = to_bool(k, v); }},
      {"domain.file", [](RunConfig& c, const std::string&, const std::string& v) { c.domain_file = trim(v); }},
      {"domain.candidates", [](RunConfig& c, const std::string& k, const std::string& v) { c.candidates = to_doubles(k, v); }},
      {"domain.threshold", [](RunConfig& c, const std::string& k, const std::string& v) { c.threshold = to_double(k, v); }},
      {"model.family", [](RunConfig& c, const std::string&, const std::string& v) { c.family = parse_family(trim(v)); }},
      {"model.rank", [](RunConfig& c, const std::string& k, const std::string& v) { c.rank = to_int<int>(k, v); }},
      {"model.kinds", [](RunConfig& c, const std::string&, const std::string& v) { c.kinds = parse_rbf_kinds(trim(v)); }},
      {"model.widths", [](RunConfig& c, const std::string& k, const std::string& v) { c.widths = to_ints(k, v); }},
      {"model.quad_panels", [](RunConfig& c, const std::string& k, const std::string& v) { c.quad_panels = to_int<int>(k, v); }},
      {"model.quad_points", [](RunConfig& c, const std::string& k, const std::string& v) { c.quad_points = to_int<int>(k, v); }},
      {"model.checkpoint", [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = trim(v); }},
      {"train.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_int<long long>(k, v); }},
      {"train.batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = to_int<int>(k, v); }},
      {"train.constraint_weight", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.constraint_weight = to_double(k, v); }},
      {"train.boundary_weight", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.boundary_weight = to_double(k, v); }},
      {"train.optimizer", [](RunConfig& c, const std::string&, const std::string& v) { c.train.optimizer.kind = parse_optimizer(trim(v)); }},
      {"train.lr_start", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.schedule.lr_start = to_double(k, v); }},
      {"train.lr_end", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.schedule.lr_end = to_double(k, v); }},
      {"train.lr_power", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.schedule.power = to_double(k, v); }},
      {"train.beta1", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.optimizer.beta1 = to_double(k, v); }},
      {"train.beta2", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.optimizer.beta2 = to_double(k, v); }},
      {"train.weight_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.optimizer.weight_decay = to_double(k, v); }},
      {"train.adam_eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.optimizer.eps = to_double(k, v); }},
      {"train.phase_length", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.phase_length = to_int<long long>(k, v); }},
      {"train.chunk_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.chunk_size = to_int<int>(k, v); }},
      {"train.checkpoint_every", [](RunConfig& c, const std::string& k, const std::string& v) { c.checkpoint_every = to_int<long long>(k, v); }},
      {"train.loss_csv", [](RunConfig& c, const std::string&, const std::string& v) { c.loss_csv = trim(v); }},
      {"train.resume", [](RunConfig& c, const std::string& k, const std::string& v) { c.resume = to_bool(k, v); }},
      {"eval.box_center", [](RunConfig& c, const std::string& k, const std::string& v) { c.box_center = to_doubles(k, v); }},
      {"eval.box_half_width", [](RunConfig& c, const std::string& k, const std::string& v) { c.box_half_width = to_doubles(k, v); }},
      {"eval.samples", [](RunConfig& c, const std::string& k, const std::string& v) { c.samples = to_int<long long>(k, v); }},
      {"eval.thresholds", [](RunConfig& c, const std::string& k, const std::string& v) { c.thresholds = to_doubles(k, v); }},
      {"eval.radii", [](RunConfig& c, const std::string& k, const std::string& v) { c.radii = to_doubles(k, v); }},
      {"eval.slice_a", [](RunConfig& c, const std::string& k, const std::string& v) { c.slice_a = to_int<int>(k, v); }},
      {"eval.slice_b", [](RunConfig& c, const std::string& k, const std::string& v) { c.slice_b = to_int<int>(k, v); }},
      {"eval.slice_fixed", [](RunConfig& c, const std::string& k, const std::string& v) { c.slice_fixed = to_doubles(k, v); }},
      {"eval.resolution", [](RunConfig& c, const std::string& k, const std::string& v) { c.resolution = to_int<int>(k, v); }},
      {"eval.report_name", [](RunConfig& c, const std::string&, const std::string& v) { c.report_name = trim(v); }},
  };
  return table;
}

const std::set<std::string> kSections = {"sde", "domain", "model", "train", "eval"};

}  // namespace

void RunConfig::validate() const {
  parse_benchmark(benchmark);
  sde.validate();
  train.validate();
  if (threads < 0) throw ConfigError("config: threads must be non-negative");
  if (rank < 1) throw ConfigError("config: model rank must be positive");
  if (family == ModelFamily::Trbfn && kinds.empty()) throw ConfigError("config: model kinds must not be empty");
  if (family == ModelFamily::Tffn) {
    MlpShape{widths}.validate();
    if (quad_panels < 1 || quad_points < 1 || quad_points > 64) {
      throw ConfigError("config: quad_panels must be positive and quad_points in [1, 64]");
    }
    if (train.optimizer.kind == OptimizerKind::TwoStep) {
      throw ConfigError("config: the two-step optimizer needs the trbfn family (tffn has no parameter groups)");
    }
  }
  if (checkpoint_every < 0) throw ConfigError("config: checkpoint_every must be non-negative");
  if (samples < 1) throw ConfigError("config: eval samples must be positive");
  for (const double t : thresholds) {
    if (!(t > 0.0)) throw ConfigError("config: eval thresholds must be positive");
  }
  if (resolution < 1) throw ConfigError("config: eval resolution must be positive");
  if (slice_a == slice_b || slice_a < 0 || slice_b < 0) {
    throw ConfigError("config: slice_a and slice_b must be distinct non-negative indices");
  }
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    if (!(candidates[k] > candidates[k - 1])) throw ConfigError("config: domain candidates must be ascending");
  }
}

RunConfig default_config(const std::string& benchmark) {
  const Benchmark bm = make_benchmark(parse_benchmark(benchmark));
  RunConfig c;
  c.benchmark = std::string(benchmark_name(bm.id));
  c.candidates = bm.defaults.refine_candidates;
  c.threshold = bm.defaults.refine_threshold.value_or(0.99);
  c.train.constraint_weight = bm.defaults.constraint_weight;
  c.train.boundary_weight = bm.defaults.boundary_weight;
  c.train.batch_size = bm.defaults.trbfn_batch;
  return c;
}

RunConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  // Collect (key, value) pairs, checking section names first.
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [name, node] : tree) {
    if (kSections.count(name)) {
      for (const auto& [key, leaf] : node) {
        if (!leaf.empty()) throw ConfigError("config: nested key '" + name + "." + key + "'");
        entries.emplace_back(name + "." + key, leaf.data());
      }
    } else if (node.empty()) {
      entries.emplace_back(name, node.data());
    } else {
      throw ConfigError("config: unknown section [" + name + "]");
    }
  }
  std::string benchmark = "ring2d";
  for (const auto& [key, value] : entries) {
    if (key == "sde.benchmark") benchmark = trim(value);
  }
  RunConfig config = default_config(benchmark);
  const Benchmark bm = make_benchmark(parse_benchmark(benchmark));
  bool batch_given = false;
  for (const auto& [key, value] : entries) {
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("config: unknown key '" + key + "'");
    }
    it->second(config, key, value);
    batch_given = batch_given || key == "train.batch_size";
  }
  if (!batch_given) {
    config.train.batch_size = config.family == ModelFamily::Tffn ? bm.defaults.tffn_batch : bm.defaults.trbfn_batch;
  }
  config.train.seed = config.seed;
  config.sde.seed = config.seed;
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config file '" + path + "' not found");
  }
  return parse_config(in);
}

void write_config(std::ostream& out, const RunConfig& c) {
  std::vector<std::string> kinds;
  for (const RbfKind k : c.kinds) kinds.emplace_back(rbf_kind_name(k));
  out << "seed = " << c.seed << '\n';
  out << "precision = " << precision_name(c.precision) << '\n';
  out << "threads = " << c.threads << '\n';
  out << "\n[sde]\n";
  out << "benchmark = " << c.benchmark << '\n';
  out << "step_size = " << format_double(c.sde.step_size) << '\n';
  out << "burnin_steps = " << c.sde.burnin_steps << '\n';
  out << "terminal_steps = " << c.sde.terminal_steps << '\n';
  out << "trajectories = " << c.sde.num_trajectories << '\n';
  out << "margin = " << format_double(c.sde.margin) << '\n';
  out << "anisotropic = " << (c.anisotropic ? "true" : "false") << '\n';
  out << "\n[domain]\n";
  out << "file = " << c.domain_file << '\n';
  out << "candidates = " << doubles_text(c.candidates) << '\n';
  out << "threshold = " << format_double(c.threshold) << '\n';
  out << "\n[model]\n";
  out << "family = " << family_name(c.family) << '\n';
  out << "rank = " << c.rank << '\n';
  out << "kinds = " << join(kinds, [](const std::string& s) { return s; }) << '\n';
  out << "widths = " << join(c.widths, [](int w) { return std::to_string(w); }) << '\n';
  out << "quad_panels = " << c.quad_panels << '\n';
  out << "quad_points = " << c.quad_points << '\n';
  out << "checkpoint = " << c.checkpoint << '\n';
  out << "\n[train]\n";
  out << "epochs = " << c.train.epochs << '\n';
  out << "batch_size = " << c.train.batch_size << '\n';
  out << "constraint_weight = " << format_double(c.train.constraint_weight) << '\n';
  out << "boundary_weight = " << format_double(c.train.boundary_weight) << '\n';
  out << "optimizer = " << optimizer_name(c.train.optimizer.kind) << '\n';
  out << "lr_start = " << format_double(c.train.schedule.lr_start) << '\n';
  out << "lr_end = " << format_double(c.train.schedule.lr_end) << '\n';
  out << "lr_power = " << format_double(c.train.schedule.power) << '\n';
  out << "beta1 = " << format_double(c.train.optimizer.beta1) << '\n';
  out << "beta2 = " << format_double(c.train.optimizer.beta2) << '\n';
  out << "weight_decay = " << format_double(c.train.optimizer.weight_decay) << '\n';
  out << "adam_eps = " << format_double(c.train.optimizer.eps) << '\n';
  out << "phase_length = " << c.train.phase_length << '\n';
  out << "chunk_size = " << c.train.chunk_size << '\n';
  out << "checkpoint_every = " << c.checkpoint_every << '\n';
  out << "loss_csv = " << c.loss_csv << '\n';
  out << "resume = " << (c.resume ? "true" : "false") << '\n';
  out << "\n[eval]\n";
  out << "box_center = " << doubles_text(c.box_center) << '\n';
  out << "box_half_width = " << doubles_text(c.box_half_width) << '\n';
  out << "samples = " << c.samples << '\n';
  out << "thresholds = " << doubles_text(c.thresholds) << '\n';
  out << "radii = " << doubles_text(c.radii) << '\n';
  out << "slice_a = " << c.slice_a << '\n';
  out << "slice_b = " << c.slice_b << '\n';
  out << "slice_fixed = " << doubles_text(c.slice_fixed) << '\n';
  out << "resolution = " << c.resolution << '\n';
  out << "report_name = " << c.report_name << '\n';
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  std::ostringstream sa;
  std::ostringstream sb;
  write_config(sa, a);
  write_config(sb, b);
  return sa.str() == sb.str();
}

}  // namespace tnfp
