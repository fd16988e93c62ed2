#pragma once

// Experiment configuration: parameter types, validation, the reference
// configurations for the three model variants, and the key-value file format.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "marginal_evo/errors.hpp"

namespace marginal_evo {

inline constexpr int kSchemaVersion = 1;

struct DynamicsParams {
  int n_units = 256;
  int n_steps = 2000;
  double dt = 0.05;
  double gamma = 1.0;
  double kappa = 1.0;
  int burn_in = 500;  ///< recorded samples start at this step

  /// Total depth horizon T = L * dt.
  double horizon() const noexcept { return n_steps * dt; }
  /// Finite-width expansion parameter T / N.
  double width_ratio() const noexcept { return horizon() / n_units; }

  bool operator==(const DynamicsParams&) const = default;
};

struct EvolutionParams {
  int population = 48;
  int generations = 100;
  double init_low = 0.30;
  double init_high = 1.30;
  double mut_std0 = 0.02;
  double mut_decay = 0.98;
  double beta0 = 5.0;
  double beta_growth = 1.05;
  double clip_low = 0.30;
  double clip_high = 1.30;
  int n_seeds = 4;
  bool elitism = false;

  /// Mutation standard deviation at generation k: mut_std0 * mut_decay^k.
  double mutation_std(int generation) const { return mut_std0 * std::pow(mut_decay, generation); }
  /// Inverse temperature at generation k: beta0 * beta_growth^k.
  double beta(int generation) const { return beta0 * std::pow(beta_growth, generation); }

  bool operator==(const EvolutionParams&) const = default;
};

struct FitnessWeights {
  double w_spec = 1.0;
  double w_lambda = 1.0;
  double w_crit = 1.0;
  double band_min = 0.1;
  double band_max = 2.0;

  bool operator==(const FitnessWeights&) const = default;
};

struct SpectralEstimatorParams {
  int segments = 8;  ///< Welch segments (Hann window, 50% overlap)

  bool operator==(const SpectralEstimatorParams&) const = default;
};

enum class ModelTag { A, B, C };
enum class Ensemble { Ginibre, RealSymmetric, PhasedGinibre };

/// How the phase factor cos(theta) is combined with the Gaussian draw G.
///  - Signed:  W = G * cos(theta). Zero-mean entries.
///  - Modulus: W = |G| * cos(theta). Every entry is (almost surely) positive,
///    which puts a Perron eigenvalue of about 0.76 * sigma_w * sqrt(N) into
///    the spectrum.
enum class PhaseConvention { Signed, Modulus };

struct ModelVariant {
  ModelTag tag = ModelTag::C;
  Ensemble ensemble = Ensemble::PhasedGinibre;
  double phase_std = 0.3;
  PhaseConvention phase_convention = PhaseConvention::Signed;
  /// Divide phased entries by sqrt(E[cos^2 theta]) so the entry variance
  /// stays sigma_w^2 / N.
  bool phase_rescale = true;

  bool operator==(const ModelVariant&) const = default;
};

struct ExperimentConfig {
  DynamicsParams dynamics;
  EvolutionParams evolution;
  FitnessWeights fitness;
  SpectralEstimatorParams spectral;
  ModelVariant variant;
  std::uint64_t master_seed = 1;
  std::string out_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Enum names

inline std::string_view to_string(ModelTag t) {
  switch (t) {
    case ModelTag::A: return "A";
    case ModelTag::B: return "B";
    case ModelTag::C: return "C";
  }
  return "?";
}

inline std::string_view to_string(Ensemble e) {
  switch (e) {
    case Ensemble::Ginibre: return "Ginibre";
    case Ensemble::RealSymmetric: return "RealSymmetric";
    case Ensemble::PhasedGinibre: return "PhasedGinibre";
  }
  return "?";
}

inline std::string_view to_string(PhaseConvention p) {
  return p == PhaseConvention::Signed ? "signed" : "modulus";
}

inline ModelTag parse_model_tag(std::string_view s) {
  if (s == "A" || s == "a") return ModelTag::A;
  if (s == "B" || s == "b") return ModelTag::B;
  if (s == "C" || s == "c") return ModelTag::C;
  throw ParseError("unknown model tag '" + std::string(s) + "' (expected A, B or C)");
}

inline Ensemble parse_ensemble(std::string_view s) {
  if (s == "Ginibre") return Ensemble::Ginibre;
  if (s == "RealSymmetric") return Ensemble::RealSymmetric;
  if (s == "PhasedGinibre") return Ensemble::PhasedGinibre;
  throw ParseError("unknown ensemble '" + std::string(s) + "'");
}

inline PhaseConvention parse_phase_convention(std::string_view s) {
  if (s == "signed") return PhaseConvention::Signed;
  if (s == "modulus") return PhaseConvention::Modulus;
  throw ParseError("unknown phase convention '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ValidationError(field, what);
}

inline bool finite(double x) { return std::isfinite(x); }

}  // namespace detail

inline void validate(const DynamicsParams& d) {
  using detail::finite;
  using detail::require;
  require(d.n_units >= 2, "DynamicsParams.n_units", "must be >= 2");
  require(d.n_steps >= 2, "DynamicsParams.n_steps", "must be >= 2");
  require(finite(d.dt) && d.dt > 0, "DynamicsParams.dt", "must be finite and > 0");
  require(finite(d.gamma) && d.gamma > 0, "DynamicsParams.gamma", "must be finite and > 0");
  require(finite(d.kappa) && d.kappa > 0, "DynamicsParams.kappa", "must be finite and > 0");
  require(d.burn_in >= 0 && d.burn_in < d.n_steps, "DynamicsParams.burn_in", "must lie in [0, n_steps)");
  require(finite(d.horizon()), "DynamicsParams.n_steps", "horizon n_steps*dt must be finite");
}

inline void validate(const EvolutionParams& e) {
  using detail::finite;
  using detail::require;
  require(e.population >= 1, "EvolutionParams.population", "must be >= 1");
  require(e.generations >= 1, "EvolutionParams.generations", "must be >= 1");
  require(finite(e.init_low), "EvolutionParams.init_low", "must be finite");
  require(finite(e.init_high), "EvolutionParams.init_high", "must be finite");
  require(e.init_low < e.init_high, "EvolutionParams.init_low", "must be < init_high");
  require(finite(e.mut_std0) && e.mut_std0 >= 0, "EvolutionParams.mut_std0", "must be finite and >= 0");
  require(e.mut_decay > 0 && e.mut_decay <= 1, "EvolutionParams.mut_decay", "must lie in (0, 1]");
  require(finite(e.beta0) && e.beta0 > 0, "EvolutionParams.beta0", "must be finite and > 0");
  require(finite(e.beta_growth) && e.beta_growth >= 1, "EvolutionParams.beta_growth", "must be finite and >= 1");
  require(finite(e.clip_low) && e.clip_low >= 0, "EvolutionParams.clip_low", "must be finite and >= 0");
  require(finite(e.clip_high), "EvolutionParams.clip_high", "must be finite");
  require(e.clip_low <= e.init_low, "EvolutionParams.clip_low", "must be <= init_low");
  require(e.clip_high >= e.init_high, "EvolutionParams.clip_high", "must be >= init_high");
  require(e.n_seeds >= 1, "EvolutionParams.n_seeds", "must be >= 1");
}

inline void validate(const FitnessWeights& f) {
  using detail::finite;
  using detail::require;
  require(finite(f.w_spec) && f.w_spec >= 0, "FitnessWeights.w_spec", "must be finite and >= 0");
  require(finite(f.w_lambda) && f.w_lambda >= 0, "FitnessWeights.w_lambda", "must be finite and >= 0");
  require(finite(f.w_crit) && f.w_crit >= 0, "FitnessWeights.w_crit", "must be finite and >= 0");
  require(finite(f.band_min) && f.band_min >= 0, "FitnessWeights.band_min", "must be finite and >= 0");
  require(finite(f.band_max) && f.band_max > 0, "FitnessWeights.band_max", "must be finite and > 0");
  require(f.band_min < f.band_max, "FitnessWeights.band_min", "must be < band_max");
}

inline void validate(const SpectralEstimatorParams& s) {
  detail::require(s.segments >= 1, "SpectralEstimator.segments", "must be >= 1");
}

inline void validate(const ModelVariant& v) {
  using detail::require;
  require(detail::finite(v.phase_std) && v.phase_std >= 0, "ModelVariant.phase_std", "must be finite and >= 0");
  switch (v.tag) {
    case ModelTag::A:
      require(v.ensemble == Ensemble::Ginibre, "ModelVariant.ensemble", "model A requires Ginibre");
      break;
    case ModelTag::B:
      require(v.ensemble == Ensemble::RealSymmetric, "ModelVariant.ensemble", "model B requires RealSymmetric");
      break;
    case ModelTag::C:
      require(v.ensemble == Ensemble::PhasedGinibre, "ModelVariant.ensemble", "model C requires PhasedGinibre");
      require(v.phase_std > 0, "ModelVariant.phase_std", "model C requires phase_std > 0");
      break;
  }
}

/// Checks every field and every cross-field rule; throws ValidationError
/// naming the first offending field.
inline void validate(const ExperimentConfig& c) {
  validate(c.dynamics);
  validate(c.evolution);
  validate(c.fitness);
  validate(c.spectral);
  validate(c.variant);
  if (c.variant.tag == ModelTag::A) {
    detail::require(c.fitness.w_crit == 0, "FitnessWeights.w_crit", "model A requires w_crit = 0");
  } else {
    detail::require(c.fitness.w_crit > 0, "FitnessWeights.w_crit", "models B and C require w_crit > 0");
  }
  detail::require(!c.out_dir.empty(), "ExperimentConfig.out_dir", "must not be empty");
}

/// Reference configuration for one model variant: N=256, L=2000, dt=0.05,
/// gamma=kappa=1, P=48, K=100, sigma_w^2 ~ U(0.30, 1.30), mutation std
/// 0.02 * 0.98^k, phase_std=0.3 for model C.
inline ExperimentConfig reference_config(ModelTag tag) {
  ExperimentConfig c;
  c.variant.tag = tag;
  switch (tag) {
    case ModelTag::A:
      c.variant.ensemble = Ensemble::Ginibre;
      c.variant.phase_std = 0.0;
      c.fitness.w_crit = 0.0;
      break;
    case ModelTag::B:
      c.variant.ensemble = Ensemble::RealSymmetric;
      c.variant.phase_std = 0.0;
      break;
    case ModelTag::C:
      c.variant.ensemble = Ensemble::PhasedGinibre;
      c.variant.phase_std = 0.3;
      break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Serialization
//
// Grammar (one item per line):
//   line     := blank | comment | section | entry
//   comment  := ('#' | ';') any*
//   section  := '[' name ']'
//   entry    := key ws* '=' ws* value
// `schema_version` must precede the first section. Every key listed in
// save_config is required, unknown sections and keys are rejected, and a key
// may appear only once.

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class KeyValueTable {
 public:
  struct Entry {
    std::string value;
    std::size_t line;
    bool used = false;
  };

  void put(const std::string& key, std::string value, std::size_t line) {
    if (!entries_.emplace(key, Entry{std::move(value), line}).second) {
      throw ParseError("duplicate key '" + key + "'", line);
    }
  }

  const Entry& take(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ParseError("missing key '" + key + "'");
    it->second.used = true;
    return it->second;
  }

  std::string str(const std::string& key) { return take(key).value; }

  double real(const std::string& key) {
    const auto& e = take(key);
    double v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) throw ParseError("key '" + key + "': not a number: '" + e.value + "'", e.line);
    return v;
  }

  long long integer(const std::string& key) {
    const auto& e = take(key);
    long long v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) throw ParseError("key '" + key + "': not an integer: '" + e.value + "'", e.line);
    return v;
  }

  int int32(const std::string& key) {
    const long long v = integer(key);
    if (v < INT32_MIN || v > INT32_MAX) throw ParseError("key '" + key + "': out of range");
    return static_cast<int>(v);
  }

  std::uint64_t u64(const std::string& key) {
    const auto& e = take(key);
    std::uint64_t v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) throw ParseError("key '" + key + "': not an unsigned integer: '" + e.value + "'", e.line);
    return v;
  }

  bool boolean(const std::string& key) {
    const auto& e = take(key);
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    throw ParseError("key '" + key + "': expected true or false, got '" + e.value + "'", e.line);
  }

  void reject_unused() const {
    for (const auto& [key, e] : entries_) {
      if (!e.used) throw ParseError("unknown key '" + key + "'", e.line);
    }
  }

 private:
  std::map<std::string, Entry> entries_;
};

inline const std::vector<std::string>& known_sections() {
  static const std::vector<std::string> s{"ExperimentConfig", "DynamicsParams", "EvolutionParams",
                                          "FitnessWeights",   "SpectralEstimator", "ModelVariant"};
  return s;
}

}  // namespace detail

inline std::string save_config_string(const ExperimentConfig& c) {
  using detail::format_double;
  std::ostringstream os;
  os << "# marginal-evo experiment configuration\n";
  os << "schema_version = " << kSchemaVersion << "\n\n";
  os << "[ExperimentConfig]\n";
  os << "master_seed = " << c.master_seed << "\n";
  os << "out_dir = " << c.out_dir << "\n\n";
  os << "[DynamicsParams]\n";
  os << "n_units = " << c.dynamics.n_units << "\n";
  os << "n_steps = " << c.dynamics.n_steps << "\n";
  os << "dt = " << format_double(c.dynamics.dt) << "\n";
  os << "gamma = " << format_double(c.dynamics.gamma) << "\n";
  os << "kappa = " << format_double(c.dynamics.kappa) << "\n";
  os << "burn_in = " << c.dynamics.burn_in << "\n\n";
  os << "[EvolutionParams]\n";
  os << "population = " << c.evolution.population << "\n";
  os << "generations = " << c.evolution.generations << "\n";
  os << "init_low = " << format_double(c.evolution.init_low) << "\n";
  os << "init_high = " << format_double(c.evolution.init_high) << "\n";
  os << "mut_std0 = " << format_double(c.evolution.mut_std0) << "\n";
  os << "mut_decay = " << format_double(c.evolution.mut_decay) << "\n";
  os << "beta0 = " << format_double(c.evolution.beta0) << "\n";
  os << "beta_growth = " << format_double(c.evolution.beta_growth) << "\n";
  os << "clip_low = " << format_double(c.evolution.clip_low) << "\n";
  os << "clip_high = " << format_double(c.evolution.clip_high) << "\n";
  os << "n_seeds = " << c.evolution.n_seeds << "\n";
  os << "elitism = " << (c.evolution.elitism ? "true" : "false") << "\n\n";
  os << "[FitnessWeights]\n";
  os << "w_spec = " << format_double(c.fitness.w_spec) << "\n";
  os << "w_lambda = " << format_double(c.fitness.w_lambda) << "\n";
  os << "w_crit = " << format_double(c.fitness.w_crit) << "\n";
  os << "band_min = " << format_double(c.fitness.band_min) << "\n";
  os << "band_max = " << format_double(c.fitness.band_max) << "\n\n";
  os << "[SpectralEstimator]\n";
  os << "segments = " << c.spectral.segments << "\n\n";
  os << "[ModelVariant]\n";
  os << "tag = " << to_string(c.variant.tag) << "\n";
  os << "ensemble = " << to_string(c.variant.ensemble) << "\n";
  os << "phase_std = " << format_double(c.variant.phase_std) << "\n";
  os << "phase_convention = " << to_string(c.variant.phase_convention) << "\n";
  os << "phase_rescale = " << (c.variant.phase_rescale ? "true" : "false") << "\n";
  return os.str();
}

/// Parses and validates a configuration document.
inline ExperimentConfig parse_config(std::string_view text) {
  detail::KeyValueTable table;
  std::string section;
  bool have_version = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& s : detail::known_sections()) known = known || s == section;
      if (!known) throw ParseError("unknown section '" + section + "'", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError("empty key", line_no);
    if (section.empty()) {
      if (key != "schema_version") throw ParseError("key '" + key + "' outside of a section", line_no);
      if (have_version) throw ParseError("duplicate key 'schema_version'", line_no);
      if (value != std::to_string(kSchemaVersion)) {
        throw ParseError("unsupported schema_version '" + value + "'", line_no);
      }
      have_version = true;
      continue;
    }
    table.put(section + "." + key, value, line_no);
  }
  if (!have_version) throw ParseError("missing schema_version");

  ExperimentConfig c;
  c.master_seed = table.u64("ExperimentConfig.master_seed");
  c.out_dir = table.str("ExperimentConfig.out_dir");

  c.dynamics.n_units = table.int32("DynamicsParams.n_units");
  c.dynamics.n_steps = table.int32("DynamicsParams.n_steps");
  c.dynamics.dt = table.real("DynamicsParams.dt");
  c.dynamics.gamma = table.real("DynamicsParams.gamma");
  c.dynamics.kappa = table.real("DynamicsParams.kappa");
  c.dynamics.burn_in = table.int32("DynamicsParams.burn_in");

  c.evolution.population = table.int32("EvolutionParams.population");
  c.evolution.generations = table.int32("EvolutionParams.generations");
  c.evolution.init_low = table.real("EvolutionParams.init_low");
  c.evolution.init_high = table.real("EvolutionParams.init_high");
  c.evolution.mut_std0 = table.real("EvolutionParams.mut_std0");
  c.evolution.mut_decay = table.real("EvolutionParams.mut_decay");
  c.evolution.beta0 = table.real("EvolutionParams.beta0");
  c.evolution.beta_growth = table.real("EvolutionParams.beta_growth");
  c.evolution.clip_low = table.real("EvolutionParams.clip_low");
  c.evolution.clip_high = table.real("EvolutionParams.clip_high");
  c.evolution.n_seeds = table.int32("EvolutionParams.n_seeds");
  c.evolution.elitism = table.boolean("EvolutionParams.elitism");

  c.fitness.w_spec = table.real("FitnessWeights.w_spec");
  c.fitness.w_lambda = table.real("FitnessWeights.w_lambda");
  c.fitness.w_crit = table.real("FitnessWeights.w_crit");
  c.fitness.band_min = table.real("FitnessWeights.band_min");
  c.fitness.band_max = table.real("FitnessWeights.band_max");

  c.spectral.segments = table.int32("SpectralEstimator.segments");

  c.variant.tag = parse_model_tag(table.str("ModelVariant.tag"));
  c.variant.ensemble = parse_ensemble(table.str("ModelVariant.ensemble"));
  c.variant.phase_std = table.real("ModelVariant.phase_std");
  c.variant.phase_convention = parse_phase_convention(table.str("ModelVariant.phase_convention"));
  c.variant.phase_rescale = table.boolean("ModelVariant.phase_rescale");

  table.reject_unused();
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace marginal_evo
