#pragma once

// Command implementations behind the marginal_evo executable: run, psd-check,
// sweep and init-config.

#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "marginal_evo/config.hpp"
#include "marginal_evo/diagnostics.hpp"
#include "marginal_evo/ensembles.hpp"
#include "marginal_evo/errors.hpp"
#include "marginal_evo/evolution.hpp"
#include "marginal_evo/io.hpp"
#include "marginal_evo/parallel.hpp"
#include "marginal_evo/seed.hpp"
#include "marginal_evo/spectra.hpp"

namespace marginal_evo {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitIo = 3 };

struct DynamicsOverrides {
  std::optional<int> n_units;
  std::optional<int> n_steps;
  std::optional<int> burn_in;
  std::optional<double> dt;
  std::optional<double> gamma;
  std::optional<double> kappa;
};

struct CommonOptions {
  std::optional<std::string> config_path;
  std::optional<std::string> model;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  int threads = 0;  ///< 0 = MARGINAL_EVO_THREADS or hardware concurrency
};

struct RunOptions : CommonOptions {
  std::optional<int> generations;
  std::optional<int> population;
};

struct PsdCheckOptions : CommonOptions {
  double sigma_w2 = 0.0;
  int seeds = 8;
  DynamicsOverrides dynamics;
};

struct SweepOptions : CommonOptions {
  std::string sigma_grid;
  int seeds = 16;
  DynamicsOverrides dynamics;
};

struct SigmaGrid {
  double lo = 0.0;
  double hi = 0.0;
  int n = 1;
  std::vector<double> points() const {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return out;
  }
};

/// Parses "lo:hi:n" with 0 <= lo <= hi and n >= 1.
inline SigmaGrid parse_sigma_grid(const std::string& text) {
  SigmaGrid g;
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string::npos) throw ParseError("sigma grid must look like lo:hi:n, got '" + text + "'");
  const auto num = [&](std::string_view s, auto& value) {
    auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw ParseError("bad number '" + std::string(s) + "' in sigma grid");
    }
  };
  const std::string_view v(text);
  num(v.substr(0, c1), g.lo);
  num(v.substr(c1 + 1, c2 - c1 - 1), g.hi);
  num(v.substr(c2 + 1), g.n);
  if (!(g.lo >= 0) || !(g.hi >= g.lo) || !std::isfinite(g.hi)) {
    throw ValidationError("sigma_grid", "need 0 <= lo <= hi");
  }
  if (g.n < 1) throw ValidationError("sigma_grid", "need n >= 1");
  return g;
}

namespace detail {

inline ExperimentConfig resolve_config(const CommonOptions& o, ModelTag default_model) {
  ExperimentConfig cfg = o.config_path ? load_config(*o.config_path)
                                       : reference_config(o.model ? parse_model_tag(*o.model) : default_model);
  if (o.seed) cfg.master_seed = *o.seed;
  cfg.out_dir = o.out_dir;
  return cfg;
}

inline void apply(const DynamicsOverrides& d, DynamicsParams& p) {
  if (d.n_units) p.n_units = *d.n_units;
  if (d.n_steps) p.n_steps = *d.n_steps;
  if (d.burn_in) p.burn_in = *d.burn_in;
  if (d.dt) p.dt = *d.dt;
  if (d.gamma) p.gamma = *d.gamma;
  if (d.kappa) p.kappa = *d.kappa;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Maps library exceptions onto exit codes: configuration problems give 2,
/// filesystem problems 3, anything else 1.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidParameter& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace detail

/// Evolution run. Writes generations.csv, population.csv, best_psd.csv,
/// config.ini and manifest.json into the output directory.
inline int cmd_run(const RunOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    using clock = std::chrono::steady_clock;
    const auto started = std::chrono::system_clock::now();
    ExperimentConfig cfg = detail::resolve_config(o, ModelTag::C);
    if (o.generations) cfg.evolution.generations = *o.generations;
    if (o.population) cfg.evolution.population = *o.population;
    validate(cfg);
    const fs::path dir(o.out_dir);
    prepare_output_dir(dir);
    const unsigned threads = resolve_threads(o.threads);

    std::vector<double> gen_seconds;
    auto last = clock::now();
    const auto t0 = last;
    const auto records = run_evolution(
        cfg,
        [&](const GenerationRecord& r) {
          const auto now = clock::now();
          gen_seconds.push_back(std::chrono::duration<double>(now - last).count());
          last = now;
          out << "generation " << r.generation << " best_F " << format_csv_double(r.best_total) << " mean_sigma_w2 "
              << format_csv_double(r.mean_sigma) << " best_lambda " << format_csv_double(r.best_lambda) << '\n'
              << std::flush;
        },
        threads);

    const auto& final_gen = records.back();
    const Genotype best = final_gen.genotypes[final_gen.best_index];
    const SpectrumPair spectrum = snapshot_spectrum(best, cfg, cfg.evolution.n_seeds, threads);
    const double total_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    const std::vector<std::string> artifacts = {"generations.csv", "population.csv", "best_psd.csv", "config.ini",
                                                "manifest.json"};
    generations_csv(records).save(dir / artifacts[0]);
    population_csv(records).save(dir / artifacts[1]);
    spectrum_csv(spectrum).save(dir / artifacts[2]);
    write_file_atomic(dir / artifacts[3], save_config_string(cfg));

    nlohmann::ordered_json m;
    m["tool"] = "marginal_evo";
    m["tool_version"] = kToolVersion;
    m["command"] = "run";
    m["model"] = std::string(to_string(cfg.variant.tag));
    m["master_seed"] = cfg.master_seed;
    m["threads"] = threads;
    m["started"] = detail::utc_timestamp(started);
    m["finished"] = detail::utc_timestamp(std::chrono::system_clock::now());
    m["wall_clock_seconds"] = total_seconds;
    m["generation_seconds"] = gen_seconds;
    m["best_sigma_w2"] = best.sigma_w2;
    m["config_echo"] = save_config_string(cfg);
    std::vector<std::string> paths;
    for (const auto& a : artifacts) paths.push_back((dir / a).string());
    m["artifact_paths"] = paths;
    write_file_atomic(dir / artifacts[4], m.dump(2) + "\n");

    out << "best sigma_w2 " << format_csv_double(best.sigma_w2);
    try {
      out << " band_mean_rel_dev "
          << format_csv_double(band_mean_relative_deviation(spectrum.x_sim, spectrum.x_th, spectrum.omega,
                                                            cfg.fitness.band_min, cfg.fitness.band_max));
    } catch (const EmptyBand&) {
      out << " band_mean_rel_dev n/a";
    }
    out << '\n';
    return kExitOk;
  });
}

/// Snapshot spectrum at a fixed genotype; writes psd.csv and prints band
/// RelMSE against x_th.
inline int cmd_psd_check(const PsdCheckOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    ExperimentConfig cfg = detail::resolve_config(o, ModelTag::A);
    detail::apply(o.dynamics, cfg.dynamics);
    validate(cfg.dynamics);
    validate(cfg.spectral);
    validate(cfg.variant);
    if (!(o.sigma_w2 >= 0) || !std::isfinite(o.sigma_w2)) throw ValidationError("sigma_w2", "must be finite and >= 0");
    if (o.seeds < 1) throw ValidationError("seeds", "must be >= 1");
    const fs::path dir(o.out_dir);
    prepare_output_dir(dir);

    const SpectrumPair p = snapshot_spectrum({o.sigma_w2}, cfg, o.seeds, resolve_threads(o.threads));
    spectrum_csv(p).save(dir / "psd.csv");
    const auto& fw = cfg.fitness;
    out << "sigma_w2 " << format_csv_double(o.sigma_w2) << " seeds " << o.seeds << '\n';
    out << "relmse " << format_csv_double(relmse_band(p.x_sim, p.x_th, p.omega, fw.band_min, fw.band_max)) << '\n';
    out << "band_mean_rel_dev "
        << format_csv_double(band_mean_relative_deviation(p.x_sim, p.x_th, p.omega, fw.band_min, fw.band_max))
        << '\n';
    return kExitOk;
  });
}

/// Mean and sample std of the spectral-abscissa lambda over `seeds` matrices
/// per grid point; writes sweep.csv.
inline int cmd_sweep(const SweepOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    ExperimentConfig cfg = detail::resolve_config(o, ModelTag::A);
    detail::apply(o.dynamics, cfg.dynamics);
    validate(cfg.dynamics);
    validate(cfg.variant);
    const SigmaGrid grid = parse_sigma_grid(o.sigma_grid);
    if (o.seeds < 1) throw ValidationError("seeds", "must be >= 1");
    const fs::path dir(o.out_dir);
    prepare_output_dir(dir);

    const auto sigmas = grid.points();
    const std::size_t reps = static_cast<std::size_t>(o.seeds);
    std::vector<double> lambdas(sigmas.size() * reps);
    parallel_for(lambdas.size(), resolve_threads(o.threads), [&](std::size_t task) {
      const std::size_t i = task / reps, r = task % reps;
      const auto seed = derive_seed(cfg.master_seed, 0, static_cast<std::uint64_t>(i), r, Stream::Sweep);
      const auto w = sample_connectivity(cfg.variant, cfg.dynamics.n_units, sigmas[i], seed);
      lambdas[task] = lyapunov_spectral(cfg.dynamics, w).value;
    });

    CsvWriter csv({"sigma_w2", "lambda_mean", "lambda_std"});
    std::vector<double> means(sigmas.size());
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      double sum = 0.0;
      for (std::size_t r = 0; r < reps; ++r) sum += lambdas[i * reps + r];
      const double mean = sum / reps;
      double ss = 0.0;
      for (std::size_t r = 0; r < reps; ++r) ss += (lambdas[i * reps + r] - mean) * (lambdas[i * reps + r] - mean);
      const double sd = reps > 1 ? std::sqrt(ss / (reps - 1)) : 0.0;
      means[i] = mean;
      csv.cell(sigmas[i]).cell(mean).cell(sd);
      out << "sigma_w2 " << format_csv_double(sigmas[i]) << " lambda_mean " << format_csv_double(mean)
          << " lambda_std " << format_csv_double(sd) << '\n';
    }
    csv.save(dir / "sweep.csv");
    for (std::size_t i = 0; i + 1 < means.size(); ++i) {
      if ((means[i] < 0) != (means[i + 1] < 0)) {
        const double t = means[i] / (means[i] - means[i + 1]);
        out << "zero crossing near sigma_w2 " << format_csv_double(sigmas[i] + t * (sigmas[i + 1] - sigmas[i]))
            << '\n';
      }
    }
    return kExitOk;
  });
}

/// Writes a model's reference configuration to <out-dir>/config.ini.
inline int cmd_init_config(const std::string& model, const std::string& out_dir, std::ostream& out = std::cout,
                           std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    auto cfg = reference_config(parse_model_tag(model));
    cfg.out_dir = out_dir;
    const fs::path dir(out_dir);
    prepare_output_dir(dir);
    write_file_atomic(dir / "config.ini", save_config_string(cfg));
    out << (dir / "config.ini").string() << '\n';
    return kExitOk;
  });
}

namespace detail {

inline void add_common(CLI::App& cmd, CommonOptions& o, bool with_model = true) {
  auto* cfg = cmd.add_option("--config", o.config_path, "configuration file");
  if (with_model) cmd.add_option("--model", o.model, "reference configuration A|B|C")->excludes(cfg);
  cmd.add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd.add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
  cmd.add_option("--threads", o.threads, "worker threads, 0 = auto")->capture_default_str();
}

inline void add_dynamics(CLI::App& cmd, DynamicsOverrides& d) {
  cmd.add_option("--n-units", d.n_units, "network size N");
  cmd.add_option("--n-steps", d.n_steps, "integration steps L");
  cmd.add_option("--burn-in", d.burn_in, "discarded initial steps");
  cmd.add_option("--dt", d.dt, "time step");
  cmd.add_option("--gamma", d.gamma, "leak rate");
  cmd.add_option("--kappa", d.kappa, "noise intensity");
}

}  // namespace detail

/// Full command-line entry point.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Evolutionary search for marginally stable linear stochastic networks", "marginal_evo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "evolve sigma_w^2 and write generations.csv, best_psd.csv, manifest.json");
  detail::add_common(*run_cmd, run);
  run_cmd->add_option("--generations", run.generations, "override generation count K");
  run_cmd->add_option("--population", run.population, "override population size P");

  PsdCheckOptions psd;
  auto* psd_cmd = app.add_subcommand("psd-check", "simulated vs theoretical spectrum at one sigma_w^2");
  detail::add_common(*psd_cmd, psd);
  psd_cmd->add_option("--sigma-w2", psd.sigma_w2, "genotype")->required();
  psd_cmd->add_option("--seeds", psd.seeds, "seeds averaged")->capture_default_str();
  detail::add_dynamics(*psd_cmd, psd.dynamics);

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "spectral abscissa over a sigma_w^2 grid");
  detail::add_common(*sweep_cmd, sweep);
  sweep_cmd->add_option("--sigma-grid", sweep.sigma_grid, "lo:hi:n")->required();
  sweep_cmd->add_option("--seeds", sweep.seeds, "matrices per grid point")->capture_default_str();
  detail::add_dynamics(*sweep_cmd, sweep.dynamics);

  std::string init_model;
  std::string init_dir = "out";
  auto* init_cmd = app.add_subcommand("init-config", "write a reference configuration to <out-dir>/config.ini");
  init_cmd->add_option("--model", init_model, "A|B|C")->required();
  init_cmd->add_option("--out-dir", init_dir, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (*run_cmd) return cmd_run(run, out, err);
  if (*psd_cmd) return cmd_psd_check(psd, out, err);
  if (*sweep_cmd) return cmd_sweep(sweep, out, err);
  return cmd_init_config(init_model, init_dir, out, err);
}

}  // namespace marginal_evo
