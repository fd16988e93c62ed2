#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "marginal_evo/evolution.hpp"

using namespace marginal_evo;

namespace {

// Small, fast configuration: N=32 with the reference depth, so the Welch grid
// keeps five points in the fitness band.
ExperimentConfig tiny(ModelTag tag) {
  auto c = reference_config(tag);
  c.dynamics.n_units = 32;
  c.evolution.population = 6;
  c.evolution.generations = 3;
  c.evolution.n_seeds = 2;
  return c;
}

// Normal-approximation band for a multinomial cell count.
double band(double n, double p, double sigmas) { return sigmas * std::sqrt(n * p * (1 - p)); }

}  // namespace

TEST(Fitness, SingleCriticalTerm) {
  auto c = reference_config(ModelTag::C);
  c.fitness.w_spec = 0;
  c.fitness.w_lambda = 0;
  c.fitness.w_crit = 1;
  c.dynamics.n_units = 32;
  const auto f = evaluate({1.3}, c, 0, 0);
  EXPECT_NEAR(f.total, 0.09, 1e-15);
  EXPECT_EQ(f.crit_term, f.total);
  EXPECT_EQ(f.spec_term, 0.0);
  EXPECT_EQ(f.lambda_term, 0.0);
}

TEST(Fitness, ModelAHasNoCriticalTerm) {
  const auto c = tiny(ModelTag::A);
  for (double s : {0.3, 0.7, 1.0}) EXPECT_EQ(evaluate({s}, c, 0, 1).crit_term, 0.0);
}

TEST(Fitness, ZeroConnectivityDiagnosticMode) {
  auto c = tiny(ModelTag::C);
  const double gamma2 = c.dynamics.gamma * c.dynamics.gamma;
  EvaluateOptions opts;
  opts.zero_connectivity = true;
  const auto f = evaluate({gamma2}, c, 0, 0, opts);
  EXPECT_EQ(f.lambda_value, -c.dynamics.gamma);
  EXPECT_EQ(f.lambda_term, c.fitness.w_lambda * gamma2);
  EXPECT_EQ(f.crit_term, 0.0);
}

TEST(Fitness, TermsMatchWeightedComponents) {
  auto c = tiny(ModelTag::C);
  c.fitness.w_spec = 0.7;
  c.fitness.w_lambda = 2.5;
  c.fitness.w_crit = 0.3;
  for (double s : {0.4, 0.8, 0.95}) {
    const auto f = evaluate({s}, c, 1, 2);
    ASSERT_EQ(f.penalty_reason, PenaltyReason::None);
    EXPECT_EQ(f.spec_term, 0.7 * f.relmse);
    EXPECT_EQ(f.lambda_term, 2.5 * f.lambda_value * f.lambda_value);
    EXPECT_EQ(f.crit_term, 0.3 * (s - 1.0) * (s - 1.0));
    EXPECT_EQ(f.total, f.spec_term + f.lambda_term + f.crit_term);
    EXPECT_GE(f.relmse, 0.0);
  }
}

TEST(Fitness, LambdaIsMeanOverSampledMatrices) {
  const auto c = tiny(ModelTag::A);
  const Genotype g{0.9};
  double sum = 0;
  for (int r = 0; r < c.evolution.n_seeds; ++r) {
    const auto seed = derive_seed(c.master_seed, 2, 3, r);
    sum += lyapunov_spectral(c.dynamics, sample_connectivity(c.variant, 32, 0.9, sub_seed(seed, Stream::Matrix))).value;
  }
  EXPECT_DOUBLE_EQ(evaluate(g, c, 2, 3).lambda_value, sum / c.evolution.n_seeds);
}

TEST(Fitness, DivergenceMapsToPenalty) {
  auto c = tiny(ModelTag::C);
  c.variant.phase_convention = PhaseConvention::Modulus;  // Perron outlier, strongly supercritical
  c.dynamics.n_units = 64;
  const auto f = evaluate({1.3}, c, 0, 0);
  EXPECT_EQ(f.penalty_reason, PenaltyReason::Divergence);
  EXPECT_GT(f.lambda_value, 0.0);
  EXPECT_EQ(f.penalty, kDivergencePenalty);
  EXPECT_EQ(f.total, kDivergencePenalty + f.lambda_value * f.lambda_value);
  EXPECT_TRUE(std::isfinite(f.total));
}

TEST(Fitness, NearPoleBandPointsExcluded) {
  auto c = tiny(ModelTag::C);
  c.fitness.band_min = 0.0;
  // the omega = 0 bin has omega^2 + gamma^2 - sigma_w2 = -0.1 < 1e-6
  const auto f = evaluate({1.1}, c, 0, 4);
  EXPECT_GE(f.excluded_band_points, 1);
}

TEST(Fitness, RejectsGenotypeOutsideInterval) {
  const auto c = tiny(ModelTag::C);
  EXPECT_THROW(evaluate({0.1}, c, 0, 0), ValidationError);
  EXPECT_THROW(evaluate({1.31}, c, 0, 0), ValidationError);
  auto bad = c;
  bad.dynamics.dt = 0;
  EXPECT_THROW(evaluate({1.0}, bad, 0, 0), ValidationError);
}

TEST(Fitness, DeterministicAndThreadIndependent) {
  const auto c = tiny(ModelTag::C);
  EvaluateOptions par;
  par.threads = 3;
  EXPECT_EQ(evaluate({0.8}, c, 4, 5), evaluate({0.8}, c, 4, 5, par));
}

TEST(Selection, ZeroBetaIsUniform) {
  const std::vector<double> f{0.3, 5.0, 1.0, 100.0, 2.0};
  const int draws = 100000;
  const auto idx = select(f, 0.0, 11, draws);
  std::vector<int> counts(f.size(), 0);
  for (int i : idx) ++counts[i];
  for (int k : counts) EXPECT_NEAR(k, draws / 5.0, band(draws, 0.2, 3));
}

TEST(Selection, TwoPointBoltzmann) {
  const std::vector<double> f{0.0, 10.0};
  const auto idx = select(f, 10.0, 3, 10000);
  const double freq0 = std::count(idx.begin(), idx.end(), 0) / 10000.0;
  EXPECT_GE(freq0, 0.999);
}

TEST(Selection, ModerateBetaMatchesBoltzmannWeights) {
  const std::vector<double> f{0.0, 0.1, 0.3};
  const double beta = 5.0;
  const int draws = 100000;
  const auto idx = select(f, beta, 8, draws);
  double z = 0;
  for (double v : f) z += std::exp(-beta * v);
  for (int i = 0; i < 3; ++i) {
    const double p = std::exp(-beta * f[i]) / z;
    EXPECT_NEAR(std::count(idx.begin(), idx.end(), i), draws * p, band(draws, p, 4)) << i;
  }
}

TEST(Selection, EqualFitnessUniformForAnyBeta) {
  const std::vector<double> f(4, 7.5);
  const int draws = 100000;
  for (double beta : {0.0, 1.0, 1e6}) {
    const auto idx = select(f, beta, 21, draws);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::count(idx.begin(), idx.end(), i), draws / 4.0, band(draws, 0.25, 3));
  }
}

TEST(Selection, ShiftInvariant) {
  const std::vector<double> f{0.2, 0.5, 0.1, 0.9};
  std::vector<double> g(f);
  for (double& v : g) v += 1e3;
  EXPECT_EQ(select(f, 7.0, 99, 500), select(g, 7.0, 99, 500));
  // huge offsets would underflow without the max-shift
  for (double& v : g) v += 1e8;
  EXPECT_EQ(select(f, 7.0, 99, 500), select(g, 7.0, 99, 500));
}

TEST(Selection, InputChecks) {
  EXPECT_THROW(select(std::vector<double>{}, 1.0, 1, 1), InvalidInput);
  EXPECT_THROW(select(std::vector<double>{1.0, NAN}, 1.0, 1, 1), InvalidInput);
  EXPECT_THROW(select(std::vector<double>{1.0, INFINITY}, 1.0, 1, 1), InvalidInput);
  EXPECT_THROW(select(std::vector<double>{1.0}, -1.0, 1, 1), InvalidInput);
  EXPECT_THROW(select(std::vector<double>{1.0}, 1.0, 1, 0), InvalidInput);
  EXPECT_EQ(select(std::vector<double>{3.0}, 1.0, 1, 5), std::vector<int>(5, 0));
}

TEST(Mutation, ScheduleIsExact) {
  const EvolutionParams e;
  EXPECT_EQ(e.mutation_std(0), 0.02);
  EXPECT_DOUBLE_EQ(e.mutation_std(1), 0.0196);
  for (int k = 0; k < 100; ++k) EXPECT_DOUBLE_EQ(e.mutation_std(k), 0.02 * std::pow(0.98, k));
  EXPECT_EQ(e.beta(0), 5.0);
  EXPECT_DOUBLE_EQ(e.beta(10), 5.0 * std::pow(1.05, 10));
}

TEST(Mutation, EmpiricalStdFollowsSchedule) {
  const EvolutionParams e;
  for (int k : {0, 50}) {
    double sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double d = mutate({0.8}, k, e, derive_seed(5, k, i, 0, Stream::Mutate)).sigma_w2 - 0.8;
      sq += d * d;
    }
    const double sd = std::sqrt(sq / n);
    EXPECT_NEAR(sd / e.mutation_std(k), 1.0, 4 / std::sqrt(2.0 * n));
  }
}

TEST(Mutation, ProjectionOntoInterval) {
  const EvolutionParams e;
  int at_top = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto c = mutate({e.clip_high}, 0, e, s);
    EXPECT_LE(c.sigma_w2, e.clip_high);
    EXPECT_GE(c.sigma_w2, e.clip_low);
    if (c.sigma_w2 == e.clip_high) ++at_top;
    const auto low = mutate({e.clip_low}, 0, e, s);
    EXPECT_GE(low.sigma_w2, e.clip_low);
  }
  EXPECT_GT(at_top, 60);  // about half of the draws are positive
}

TEST(Mutation, ZeroNoiseIsIdentity) {
  EvolutionParams e;
  e.mut_std0 = 0;
  EXPECT_EQ(mutate({0.77}, 3, e, 12).sigma_w2, 0.77);
}

TEST(Mutation, Deterministic) {
  const EvolutionParams e;
  EXPECT_EQ(mutate({0.9}, 2, e, 44), mutate({0.9}, 2, e, 44));
}

TEST(Evolution, SingleGenerationRecordsInitialPopulation) {
  auto c = tiny(ModelTag::C);
  c.evolution.generations = 1;
  const auto recs = run_evolution(c);
  ASSERT_EQ(recs.size(), 1u);
  const auto& r = recs[0];
  EXPECT_EQ(r.generation, 0);
  ASSERT_EQ(r.genotypes.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_GE(r.genotypes[i].sigma_w2, c.evolution.init_low);
    EXPECT_LT(r.genotypes[i].sigma_w2, c.evolution.init_high);
    EXPECT_EQ(r.fitness[i], evaluate(r.genotypes[i], c, 0, i));
  }
}

TEST(Evolution, RecordInvariants) {
  const auto c = tiny(ModelTag::C);
  const auto recs = run_evolution(c);
  ASSERT_EQ(recs.size(), 3u);
  for (const auto& r : recs) {
    ASSERT_EQ(r.genotypes.size(), 6u);
    ASSERT_EQ(r.fitness.size(), 6u);
    double best = INFINITY, mean_s = 0;
    for (int i = 0; i < 6; ++i) {
      best = std::min(best, r.fitness[i].total);
      mean_s += r.genotypes[i].sigma_w2 / 6;
      EXPECT_GE(r.genotypes[i].sigma_w2, c.evolution.clip_low);
      EXPECT_LE(r.genotypes[i].sigma_w2, c.evolution.clip_high);
    }
    EXPECT_EQ(r.fitness[r.best_index].total, best);
    EXPECT_EQ(r.best_sigma, r.genotypes[r.best_index].sigma_w2);
    EXPECT_EQ(r.best_lambda, r.fitness[r.best_index].lambda_value);
    EXPECT_NEAR(r.mean_sigma, mean_s, 1e-15);
    EXPECT_EQ(r.beta, c.evolution.beta(r.generation));
    EXPECT_EQ(r.mut_std, c.evolution.mutation_std(r.generation));
  }
}

TEST(Evolution, DeterministicAcrossThreadCounts) {
  const auto c = tiny(ModelTag::A);
  const auto a = run_evolution(c, {}, 1);
  EXPECT_EQ(a, run_evolution(c, {}, 1));
  EXPECT_EQ(a, run_evolution(c, {}, 4));
  auto other = c;
  other.master_seed = 2;
  EXPECT_NE(a, run_evolution(other, {}, 1));
}

TEST(Evolution, SingleIndividualLineage) {
  auto c = tiny(ModelTag::C);
  c.evolution.population = 1;
  c.evolution.generations = 4;
  c.evolution.mut_std0 = 0;
  const auto recs = run_evolution(c);
  for (const auto& r : recs) {
    ASSERT_EQ(r.genotypes.size(), 1u);
    EXPECT_EQ(r.genotypes[0], recs[0].genotypes[0]);
    EXPECT_EQ(r.best_index, 0);
  }
}

TEST(Evolution, ProgressSinkSeesEveryGeneration) {
  const auto c = tiny(ModelTag::C);
  std::vector<int> seen;
  run_evolution(c, [&](const GenerationRecord& r) { seen.push_back(r.generation); });
  EXPECT_EQ(seen, (std::vector<int>{0, 1, 2}));
}

TEST(Evolution, QuadraticLandscapePullsTowardAnchor) {
  auto c = reference_config(ModelTag::C);
  c.fitness.w_spec = 0;
  c.fitness.w_lambda = 0;
  c.fitness.w_crit = 1;
  c.dynamics.n_units = 8;  // lambda is still computed; keep the eigenproblem cheap
  c.evolution.n_seeds = 1;
  const auto recs = run_evolution(c);
  const auto spread = [](const GenerationRecord& r) {
    double acc = 0;
    for (const auto& g : r.genotypes) acc += std::abs(g.sigma_w2 - 1.0);
    return acc / r.genotypes.size();
  };
  EXPECT_LT(spread(recs.back()), spread(recs.front()));
}

TEST(Evolution, ElitismKeepsBestIndividual) {
  auto c = tiny(ModelTag::C);
  c.evolution.elitism = true;
  c.evolution.generations = 4;
  const auto recs = run_evolution(c);
  for (std::size_t k = 1; k < recs.size(); ++k) {
    EXPECT_EQ(recs[k].genotypes[0], recs[k - 1].genotypes[recs[k - 1].best_index]);
  }
}

TEST(Snapshot, ZeroGenotypeMatchesLorentzian) {
  auto c = reference_config(ModelTag::A);
  c.dynamics.n_units = 64;
  const auto p = snapshot_spectrum({0.0}, c, 8);
  std::vector<double> lorentz;
  for (double w : p.omega) lorentz.push_back(2.0 / (w * w + 1.0));
  EXPECT_LT(band_mean_relative_deviation(p.x_sim, lorentz, p.omega, 0.1, 2.0), 0.10);
  EXPECT_EQ(p.n_seeds_averaged, 8);
}

TEST(Snapshot, StoredIdentityAndShape) {
  auto c = tiny(ModelTag::C);
  const auto p = snapshot_spectrum({0.9}, c, 2);
  ASSERT_EQ(p.omega.size(), p.x_sim.size());
  ASSERT_EQ(p.omega.size(), p.x_th.size());
  EXPECT_EQ(p.omega.front(), 0.0);
  for (std::size_t i = 0; i < p.omega.size(); ++i) {
    EXPECT_EQ(p.x_th[i], p.x0[i] + p.correction_factor * p.x1[i]);
    EXPECT_GE(p.x_sim[i], 0.0);
    if (i) {
      EXPECT_GT(p.omega[i], p.omega[i - 1]);
    }
  }
  EXPECT_THROW(snapshot_spectrum({0.9}, c, 0), InvalidParameter);
}
