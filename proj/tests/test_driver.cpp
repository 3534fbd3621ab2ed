#include "doctest.h"

#include <cmath>
#include <random>

#include "palmi/driver.hpp"
#include "palmi/problems.hpp"
#include "palmi/residuals.hpp"
#include "support/instances.hpp"

using namespace palmi;
using palmi::testing::max_lipschitz;
using palmi::testing::random_vector;

namespace {

BlockVec random_point(const BlockProblem& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vector> blocks;
  for (Index d : p.dims) blocks.push_back(random_vector(rng, d));
  return BlockVec(std::move(blocks));
}

SolverConfig base_config(const BlockProblem& p, Mode mode) {
  SolverConfig cfg;
  cfg.mode = mode;
  cfg.schedule = mode == Mode::kPalmE ? EpsilonSchedule::constant(1e-7)
                                      : EpsilonSchedule::sublinear(0.1, 2.0, 1e-7);
  cfg.sigma = SigmaPolicy::bounded(2.0, max_lipschitz(p), 1e3 * max_lipschitz(p));
  cfg.gamma_check = 2.0;
  cfg.stop.rel_kkt_tol = 1e-7;
  cfg.stop.max_outer_iters = 5000;
  cfg.record_history = true;
  return cfg;
}

// Independent re-evaluation of every recorded block certificate.
void check_certificates(const BlockProblem& p, const SolveResult& r) {
  const SolveHistory& h = r.trace.history;
  REQUIRE(h.steps.size() == r.trace.rows.size());
  for (std::size_t k = 0; k < h.steps.size(); ++k) {
    for (std::size_t i = 0; i < h.steps[k].size(); ++i) {
      const SubSolution& s = h.steps[k][i];
      const double root =
          std::sqrt(residual(p.constraints[i], s.x, s.lambda, h.targets[k][static_cast<Index>(i)]));
      CHECK(root <= r.trace.rows[k].eps * (1.0 + 1e-10));
    }
  }
}

}  // namespace

TEST_CASE("modes parse and print") {
  CHECK(parse_mode("PALMi") == Mode::kPalmI);
  CHECK(parse_mode("palme") == Mode::kPalmE);
  CHECK(parse_mode("palmf") == Mode::kPalmF);
  CHECK(to_string(Mode::kPalmF) == "palmf");
  CHECK_THROWS_AS(parse_mode("palm"), InputError);
}

TEST_CASE("configuration validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.stop.rel_kkt_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = SolverConfig{};
  cfg.stop.max_outer_iters = -1;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = SolverConfig{};
  cfg.max_retries = -2;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("polytope blocks: every step is certified and the run converges") {
  for (Mode mode : {Mode::kPalmI, Mode::kPalmE}) {
    const BlockProblem p = palmi::testing::two_block_polytope_qp(11);
    const SolveResult r = palmi_solve(p, random_point(p, 11), base_config(p, mode));
    CHECK(r.trace.status == SolveStatus::kConverged);
    CHECK(r.trace.final_rel_kkt() <= 1e-7);
    check_certificates(p, r);
    CHECK(r.trace.history.iterates.size() == r.trace.rows.size() + 1);
    CHECK(r.trace.history.iterates.back() == r.z);
  }
}

TEST_CASE("ALM blocks are certified") {
  const BlockProblem p = palmi::testing::two_block_box_qp_without_projector(12);
  SolverConfig cfg = base_config(p, Mode::kPalmI);
  cfg.schedule = EpsilonSchedule::sublinear(0.1, 2.0, 1e-7);
  cfg.stop.rel_kkt_tol = 1e-6;
  const SolveResult r = palmi_solve(p, random_point(p, 12), cfg);
  CHECK(r.trace.status == SolveStatus::kConverged);
  check_certificates(p, r);
}

TEST_CASE("PALMe objective is monotone once sigma exceeds L") {
  const BlockProblem p = palmi::testing::two_block_polytope_qp(13);
  const SolveResult r = palmi_solve(p, random_point(p, 13), base_config(p, Mode::kPalmE));
  // The first iterate is the projection of an infeasible start; from there on
  // the exact steps must not increase F.
  for (std::size_t k = 1; k < r.trace.rows.size(); ++k) {
    CHECK(r.trace.rows[k].objective <=
          r.trace.rows[k - 1].objective + 1e-12 * (1.0 + std::abs(r.trace.rows[k - 1].objective)));
  }
}

TEST_CASE("PALMe replaces a varying schedule and warns") {
  const BlockProblem p = palmi::testing::two_block_box_qp(14);
  SolverConfig cfg = base_config(p, Mode::kPalmE);
  cfg.schedule = EpsilonSchedule::exponential(1e-8, 0.5);
  const SolveResult r = palmi_solve(p, random_point(p, 14), cfg);
  REQUIRE_FALSE(r.trace.warnings.empty());
  for (const TraceRow& row : r.trace.rows) CHECK(row.eps == 1e-8);
}

TEST_CASE("a sigma below gamma L is reported") {
  const BlockProblem p = palmi::testing::two_block_box_qp(15);
  SolverConfig cfg = base_config(p, Mode::kPalmE);
  cfg.sigma = SigmaPolicy::fixed(0.5 * max_lipschitz(p));
  cfg.stop.max_outer_iters = 3;
  const SolveResult r = palmi_solve(p, random_point(p, 15), cfg);
  CHECK_FALSE(r.trace.warnings.empty());
}

TEST_CASE("PALMf on ellipsoids stays feasible and carries no eps") {
  EllipsoidQpSpec spec;
  spec.n = 3;
  spec.m = 50;
  spec.ncond = {3.0, 3.5, 4.0};
  spec.seed = 3;
  const BlockProblem p = build_ellipsoid_qp(spec);
  std::mt19937_64 rng(3);
  SolverConfig cfg = base_config(p, Mode::kPalmF);
  cfg.sigma = SigmaPolicy::bounded(2.0, max_lipschitz(p), 1e3 * max_lipschitz(p));
  cfg.stop.rel_kkt_tol = 1e-5;
  const SolveResult r = palmi_solve(p, ellipsoid_qp_random_start(spec, rng), cfg);
  CHECK(r.trace.status == SolveStatus::kConverged);
  for (const TraceRow& row : r.trace.rows) {
    CHECK(std::isnan(row.eps));
    CHECK(row.infeas_inf <= 1e-12);
  }
  for (Index i = 0; i < p.num_blocks(); ++i) {
    CHECK(p.constraints[static_cast<std::size_t>(i)].infeasibility(r.z[i]) <= 1e-12);
  }
}

TEST_CASE("a stationary start returns immediately") {
  const BlockProblem p = palmi::testing::two_block_box_qp(16);
  SolverConfig cfg = base_config(p, Mode::kPalmE);
  cfg.stop.rel_kkt_tol = 1e-12;
  const BlockVec star = palmi_solve(p, random_point(p, 16), cfg).z;
  cfg.stop.rel_kkt_tol = 1e-10;
  const SolveResult again = palmi_solve(p, star, cfg);
  CHECK(again.trace.status == SolveStatus::kConverged);
  CHECK(again.trace.rows.empty());
  CHECK(again.z == star);
}

TEST_CASE("iteration cap and bad inputs") {
  const BlockProblem p = palmi::testing::two_block_polytope_qp(17);
  SolverConfig cfg = base_config(p, Mode::kPalmI);
  cfg.stop.max_outer_iters = 2;
  const SolveResult r = palmi_solve(p, random_point(p, 17), cfg);
  CHECK(r.trace.status == SolveStatus::kMaxIters);
  CHECK(r.trace.rows.size() == 2);

  CHECK_THROWS_AS(palmi_solve(p, BlockVec({Vector::Zero(8)}), cfg), InputError);
  SolverConfig wrong = cfg;
  wrong.subsolvers = {SubsolverKind::kAdmm, SubsolverKind::kAuto};
  CHECK_THROWS_AS(palmi_solve(p, random_point(p, 17), wrong), InputError);
}

TEST_CASE("an unreachable certificate raises with the partial trace") {
  const BlockProblem p = palmi::testing::two_block_box_qp_without_projector(18);
  SolverConfig cfg = base_config(p, Mode::kPalmI);
  cfg.schedule = EpsilonSchedule::constant(1e-300);
  cfg.max_retries = 1;
  try {
    palmi_solve(p, random_point(p, 18), cfg);
    FAIL("expected SolveError");
  } catch (const SolveError& e) {
    CHECK(e.partial().rows.empty());
    CHECK(e.last().num_blocks() == 2);
  }
}

TEST_CASE("runs are deterministic") {
  const BlockProblem p = palmi::testing::two_block_polytope_qp(19);
  const SolverConfig cfg = base_config(p, Mode::kPalmI);
  const SolveResult a = palmi_solve(p, random_point(p, 19), cfg);
  const SolveResult b = palmi_solve(p, random_point(p, 19), cfg);
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  CHECK(a.z == b.z);
  for (std::size_t k = 0; k < a.trace.rows.size(); ++k) {
    CHECK(a.trace.rows[k].objective == b.trace.rows[k].objective);
  }
}
