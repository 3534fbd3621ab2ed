#include "doctest.h"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "palmi/experiment.hpp"

using namespace palmi;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("palmi_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* const kSmallMmot = R"(
[problem]
family = mmot
K = 4
[solver]
modes = palmi, palme
sigma = 1e-2
kkt_tol = 1e-5
max_iters = 200
[schedule]
kind = sublinear
scale = 0.1
rate = 0.75
floor = 1e-7
exact_eps = 1e-5
[batch]
seeds = 1-3
)";

}  // namespace

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("1-3") == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(parse_seed_list("3, 5,8") == std::vector<std::uint64_t>{3, 5, 8});
  CHECK(parse_seed_list("1-2,10") == std::vector<std::uint64_t>{1, 2, 10});
  CHECK(parse_seed_list("").empty());
  CHECK_THROWS_AS(parse_seed_list("3-1"), InputError);
  CHECK_THROWS_AS(parse_seed_list("x"), InputError);
  ExperimentConfig cfg;
  CHECK(cfg.effective_seeds() == std::vector<std::uint64_t>{0});
}

TEST_CASE("configuration parsing") {
  const ExperimentConfig cfg = parse_config_text(kSmallMmot);
  CHECK(cfg.family == Family::kMmot);
  CHECK(cfg.mmot.K == 4);
  CHECK(cfg.modes == std::vector<Mode>{Mode::kPalmI, Mode::kPalmE});
  CHECK(cfg.stop.rel_kkt_tol == 1e-5);
  CHECK(cfg.stop.max_outer_iters == 200);
  CHECK(cfg.effective_seeds().size() == 3);
  CHECK(cfg.schedule.for_mode(Mode::kPalmE).kind() == EpsilonSchedule::Kind::kConstant);
  CHECK(cfg.schedule.for_mode(Mode::kPalmI).kind() == EpsilonSchedule::Kind::kSublinear);

  const ExperimentConfig eqp = parse_config_text("[problem]\nfamily = eqp\nn = 3\nm = 40\n"
                                                 "ncond = 3.0, 3.5, 4.0\n");
  CHECK(eqp.family == Family::kEllipsoidQp);
  CHECK(eqp.eqp.ncond.size() == 3);
}

TEST_CASE("configuration errors name the culprit") {
  CHECK_THROWS_WITH_AS(parse_config_text("[problem]\nfamliy = mmot\n"), doctest::Contains("famliy"),
                       InputError);
  CHECK_THROWS_WITH_AS(parse_config_text("[extra]\nx = 1\n"), doctest::Contains("extra"),
                       InputError);
  CHECK_THROWS_AS(parse_config_text("[solver]\nsigma = abc\n"), InputError);
  CHECK_THROWS_AS(parse_config_text("[solver]\nmodes = palmx\n"), InputError);
  CHECK_THROWS_AS(parse_config_text("[problem]\nfamily = other\n"), InputError);
  CHECK_THROWS_AS(parse_config_file("/nonexistent/palmi.ini"), InputError);
}

TEST_CASE("trace CSV round trip") {
  std::vector<TraceRow> rows(3);
  for (int k = 0; k < 3; ++k) {
    TraceRow& r = rows[static_cast<std::size_t>(k)];
    r.iter = k;
    r.objective = -1.0 / (k + 3.0);
    r.rel_kkt = std::pow(10.0, -k - 1);
    r.eps = k == 1 ? std::numeric_limits<double>::quiet_NaN() : 0.1 / (k + 1.0);
    r.max_sqrt_residual = 1e-9 * k;
    r.infeas_inf = 1e-13;
    r.step_norm = 0.25;
    r.sigma_min = 1e-2;
    r.sigma_max = 2e-2;
    r.cum_time_s = 0.5 * k;
    r.inner_iters = 10 + k;
    r.retries = k;
  }
  const fs::path dir = scratch_dir("csv");
  {
    std::ofstream out(dir / "t.csv");
    write_trace_csv(out, rows);
  }
  std::ifstream in(dir / "t.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == kTraceHeader);
  const std::vector<TraceRow> back = read_trace_csv(dir / "t.csv");
  REQUIRE(back.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back[k].iter == rows[k].iter);
    CHECK(back[k].objective == rows[k].objective);
    CHECK(back[k].rel_kkt == rows[k].rel_kkt);
    CHECK(std::isnan(back[k].eps) == std::isnan(rows[k].eps));
    CHECK(back[k].step_norm == rows[k].step_norm);
    CHECK(back[k].cum_time_s == rows[k].cum_time_s);
  }
}

TEST_CASE("reference files round trip and feed the good start") {
  ExperimentConfig cfg = parse_config_text(kSmallMmot);
  const BlockProblem p = build_problem(cfg);
  const BlockVec z = initial_point(cfg, 7, nullptr);
  const fs::path dir = scratch_dir("ref");
  write_reference(dir / "ref.txt", z);
  const BlockVec back = read_reference(dir / "ref.txt", p.dims);
  CHECK(back.distance(z) == 0.0);
  const std::vector<Index> wrong = {3};
  CHECK_THROWS_AS(read_reference(dir / "ref.txt", wrong), InputError);

  cfg.init = InitKind::kGood;
  const BlockVec start = initial_point(cfg, 9, &back);
  CHECK((start.flatten() - z.flatten()).lpNorm<Eigen::Infinity>() <= cfg.perturbation);
  CHECK(start.distance(initial_point(cfg, 9, &back)) == 0.0);
  CHECK(start.distance(initial_point(cfg, 10, &back)) > 0.0);
}

TEST_CASE("batches are reproducible and write the summary") {
  ExperimentConfig cfg = parse_config_text(kSmallMmot);
  const fs::path dir = scratch_dir("batch");
  cfg.out_dir = dir.string();
  cfg.diagnostics = true;
  cfg.jobs = 2;
  const BatchReport a = run_experiment(cfg);
  REQUIRE(a.runs.size() == 6);
  CHECK(a.runs[0].seed == 1);
  CHECK(a.runs[0].mode == Mode::kPalmI);
  CHECK(a.runs[1].mode == Mode::kPalmE);
  for (const RunRecord& r : a.runs) {
    CHECK(r.ok);
    CHECK(r.status == SolveStatus::kConverged);
    CHECK(fs::exists(r.trace_path));
    REQUIRE(r.diagnostics.has_value());
  }

  cfg.jobs = 1;
  cfg.out_dir.clear();
  const BatchReport b = run_experiment(cfg);
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].iters == b.runs[i].iters);
    CHECK(a.runs[i].final_obj == b.runs[i].final_obj);
    CHECK(a.runs[i].final_kkt == b.runs[i].final_kkt);
  }

  std::ifstream in(a.summary_path);
  const nlohmann::json summary = nlohmann::json::parse(in);
  CHECK(summary.at("per_run").size() == 6);
  CHECK(summary.at("per_run")[0].contains("final_kkt"));
  CHECK(summary.at("modes").contains("palmi"));
  CHECK(summary.at("modes").at("palme").at("converged") == 3);
  CHECK(fs::exists(a.averaged_history_path));
}

TEST_CASE("solver failures are recorded, not thrown") {
  // ADMM cannot certify sqrt(r) <= 1e-300; tiny MMOT instances, in contrast,
  // can land on a vertex with an exactly zero residual.
  const ExperimentConfig cfg = parse_config_text(
      "[problem]\nfamily = eqp\nn = 3\nm = 40\nncond = 3.0, 3.5, 4.0\n"
      "[solver]\nmodes = palmi\n[schedule]\nkind = constant\nscale = 1e-300\nfloor = 0\n"
      "[batch]\nseeds = 1\n");
  const BatchReport r = run_experiment(cfg);
  REQUIRE(r.runs.size() == 1);
  CHECK_FALSE(r.runs[0].ok);
  CHECK_FALSE(r.runs[0].error.empty());
}
