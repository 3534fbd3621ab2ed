#include <algorithm>
#include <cmath>

#include "palmi/residuals.hpp"
#include "palmi/subsolvers.hpp"

namespace palmi {

KktReport rel_kkt_violation(const BlockProblem& problem, const BlockVec& z,
                            KktWorkspace* workspace) {
  problem.check_point(z);
  const Index n = problem.num_blocks();
  if (workspace != nullptr) workspace->warm.resize(static_cast<std::size_t>(n));

  KktReport report;
  report.objective = problem.objective(z);
  report.per_block_projection_gap.resize(static_cast<std::size_t>(n));
  double grad_sq = 0.0;
  double worst = 0.0;
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Vector g = problem.block_gradient(z, i);
    grad_sq += g.squaredNorm();
    const Vector target = z[i] - g;
    std::optional<Vector> warm;
    if (workspace != nullptr) warm = workspace->warm[k];
    const SubSolution proj = project_exact_solution(problem.constraints[k], target, warm);
    if (workspace != nullptr && proj.lambda.eq.size() > 0) workspace->warm[k] = proj.lambda.eq;
    const double gap = (z[i] - proj.x).norm();
    report.per_block_projection_gap[k] = gap;
    worst = std::max(worst, gap);
  }
  report.rel_kkt = worst / (1.0 + z.norm() + std::sqrt(grad_sq));
  if (!std::isfinite(report.rel_kkt)) throw NumericalError("rel_kkt is not finite");
  return report;
}

}  // namespace palmi
