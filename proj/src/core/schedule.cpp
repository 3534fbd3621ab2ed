#include <algorithm>
#include <cmath>
#include <sstream>

#include "palmi/core.hpp"

namespace palmi {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_common(double scale, double floor) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ParameterError("schedule: scale must be >= 0");
  if (!(floor >= 0.0) || !std::isfinite(floor)) throw ParameterError("schedule: floor must be >= 0");
}
}  // namespace

EpsilonSchedule EpsilonSchedule::constant(double value, double floor) {
  check_common(value, floor);
  return EpsilonSchedule(Kind::kConstant, value, 0.0, floor);
}

EpsilonSchedule EpsilonSchedule::exponential(double scale, double ratio, double floor) {
  check_common(scale, floor);
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("schedule: ratio must lie in (0,1)");
  return EpsilonSchedule(Kind::kExponential, scale, ratio, floor);
}

EpsilonSchedule EpsilonSchedule::sublinear(double scale, double power, double floor) {
  check_common(scale, floor);
  // Powers <= 1 are allowed: the experiments pair ell = 0.75 with a floor.
  if (!(power > 0.0) || !std::isfinite(power)) throw ParameterError("schedule: power must be > 0");
  return EpsilonSchedule(Kind::kSublinear, scale, power, floor);
}

double EpsilonSchedule::at(std::int64_t k) const {
  if (k < 0) throw InputError("schedule: negative iteration index");
  double v = scale_;
  const auto kd = static_cast<double>(k);
  switch (kind_) {
    case Kind::kConstant: break;
    case Kind::kExponential: v = scale_ * std::pow(rate_, kd); break;
    case Kind::kSublinear: v = scale_ / std::pow(kd + 1.0, rate_); break;
  }
  return std::max(v, floor_);
}

double EpsilonSchedule::tail_energy(std::int64_t k) const {
  if (k < 0) throw InputError("schedule: negative iteration index");
  if (scale_ == 0.0 && floor_ == 0.0) return 0.0;
  if (floor_ > 0.0) return kInf;
  const auto kd = static_cast<double>(k);
  switch (kind_) {
    case Kind::kConstant:
      return kInf;
    case Kind::kExponential:
      return scale_ * scale_ * std::pow(rate_, 2.0 * kd) / (1.0 - rate_ * rate_);
    case Kind::kSublinear: {
      const double p = 2.0 * rate_;
      if (p <= 1.0) return kInf;
      // sum_{t>=k} (t+1)^-p <= int_k^inf x^-p dx for k >= 1.
      const double s2 = scale_ * scale_;
      if (k == 0) return s2 + s2 / (p - 1.0);
      return s2 / ((p - 1.0) * std::pow(kd, p - 1.0));
    }
  }
  return kInf;
}

std::string EpsilonSchedule::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::kConstant: os << "constant(" << scale_; break;
    case Kind::kExponential: os << "exponential(" << scale_ << ", rho=" << rate_; break;
    case Kind::kSublinear: os << "sublinear(" << scale_ << ", ell=" << rate_; break;
  }
  if (floor_ > 0.0) os << ", floor=" << floor_;
  os << ")";
  return os.str();
}

double epsilon_at(const EpsilonSchedule& schedule, std::int64_t k) { return schedule.at(k); }
double tail_energy(const EpsilonSchedule& schedule, std::int64_t k) {
  return schedule.tail_energy(k);
}

// -- SigmaPolicy ---------------------------------------------------------------------

SigmaPolicy SigmaPolicy::fixed(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be positive");
  SigmaPolicy p;
  p.value_ = sigma;
  p.lower_ = sigma;
  p.upper_ = sigma;
  return p;
}

SigmaPolicy SigmaPolicy::bounded(double gamma, double lipschitz, double upper,
                                 std::optional<double> requested) {
  if (!(gamma > 1.0)) throw ParameterError("sigma policy: gamma must exceed 1");
  if (!(lipschitz > 0.0)) throw ParameterError("sigma policy: L must be positive");
  const double lower = gamma * lipschitz;
  if (!(upper >= lower)) throw ParameterError("sigma policy: M_u must be >= gamma L");
  SigmaPolicy p;
  p.bounded_ = true;
  p.gamma_ = gamma;
  p.lipschitz_ = lipschitz;
  p.lower_ = lower;
  p.upper_ = upper;
  p.value_ = std::clamp(requested.value_or(lower), lower, upper);
  return p;
}

double SigmaPolicy::initial(Index) const { return value_; }

double SigmaPolicy::next(Index, std::int64_t, double current) const {
  if (!bounded_) return value_;
  return std::clamp(current, lower_, upper_);
}

}  // namespace palmi
