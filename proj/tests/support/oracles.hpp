#pragma once

// Independent oracles for the model problems (test-only code).

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tmce_test {

/// Radially symmetric profile of div(Du/omega) = alpha/omega on a flat disk
/// of radius R with u(R) = 0, by RK4 shooting on the slope variable
/// s = u' / sqrt(1 + u'^2):  s' = alpha sqrt(1 - s^2) - s / r,  s(0) = 0.
class RadialBowlOracle {
 public:
  RadialBowlOracle(double alpha, double R, int steps = 200000) : R_(R) {
    const double dr = R / steps;
    rs_.reserve(std::size_t(steps) + 1);
    us_.reserve(std::size_t(steps) + 1);
    double r = 1e-9;
    double s = alpha * r / 2;
    double u = 0;
    rs_.push_back(0.0);
    us_.push_back(0.0);
    auto slope = [alpha](double rr, double ss) {
      return alpha * std::sqrt(std::max(0.0, 1 - ss * ss)) - ss / rr;
    };
    for (int i = 0; i < steps; ++i) {
      const double k1 = slope(r, s);
      const double k2 = slope(r + dr / 2, s + dr / 2 * k1);
      const double k3 = slope(r + dr / 2, s + dr / 2 * k2);
      const double k4 = slope(r + dr, s + dr * k3);
      const double s_mid = s + dr / 2 * k1;
      s += dr / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      if (!(s < 1.0)) throw std::runtime_error("bowl oracle: slope reached 1");
      // trapezoid-ish update of u with the midpoint slope
      const double w_mid = s_mid / std::sqrt(1 - s_mid * s_mid);
      u += dr * w_mid;
      r += dr;
      rs_.push_back(r);
      us_.push_back(u);
    }
    shift_ = us_.back();  // so that u(R) = 0
  }

  double operator()(double r) const {
    if (r <= 0) return -shift_;
    if (r >= R_) return us_.back() - shift_;
    const double t = r / R_ * (double(rs_.size()) - 1);
    const std::size_t k = std::size_t(t);
    const double f = t - double(k);
    return (1 - f) * us_[k] + f * us_[k + 1] - shift_;
  }

 private:
  double R_, shift_ = 0;
  std::vector<double> rs_, us_;
};

inline double grim_reaper_exact(double x) { return -std::log(std::cos(x)); }

/// Fits the slope of log(err) against log(h); used by convergence studies.
inline double fitted_order(const std::vector<double>& hs,
                           const std::vector<double>& errs) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const double x = std::log(hs[i]), y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace tmce_test
