// Adaptive Dormand-Prince 5(4) integrator for Eigen-valued states.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mlcav {

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double h0 = 0.0;  // 0: pick from the first grid interval
  double h_min = 1e-14;
  long max_steps = 50'000'000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
};

// Integrates y' = f(t, y) across t_grid, calling obs(i, t_i, y) at every grid point.
template <class State, class Rhs, class Obs>
OdeStats integrate(State& y, Rhs&& f, const std::vector<double>& t_grid, Obs&& obs, const OdeOptions& opt = {}) {
  static constexpr double c2 = 1. / 5, c3 = 3. / 10, c4 = 4. / 5, c5 = 8. / 9;
  static constexpr double a21 = 1. / 5;
  static constexpr double a31 = 3. / 40, a32 = 9. / 40;
  static constexpr double a41 = 44. / 45, a42 = -56. / 15, a43 = 32. / 9;
  static constexpr double a51 = 19372. / 6561, a52 = -25360. / 2187, a53 = 64448. / 6561, a54 = -212. / 729;
  static constexpr double a61 = 9017. / 3168, a62 = -355. / 33, a63 = 46732. / 5247, a64 = 49. / 176,
                          a65 = -5103. / 18656;
  static constexpr double b1 = 35. / 384, b3 = 500. / 1113, b4 = 125. / 192, b5 = -2187. / 6784, b6 = 11. / 84;
  static constexpr double e1 = 71. / 57600, e3 = -71. / 16695, e4 = 71. / 1920, e5 = -17253. / 339200,
                          e6 = 22. / 525, e7 = -1. / 40;

  OdeStats st;
  if (t_grid.empty()) return st;
  double t = t_grid.front();
  obs(std::size_t{0}, t, y);
  if (t_grid.size() == 1) return st;
  double h = opt.h0 > 0 ? opt.h0 : std::max((t_grid[1] - t_grid[0]) * 1e-2, 1e-12);
  State k1 = f(t, y), k2, k3, k4, k5, k6, k7, yn, err;
  for (std::size_t gi = 1; gi < t_grid.size(); ++gi) {
    const double tend = t_grid[gi];
    while (t < tend) {
      if (st.accepted + st.rejected > opt.max_steps) throw std::runtime_error("ode: step budget exhausted");
      bool last = false;
      double hs = h;
      if (t + hs >= tend) {
        hs = tend - t;
        last = true;
      }
      k2 = f(t + c2 * hs, (y + hs * (a21 * k1)).eval());
      k3 = f(t + c3 * hs, (y + hs * (a31 * k1 + a32 * k2)).eval());
      k4 = f(t + c4 * hs, (y + hs * (a41 * k1 + a42 * k2 + a43 * k3)).eval());
      k5 = f(t + c5 * hs, (y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).eval());
      k6 = f(t + hs, (y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)).eval());
      yn = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = f(t + hs, yn);
      err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const auto scale = (opt.atol + opt.rtol * y.cwiseAbs().array().max(yn.cwiseAbs().array())).eval();
      const double en = (err.cwiseAbs().array() / scale).maxCoeff();
      if (en <= 1.0 || hs <= opt.h_min) {
        t = last ? tend : t + hs;
        y = yn;
        k1 = k7;
        ++st.accepted;
        const double fac = en > 0 ? std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0) : 5.0;
        if (!last || hs * fac > h) h = std::max(hs * fac, opt.h_min);
      } else {
        ++st.rejected;
        h = hs * std::clamp(0.9 * std::pow(en, -0.25), 0.1, 0.9);
        if (h < opt.h_min) throw std::runtime_error("ode: step size underflow");
      }
    }
    obs(gi, t, y);
  }
  return st;
}

}  // namespace mlcav
