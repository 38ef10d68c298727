#include "stiff.hpp"

#include "sgns/error.hpp"

#include <boost/numeric/odeint/stepper/rosenbrock4.hpp>
#include <boost/numeric/odeint/stepper/rosenbrock4_controller.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace sgns::detail {

namespace odeint = boost::numeric::odeint;
namespace ublas = boost::numeric::ublas;

void integrate_stiff(const StiffSystem& sys, StateVec x0, double t_end, double dt, double tol,
                     const std::function<void(double, const StateVec&)>& observe) {
  using State = ublas::vector<double>;
  const std::size_t n = x0.size();
  StateVec buf_x(n), buf_f(n), buf_j(n * n);

  auto rhs = [&](const State& x, State& dxdt, double) {
    std::copy(x.begin(), x.end(), buf_x.begin());
    sys.rhs(buf_x, buf_f);
    dxdt.resize(n);
    std::copy(buf_f.begin(), buf_f.end(), dxdt.begin());
  };
  auto jac = [&](const State& x, ublas::matrix<double>& j, const double&, State& dfdt) {
    std::copy(x.begin(), x.end(), buf_x.begin());
    sys.jacobian(buf_x, buf_j);
    j.resize(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) j(r, c) = buf_j[r * n + c];
    dfdt.resize(n);
    std::fill(dfdt.begin(), dfdt.end(), 0.0);
  };

  odeint::rosenbrock4_controller<odeint::rosenbrock4<double>> ctrl(tol, tol);
  State x(n);
  std::copy(x0.begin(), x0.end(), x.begin());
  StateVec out(x0);
  const long samples = std::lround(t_end / dt);
  double t = 0.0, h = std::min(dt, 1e-4);
  observe(t, out);
  for (long k = 1; k <= samples; ++k) {
    const double target = k == samples ? t_end : k * dt;
    long attempts = 0;
    while (t < target) {
      double step = std::min(h, target - t);
      const bool truncated = step < h;
      if (ctrl.try_step(std::make_pair(rhs, jac), x, t, step) == odeint::success) {
        if (!truncated || step > h) h = step;
        if (*std::min_element(x.begin(), x.end()) <= 0.0)
          throw NumericalError("flow: positivity lost at t=" + std::to_string(t));
      } else {
        h = step;
      }
      if (h < 1e-14 || ++attempts > 1000000)
        throw NumericalError("flow: step size collapsed at t=" + std::to_string(t));
    }
    t = target;
    std::copy(x.begin(), x.end(), out.begin());
    observe(t, out);
  }
}

}  // namespace sgns::detail
