#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "wqed/errors.hpp"

namespace wqed {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

namespace num {

struct QuadratureResult {
  cplx value;
  double error_estimate = 0.0;
  long evaluations = 0;
  bool converged = true;
};

// Adaptive Gauss-Kronrod (7/15). converged is false when the subdivision
// budget runs out before |error| <= tol * max(1, |value|).
QuadratureResult integrate(const std::function<cplx(double)>& f, double a, double b,
                           double tol = 1e-10, unsigned max_depth = 18);

// Same, with the interval split at the given interior breakpoints.
QuadratureResult integrate(const std::function<cplx(double)>& f,
                           const std::vector<double>& breakpoints, double tol = 1e-10,
                           unsigned max_depth = 18);

struct LinearSolution {
  CVec x;
  double condition = 1.0;  // 2-norm condition number
};

// Dense LU solve. Throws NumericalError when A is singular to working precision.
LinearSolution solve_linear(const CMat& A, const CVec& b);

double condition_number(const CMat& A);

// Bracketed root of a real function (TOMS 748). Throws NumericalError without a
// sign change.
double find_root_bracketed(const std::function<double(double)>& g, double lo, double hi,
                           double tol = 1e-12);

struct MaxResult {
  double x = 0.0;
  double value = 0.0;
};

// Grid scan followed by Brent refinement around the best node. Peaks whose
// values agree within tie_rel are resolved toward the larger x. Not certified
// global.
MaxResult maximize_1d(const std::function<double(double)>& g, double lo, double hi,
                      double tol = 1e-6, int n_scan = 401, double tie_rel = 1e-9);

// Same, with the scan values precomputed (g_scan[i] = g(lo + i*(hi-lo)/(n-1))).
MaxResult maximize_1d_from_scan(const std::function<double(double)>& g, double lo, double hi,
                                const std::vector<double>& g_scan, double tol = 1e-6,
                                double tie_rel = 1e-9);

// int_0^{(n-1)dt} F(t) exp(i w t) dt with F piecewise linear between the
// samples (Filon-trapezoid). Exact for any w when F is linear on each cell.
cplx filon_linear(const cplx* F, std::size_t n, double dt, double w);

// Uniform-grid transform: out[j] = sum_k in[k] exp(sign * 2 pi i j k / n).
std::vector<cplx> dft(const std::vector<cplx>& in, int sign);

// Composite trapezoid on a uniform grid.
cplx trapezoid(const std::vector<cplx>& y, double dx);
double trapezoid(const std::vector<double>& y, double dx);

}  // namespace num
}  // namespace wqed
