#include "wqed/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <fftw3.h>

namespace wqed::num {

QuadratureResult integrate(const std::function<cplx(double)>& f, double a, double b, double tol,
                           unsigned max_depth) {
  QuadratureResult r;
  if (a == b) return r;
  long count = 0;
  auto counted = [&](double x) {
    ++count;
    return f(x);
  };
  double err = 0.0;
  r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(counted, a, b, max_depth,
                                                                           tol, &err);
  r.error_estimate = err;
  r.evaluations = count;
  r.converged = std::isfinite(err) && err <= tol * std::max(1.0, std::abs(r.value));
  return r;
}

QuadratureResult integrate(const std::function<cplx(double)>& f,
                           const std::vector<double>& breakpoints, double tol, unsigned max_depth) {
  QuadratureResult total;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    auto part = integrate(f, breakpoints[i], breakpoints[i + 1], tol, max_depth);
    total.value += part.value;
    total.error_estimate += part.error_estimate;
    total.evaluations += part.evaluations;
  }
  total.converged = total.error_estimate <= tol * std::max(1.0, std::abs(total.value));
  return total;
}

double condition_number(const CMat& A) {
  if (A.size() == 0) return 1.0;
  Eigen::JacobiSVD<CMat> svd(A);
  const auto& s = svd.singularValues();
  double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

LinearSolution solve_linear(const CMat& A, const CVec& b) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw NumericalError("solve_linear: dimension mismatch");
  LinearSolution out;
  out.condition = condition_number(A);
  if (!std::isfinite(out.condition) ||
      out.condition * std::numeric_limits<double>::epsilon() > 1.0)
    throw NumericalError("solve_linear: matrix singular to working precision");
  out.x = A.fullPivLu().solve(b);
  return out;
}

double find_root_bracketed(const std::function<double(double)>& g, double lo, double hi,
                           double tol) {
  double glo = g(lo), ghi = g(hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  if ((glo > 0) == (ghi > 0)) throw NumericalError("find_root_bracketed: no sign change");
  boost::uintmax_t iters = 200;
  auto stop = [tol](double x, double y) { return std::abs(x - y) <= tol; };
  auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, stop, iters);
  double ga = std::abs(g(a)), gb = std::abs(g(b));
  return ga <= gb ? a : b;
}

MaxResult maximize_1d_from_scan(const std::function<double(double)>& g, double lo, double hi,
                                const std::vector<double>& vals, double tol, double tie_rel) {
  const int n = static_cast<int>(vals.size());
  if (n < 3) throw NumericalError("maximize_1d: scan needs at least 3 points");
  const double dx = (hi - lo) / (n - 1);

  // local maxima of the scan, refined independently
  std::vector<int> peaks;
  for (int i = 0; i < n; ++i) {
    double left = i > 0 ? vals[i - 1] : -std::numeric_limits<double>::infinity();
    double right = i + 1 < n ? vals[i + 1] : -std::numeric_limits<double>::infinity();
    if (vals[i] >= left && vals[i] >= right) peaks.push_back(i);
  }
  int bits = std::clamp(static_cast<int>(-std::log2(tol / std::max(1.0, std::abs(hi)))), 10, 26);
  MaxResult best{lo, -std::numeric_limits<double>::infinity()};
  double top = *std::max_element(vals.begin(), vals.end());
  for (int i : peaks) {
    // only peaks that can compete after refinement
    if (vals[i] < top - 0.05 * std::abs(top) - 1e-12) continue;
    double a = lo + std::max(0, i - 1) * dx;
    double b = lo + std::min(n - 1, i + 1) * dx;
    boost::uintmax_t iters = 200;
    auto neg = [&](double x) { return -g(x); };
    auto [x, fneg] = boost::math::tools::brent_find_minima(neg, a, b, bits, iters);
    MaxResult cand{x, -fneg};
    if (vals[i] > cand.value) cand = {lo + i * dx, vals[i]};
    double scale = std::max(std::abs(cand.value), std::abs(best.value));
    if (cand.value > best.value + tie_rel * scale) {
      best = cand;
    } else if (std::abs(cand.value - best.value) <= tie_rel * scale && cand.x > best.x) {
      best = cand;
    }
  }
  return best;
}

MaxResult maximize_1d(const std::function<double(double)>& g, double lo, double hi, double tol,
                      int n_scan, double tie_rel) {
  std::vector<double> vals(n_scan);
  const double dx = (hi - lo) / (n_scan - 1);
  for (int i = 0; i < n_scan; ++i) vals[i] = g(lo + i * dx);
  return maximize_1d_from_scan(g, lo, hi, vals, tol, tie_rel);
}

namespace {

// A = (1/h) int_0^h e^{iws} ds, B = (1/h) int_0^h (s/h) e^{iws} ds, theta = w h
void filon_weights(double theta, cplx& A, cplx& B) {
  if (std::abs(theta) < 0.05) {
    // series: A = sum (i th)^k/(k+1)!, B = sum (i th)^k/(k!(k+2))
    cplx p = 1.0;
    double fact = 1.0;
    A = 0.0;
    B = 0.0;
    for (int k = 0; k < 12; ++k) {
      if (k > 0) {
        p *= cplx(0.0, theta);
        fact *= k;
      }
      A += p / (fact * (k + 1));
      B += p / (fact * (k + 2));
    }
    return;
  }
  cplx e = std::exp(cplx(0.0, theta));
  cplx it(0.0, theta);
  A = (e - 1.0) / it;
  B = e / it + (e - 1.0) / (theta * theta);
}

}  // namespace

cplx filon_linear(const cplx* F, std::size_t n, double dt, double w) {
  if (n < 2) return 0.0;
  cplx A, B;
  filon_weights(w * dt, A, B);
  const cplx w0 = (A - B) * dt;
  const cplx w1 = B * dt * std::exp(cplx(0.0, -w * dt));
  // S0 = sum_{k<n-1} e^{iwt_k}F_k, S1 = sum_{k>=1} e^{iwt_k}F_k
  cplx s_inner = 0.0;
  const cplx step = std::exp(cplx(0.0, w * dt));
  cplx ph = 1.0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if ((k & 1023) == 0) {
      ph = std::exp(cplx(0.0, w * dt * static_cast<double>(k)));
    } else {
      ph *= step;
    }
    s_inner += ph * F[k];
  }
  cplx first = F[0];
  cplx last = std::exp(cplx(0.0, w * dt * static_cast<double>(n - 1))) * F[n - 1];
  return w0 * (first + s_inner) + w1 * (s_inner + last);
}

std::vector<cplx> dft(const std::vector<cplx>& in, int sign) {
  const int n = static_cast<int>(in.size());
  std::vector<cplx> out(n);
  if (n == 0) return out;
  std::vector<cplx> buf(in);
  fftw_plan plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(buf.data()),
                                    reinterpret_cast<fftw_complex*>(out.data()),
                                    sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  return out;
}

cplx trapezoid(const std::vector<cplx>& y, double dx) {
  if (y.size() < 2) return 0.0;
  cplx s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * dx;
}

double trapezoid(const std::vector<double>& y, double dx) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * dx;
}

}  // namespace wqed::num
