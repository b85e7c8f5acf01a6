#include "modalsav/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace modalsav::oracle {

Vec lu_solve(Matrix a, Vec b) {
  const std::size_t n = a.rows;
  if (a.cols != n || b.size() != n) throw std::invalid_argument("lu_solve: dimension mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (a(pivot, col) == 0.0) throw std::domain_error("lu_solve: singular matrix");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(pivot, c), a(col, c));
      std::swap(b[pivot], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double l = a(r, col) / a(col, col);
      a(r, col) = l;
      for (std::size_t c = col + 1; c < n; ++c) a(r, c) -= l * a(col, c);
      b[r] -= l * b[col];
    }
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a(i, c) * x[c];
    x[i] = s / a(i, i);
  }
  return x;
}

SolverState reference_step(const SolverState& state, PotentialField& field, double forcing,
                           const ModalOperators& ops, double nu, const SolverConfig& cfg,
                           std::span<const double> excitation_weights) {
  const auto m = static_cast<std::size_t>(ops.modes());
  const double k = cfg.time_step;

  Vec q_half(m);
  for (std::size_t i = 0; i < m; ++i) q_half[i] = state.q[i] + 0.5 * k * state.p[i];

  Vec g(m, 0.0);
  double p_l1 = 0.0;
  for (double v : state.p) p_l1 += std::abs(v);
  if (cfg.lambda0 != 0.0 && p_l1 >= cfg.p_l1_tolerance) {
    const double drift = state.psi - std::sqrt(2.0 * field.potential(state.q) + cfg.eps);
    for (std::size_t i = 0; i < m; ++i) {
      const double s = state.p[i] > 0.0 ? 1.0 : (state.p[i] < 0.0 ? -1.0 : 0.0);
      g[i] = -cfg.lambda0 * drift * s / p_l1;
    }
  }
  Vec f(m);
  field.force(q_half, f);
  const double root = std::sqrt(2.0 * field.potential(q_half) + cfg.eps);
  for (std::size_t i = 0; i < m; ++i) g[i] += -f[i] / root;

  const double c = 0.25 * k * k * nu * nu;
  Matrix lhs(m, m);
  Matrix rhs_op(m, m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t col = 0; col < m; ++col) {
      lhs(r, col) = c * g[r] * g[col];
      rhs_op(r, col) = -c * g[r] * g[col];
    }
    lhs(r, r) += 1.0 + k * ops.damping[r];
    rhs_op(r, r) += 1.0 - k * ops.damping[r];
  }
  Vec rhs(m);
  matvec(rhs_op, state.p, rhs);
  for (std::size_t i = 0; i < m; ++i) {
    rhs[i] += k * (-ops.stiffness[i] * q_half[i] - nu * nu * g[i] * state.psi + excitation_weights[i] * forcing);
  }
  const Vec p_next = lu_solve(std::move(lhs), std::move(rhs));

  SolverState next(static_cast<int>(m), 0.0);
  double gp = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    next.q[i] = q_half[i] + 0.5 * k * p_next[i];
    next.p[i] = p_next[i];
    gp += g[i] * (p_next[i] + state.p[i]);
  }
  next.psi = state.psi + 0.5 * k * gp;
  return next;
}

double oscillator_amplitude(double famp, double duration, double omega) {
  return famp * duration / (2.0 * omega);
}

Vec central_gradient(const std::function<double(std::span<const double>)>& fn, std::span<const double> x,
                     double h) {
  Vec xp(x.begin(), x.end());
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double up = fn(xp);
    xp[i] = x[i] - h;
    const double down = fn(xp);
    xp[i] = x[i];
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

double relative_error(std::span<const double> approx, std::span<const double> exact) {
  if (approx.size() != exact.size()) throw std::invalid_argument("relative_error: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    num = std::max(num, std::abs(approx[i] - exact[i]));
    den = std::max(den, std::abs(exact[i]));
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace modalsav::oracle
