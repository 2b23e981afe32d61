#include "hqs/least_squares.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "hqs/errors.hpp"

namespace hqs {

bool FitResult::has(const std::string& name) const { return is_free(name) || fixed.count(name) > 0; }

bool FitResult::is_free(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

double FitResult::value(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it != names.end()) return values[it - names.begin()];
  const auto f = fixed.find(name);
  if (f != fixed.end()) return f->second;
  throw PreconditionError("fit result has no parameter '" + name + "'");
}

double FitResult::sigma_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw PreconditionError("'" + name + "' is not a free parameter");
  return sigma[it - names.begin()];
}

Eigen::MatrixXd finite_difference_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, const Eigen::VectorXd& scale,
                                           double rel_step) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double s = scale.size() == x.size() ? scale[j] : 1.0;
    const double h = rel_step * std::max(std::abs(x[j]), s);
    xp[j] = x[j] + h;
    const Eigen::VectorXd fp = f(xp);
    xp[j] = x[j] - h;
    const Eigen::VectorXd fm = f(xp);
    xp[j] = x[j];
    if (j == 0) jac.resize(fp.size(), x.size());
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

Eigen::VectorXd linearized_sigma(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residuals,
                                 double singular_rel_tol) {
  const Eigen::Index m = jac.rows();
  const Eigen::Index n = jac.cols();
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(n, kUnresolved);
  if (n == 0 || m <= n) return sigma;

  const double s2 = residuals.squaredNorm() / static_cast<double>(m - n);
  Eigen::VectorXd col_norm = jac.colwise().norm().transpose();
  Eigen::MatrixXd scaled = jac;
  for (Eigen::Index j = 0; j < n; ++j)
    if (col_norm[j] > 0.0) scaled.col(j) /= col_norm[j];

  const Eigen::MatrixXd jtj = scaled.transpose() * scaled;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jtj);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const Eigen::MatrixXd& vec = eig.eigenvectors();
  const double cutoff = singular_rel_tol * std::max(lam.maxCoeff(), 0.0);

  for (Eigen::Index j = 0; j < n; ++j) {
    if (col_norm[j] == 0.0) continue;
    double variance = 0.0;
    bool resolvable = true;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double w = vec(j, k) * vec(j, k);
      if (lam[k] <= cutoff) {
        if (w > 1e-3) resolvable = false;
        continue;
      }
      variance += w / lam[k];
    }
    if (resolvable) sigma[j] = std::sqrt(variance * s2) / col_norm[j];
  }
  return sigma;
}

namespace {

double residual_cosine(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r, const std::vector<bool>& blocked) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < jac.cols(); ++j) {
    if (blocked[static_cast<std::size_t>(j)]) continue;
    const double cn = jac.col(j).norm();
    if (cn == 0.0) continue;
    worst = std::max(worst, std::abs(jac.col(j).dot(r)) / (cn * rn));
  }
  return worst;
}

}  // namespace

FitResult least_squares(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                        const LeastSquaresOptions& opts) {
  const Eigen::Index n = x0.size();
  if (!problem.residuals) throw PreconditionError("least_squares: residual function missing");
  if (static_cast<Eigen::Index>(problem.names.size()) != n || problem.lower.size() != n ||
      problem.upper.size() != n)
    throw PreconditionError("least_squares: names, bounds and x0 sizes differ");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(problem.lower[j] <= x0[j] && x0[j] <= problem.upper[j]))
      throw PreconditionError("least_squares: initial '" + problem.names[static_cast<std::size_t>(j)] +
                              "' outside bounds");
  }

  auto jacobian = [&](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    if (problem.jacobian) return problem.jacobian(x);
    return finite_difference_jacobian(problem.residuals, x, problem.scale, opts.fd_rel_step);
  };
  auto project = [&](Eigen::VectorXd x) {
    return x.cwiseMax(problem.lower).cwiseMin(problem.upper);
  };

  FitResult out;
  out.names = problem.names;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r = problem.residuals(x);
  if (r.size() == 0) throw PreconditionError("least_squares: empty residual vector");
  if (!r.allFinite()) throw DomainError("least_squares: residuals not finite at the initial point");
  double cost = 0.5 * r.squaredNorm();
  out.cost_history.push_back(cost);

  Eigen::MatrixXd jac = jacobian(x);
  double lambda = opts.lambda0;
  int iter = 0;
  bool converged = false;
  std::string message = "iteration limit reached";

  // Directions pinned against a bound by the descent direction.
  auto blocked_mask = [&](const Eigen::VectorXd& grad) {
    std::vector<bool> blocked(static_cast<std::size_t>(n), false);
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool at_lo = x[j] <= problem.lower[j] && grad[j] > 0.0;
      const bool at_hi = x[j] >= problem.upper[j] && grad[j] < 0.0;
      blocked[static_cast<std::size_t>(j)] = at_lo || at_hi;
    }
    return blocked;
  };

  while (iter < opts.max_iterations) {
    const Eigen::VectorXd grad = jac.transpose() * r;
    const auto blocked = blocked_mask(grad);
    if (cost == 0.0 || residual_cosine(jac, r, blocked) < opts.gradient_tol) {
      converged = true;
      message = "gradient below tolerance";
      break;
    }

    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::VectorXd diag = jtj.diagonal();
    const double diag_floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);
    diag = diag.cwiseMax(diag_floor);

    bool accepted = false;
    while (lambda <= opts.lambda_max) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!blocked[static_cast<std::size_t>(j)]) continue;
        a.row(j).setZero();
        a.col(j).setZero();
        a(j, j) = 1.0;
      }
      Eigen::VectorXd rhs = -grad;
      for (Eigen::Index j = 0; j < n; ++j)
        if (blocked[static_cast<std::size_t>(j)]) rhs[j] = 0.0;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      const Eigen::VectorXd step = ldlt.solve(rhs);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) {
        lambda *= opts.lambda_reject;
        continue;
      }
      const Eigen::VectorXd trial = project(x + step);
      Eigen::VectorXd r_trial = problem.residuals(trial);
      const double trial_cost = r_trial.allFinite() ? 0.5 * r_trial.squaredNorm() : HUGE_VAL;
      if (trial_cost < cost) {
        const double decrease = (cost - trial_cost) / cost;
        x = trial;
        r = std::move(r_trial);
        cost = trial_cost;
        lambda = std::max(lambda * opts.lambda_accept, 1e-300);
        accepted = true;
        out.cost_history.push_back(cost);
        if (decrease < opts.cost_rel_tol) {
          converged = true;
          message = "relative cost decrease below tolerance";
        }
        break;
      }
      lambda *= opts.lambda_reject;
    }
    ++iter;
    if (!accepted) {
      converged = true;
      message = "no descent step available (stationary point)";
      break;
    }
    jac = jacobian(x);
    if (converged) break;
  }

  const Eigen::VectorXd grad = jac.transpose() * r;
  const auto blocked = blocked_mask(grad);
  out.values = x;
  out.cost = cost;
  out.n_iterations = iter;
  out.n_residuals = static_cast<int>(r.size());
  out.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
  out.gradient_norm = residual_cosine(jac, r, blocked);
  out.converged = converged;
  out.message = message;
  out.sigma = linearized_sigma(jac, r, opts.singular_rel_tol);
  out.at_bound.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index j = 0; j < n; ++j)
    out.at_bound[static_cast<std::size_t>(j)] = x[j] <= problem.lower[j] || x[j] >= problem.upper[j];
  return out;
}

FitResult least_squares(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& model,
                        const Eigen::VectorXd& data, const Eigen::VectorXd& x0,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const std::vector<std::string>& names,
                        const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& model_jacobian,
                        const LeastSquaresOptions& opts) {
  if (data.size() == 0) throw PreconditionError("least_squares: empty data");
  LeastSquaresProblem problem;
  problem.names = names;
  problem.lower = lower;
  problem.upper = upper;
  problem.residuals = [&model, &data](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd pred = model(x);
    if (pred.size() != data.size()) throw PreconditionError("least_squares: model and data sizes differ");
    return pred - data;
  };
  if (model_jacobian) problem.jacobian = model_jacobian;
  return least_squares(problem, x0, opts);
}

}  // namespace hqs
