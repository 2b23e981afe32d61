#pragma once

#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hqs {

// Residual vector r(x) = model(x) - data over a bounded parameter box. The
// Jacobian is optional; when absent it is formed by central differences with
// step fd_rel_step * max(|x_j|, scale_j).
struct LeastSquaresProblem {
  std::vector<std::string> names;
  Eigen::VectorXd lower;  // -inf allowed
  Eigen::VectorXd upper;  // +inf allowed
  Eigen::VectorXd scale;  // typical magnitude per parameter; empty means 1
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
};

struct LeastSquaresOptions {
  double lambda0 = 1e-3;
  double lambda_accept = 0.5;
  double lambda_reject = 4.0;
  double lambda_max = 1e15;
  double cost_rel_tol = 1e-10;
  double gradient_tol = 1e-8;
  int max_iterations = 500;
  double fd_rel_step = 1e-6;
  // Relative eigenvalue threshold of the column-scaled J^T J below which a
  // direction counts as unresolved.
  double singular_rel_tol = 1e-10;
};

inline constexpr double kUnresolved = std::numeric_limits<double>::infinity();

struct FitResult {
  std::string model;
  std::vector<std::string> names;  // free parameters, in fit order
  Eigen::VectorXd values;
  Eigen::VectorXd sigma;           // kUnresolved where J^T J is singular
  std::vector<bool> at_bound;
  std::map<std::string, double> fixed;  // parameters held constant
  std::map<std::string, double> extra;  // derived quantities and diagnostics

  double cost = 0.0;  // 0.5 * |r|^2
  double residual_rms = 0.0;
  // max_j |J_j . r| / (|J_j| |r|): cosine between the residual and each free
  // Jacobian column, zero at a stationary point.
  double gradient_norm = 0.0;
  int n_iterations = 0;
  int n_residuals = 0;
  bool converged = false;
  std::string message;
  std::vector<double> cost_history;  // cost after each accepted step, starting at the initial point

  bool has(const std::string& name) const;
  // Free or fixed value by name; throws PreconditionError if unknown.
  double value(const std::string& name) const;
  // Sigma of a free parameter; throws PreconditionError if not free.
  double sigma_of(const std::string& name) const;
  bool is_free(const std::string& name) const;
};

// Levenberg-Marquardt with Marquardt diagonal scaling and projection onto the
// bounds. lambda starts at lambda0, is multiplied by lambda_accept after an
// accepted step and by lambda_reject after a rejected one. Converges when an
// accepted step lowers the cost by less than cost_rel_tol relative, when
// gradient_norm drops below gradient_tol, or when no step can lower the cost
// (lambda saturates). Hitting max_iterations returns the best point with
// converged = false. Sigma is sqrt(diag(pinv(J^T J)) * |r|^2 / (m - n)).
// Throws PreconditionError for malformed problems or x0 outside the bounds.
FitResult least_squares(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                        const LeastSquaresOptions& opts = {});

// Model-form convenience: residuals model(x) - data.
FitResult least_squares(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& model,
                        const Eigen::VectorXd& data, const Eigen::VectorXd& x0,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const std::vector<std::string>& names,
                        const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& model_jacobian = {},
                        const LeastSquaresOptions& opts = {});

// Central-difference Jacobian of f at x, step rel_step * max(|x_j|, scale_j).
Eigen::MatrixXd finite_difference_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, const Eigen::VectorXd& scale = {},
                                           double rel_step = 1e-6);

// Linearized standard deviations from a Jacobian and residual vector.
Eigen::VectorXd linearized_sigma(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residuals,
                                 double singular_rel_tol = 1e-10);

}  // namespace hqs
