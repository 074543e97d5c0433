#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hpo/proposers.hpp"

namespace hpo::bo {

// Per-parameter affine map into [0, 1] (in log space for log-scale params)
// plus the target standardization.
class Normalizer {
 public:
  explicit Normalizer(const SearchSpace& space);

  Eigen::VectorXd to_unit(const Config& config) const;
  // Inverse of to_unit without rounding; for integer params the result is
  // rounded half-up and clamped so it validates.
  Config from_unit(const Eigen::VectorXd& unit) const;
  // Exact continuous inverse (no rounding) used for round-trip checks.
  std::vector<double> from_unit_raw(const Eigen::VectorXd& unit) const;

 private:
  const SearchSpace* space_;
};

struct TargetScaler {
  double mean = 0.0;
  double scale = 1.0;

  static TargetScaler fit(const Eigen::VectorXd& y);
  Eigen::VectorXd standardize(const Eigen::VectorXd& y) const { return (y.array() - mean) / scale; }
  double destandardize(double v) const { return v * scale + mean; }
};

struct Matern52 {
  double lengthscale = 1.0;
  double signal_variance = 1.0;

  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
};

class SingularKernel : public Error {
 public:
  explicit SingularKernel(const std::string& what) : Error("SingularKernel", ErrorCategory::evaluation, what) {}
};

struct FitOptions {
  std::vector<double> lengthscales{0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
  std::vector<double> signal_variances{0.5, 1.0, 2.0};
  double noise = 1e-6;
  double max_noise = 1e-2;
};

struct GPModel {
  Matern52 kernel;
  double noise = 1e-6;  // jitter actually used, after any escalation
  Eigen::MatrixXd X;    // one normalized input per row
  Eigen::VectorXd y;    // standardized targets
  TargetScaler scaler;
  Eigen::LLT<Eigen::MatrixXd> chol;
  Eigen::VectorXd alpha;  // K^{-1} y
  double log_marginal_likelihood = 0.0;
};

Eigen::MatrixXd gram(const Matern52& k, const Eigen::MatrixXd& X, double noise);

// Exact log marginal likelihood of standardized targets. Throws SingularKernel
// when K + noise*I is not positive definite.
double log_marginal_likelihood(const Matern52& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& y_std, double noise);

// Standardizes y and picks (lengthscale, signal variance) maximizing the log
// marginal likelihood over the grid in `options`. Jitter escalates x10 up to
// max_noise before SingularKernel is thrown.
GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitOptions& options = {});

struct Posterior {
  double mean;
  double variance;
};

// Latent posterior in standardized units; variance clamped at 0.
Posterior posterior(const GPModel& gp, const Eigen::VectorXd& x);

double normal_pdf(double z);
double normal_cdf(double z);

// Minimization EI: (best - mu - xi) Phi(z) + sigma phi(z), z = (best - mu - xi) / sigma.
double expected_improvement(double mu, double sigma, double best, double xi);

struct AcquisitionConfig {
  double xi = 0.01;
  int candidate_count = 2048;
  int initial_design = 3;
};

struct BoDecision {
  Config config;
  bool from_initial_design = false;
  double expected_improvement = 0.0;
  double lengthscale = 0.0;
  double signal_variance = 0.0;
};

BoDecision bo_propose(const SearchSpace& space, const History& history, const AcquisitionConfig& acq, Rng& rng,
                      const FitOptions& fit_options = {});

class BoProposer : public Proposer {
 public:
  BoProposer(std::uint64_t seed, AcquisitionConfig acq = {}, std::string id = "bo_gp");
  std::string id() const override { return id_; }
  bool stateful() const override { return true; }
  Proposal propose(const SearchSpace& space, const History& history, int step) override;

 private:
  Rng rng_;
  AcquisitionConfig acq_;
  std::string id_;
};

}  // namespace hpo::bo
