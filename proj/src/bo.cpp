#include "hpo/bo.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace hpo::bo {

Normalizer::Normalizer(const SearchSpace& space) : space_(&space) {}

Eigen::VectorXd Normalizer::to_unit(const Config& config) const {
  Eigen::VectorXd u(static_cast<Eigen::Index>(space_->size()));
  for (std::size_t i = 0; i < space_->size(); ++i) {
    const auto& p = space_->params()[i];
    u(static_cast<Eigen::Index>(i)) = unit_coordinate(p, config.at(p.name));
  }
  return u;
}

std::vector<double> Normalizer::from_unit_raw(const Eigen::VectorXd& unit) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < space_->size(); ++i) {
    const auto& p = space_->params()[i];
    const double u = unit(static_cast<Eigen::Index>(i));
    if (p.log_scale) {
      out.push_back(std::exp(std::log(p.lower) + u * (std::log(p.upper) - std::log(p.lower))));
    } else {
      out.push_back(p.lower + u * (p.upper - p.lower));
    }
  }
  return out;
}

Config Normalizer::from_unit(const Eigen::VectorXd& unit) const {
  Config c;
  for (std::size_t i = 0; i < space_->size(); ++i) {
    const auto& p = space_->params()[i];
    c.values[p.name] = sample_param(p, std::clamp(unit(static_cast<Eigen::Index>(i)), 0.0, 1.0));
  }
  return c;
}

TargetScaler TargetScaler::fit(const Eigen::VectorXd& y) {
  TargetScaler s;
  s.mean = y.mean();
  const double var = (y.array() - s.mean).square().mean();
  s.scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  return s;
}

double Matern52::operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  const double r = (a - b).norm() / lengthscale;
  const double s = std::sqrt(5.0) * r;
  return signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

Eigen::MatrixXd gram(const Matern52& k, const Eigen::MatrixXd& X, double noise) {
  const auto n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      K(i, j) = K(j, i) = k(X.row(i).transpose(), X.row(j).transpose());
    }
    K(i, i) += noise;
  }
  return K;
}

namespace {

bool factor(const Matern52& k, const Eigen::MatrixXd& X, double noise, Eigen::LLT<Eigen::MatrixXd>& llt) {
  llt.compute(gram(k, X, noise));
  return llt.info() == Eigen::Success;
}

double lml_from_factor(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& y) {
  const Eigen::VectorXd alpha = llt.solve(y);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const auto n = static_cast<double>(y.size());
  return -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace

double log_marginal_likelihood(const Matern52& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& y_std,
                               double noise) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!factor(k, X, noise, llt)) throw SingularKernel("kernel matrix is not positive definite");
  return lml_from_factor(llt, y_std);
}

GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const FitOptions& options) {
  if (X.rows() < 1 || X.rows() != y.size()) throw ConfigError("GP fit needs >= 1 observation and matching X/y");
  GPModel gp;
  gp.X = X;
  gp.scaler = TargetScaler::fit(y);
  gp.y = gp.scaler.standardize(y);

  bool found = false;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (double ls : options.lengthscales) {
    for (double sf2 : options.signal_variances) {
      const Matern52 k{ls, sf2};
      for (double noise = options.noise; noise <= options.max_noise * (1 + 1e-9);
           noise = noise > 0.0 ? noise * 10.0 : std::numeric_limits<double>::infinity()) {
        Eigen::LLT<Eigen::MatrixXd> llt;
        if (!factor(k, X, noise, llt)) continue;
        const double lml = lml_from_factor(llt, gp.y);
        if (std::isfinite(lml) && lml > best_lml) {
          best_lml = lml;
          gp.kernel = k;
          gp.noise = noise;
          gp.chol = llt;
          found = true;
        }
        break;
      }
    }
  }
  if (!found) {
    throw SingularKernel(fmt::format("kernel matrix singular for every grid cell even with jitter {}",
                                     options.max_noise));
  }
  gp.alpha = gp.chol.solve(gp.y);
  gp.log_marginal_likelihood = best_lml;
  return gp;
}

Posterior posterior(const GPModel& gp, const Eigen::VectorXd& x) {
  const auto n = gp.X.rows();
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks(i) = gp.kernel(gp.X.row(i).transpose(), x);
  const double mean = ks.dot(gp.alpha);
  const Eigen::VectorXd v = gp.chol.matrixL().solve(ks);
  const double var = gp.kernel.signal_variance - v.squaredNorm();
  return {mean, std::max(var, 0.0)};
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mu, double sigma, double best, double xi) {
  const double improvement = best - mu - xi;
  if (sigma <= 0.0) return std::max(improvement, 0.0);
  const double z = improvement / sigma;
  return std::max(improvement * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

BoDecision bo_propose(const SearchSpace& space, const History& history, const AcquisitionConfig& acq, Rng& rng,
                      const FitOptions& fit_options) {
  if (acq.candidate_count < 1 || acq.initial_design < 1 || acq.xi < 0) {
    throw ConfigError("acquisition needs candidate_count >= 1, initial_design >= 1, xi >= 0");
  }
  BoDecision decision;
  if (static_cast<int>(history.size()) < acq.initial_design) {
    decision.config = random_propose(space, rng);
    decision.from_initial_design = true;
    return decision;
  }

  const Normalizer norm(space);
  const auto n = static_cast<Eigen::Index>(history.size());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(space.size()));
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = history.trials()[static_cast<std::size_t>(i)];
    X.row(i) = norm.to_unit(t.config).transpose();
    y(i) = t.loss;
  }
  const GPModel gp = fit(X, y, fit_options);
  const double best = gp.y.minCoeff();

  double best_ei = -1.0;
  for (int m = 0; m < acq.candidate_count; ++m) {
    Config candidate = random_propose(space, rng);
    const auto post = posterior(gp, norm.to_unit(candidate));
    const double ei = expected_improvement(post.mean, std::sqrt(post.variance), best, acq.xi);
    if (ei > best_ei) {
      best_ei = ei;
      decision.config = std::move(candidate);
    }
  }
  decision.expected_improvement = best_ei;
  decision.lengthscale = gp.kernel.lengthscale;
  decision.signal_variance = gp.kernel.signal_variance;
  return decision;
}

BoProposer::BoProposer(std::uint64_t seed, AcquisitionConfig acq, std::string id)
    : rng_(seed), acq_(acq), id_(std::move(id)) {}

Proposal BoProposer::propose(const SearchSpace& space, const History& history, int) {
  auto d = bo_propose(space, history, acq_, rng_);
  json ann = json::object();
  if (d.from_initial_design) {
    ann["initial_design"] = true;
  } else {
    ann["ei"] = d.expected_improvement;
    ann["lengthscale"] = d.lengthscale;
    ann["signal_variance"] = d.signal_variance;
  }
  return {std::move(d.config), id_, std::move(ann)};
}

}  // namespace hpo::bo
