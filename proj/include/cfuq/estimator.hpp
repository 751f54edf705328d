#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "cfuq/types.hpp"

// Online Bayesian estimation of the GLVD parameters theta = (K_L, T_L) from
// windows of (acceleration, actuator command, jerk) observations by
// stochastic gradient Langevin dynamics.
namespace cfuq::estimator {

/// theta = (K_L, T_L).
template <typename S>
using Theta = Eigen::Vector2<S>;

inline constexpr int kRatio = 0;
inline constexpr int kLag = 1;

template <typename S>
struct Observation {
  S accel;   // a_i
  S demand;  // u_i
  S jerk;    // adot_i
};

template <typename S>
class ObservationBatch {
 public:
  ObservationBatch(std::vector<Observation<S>> obs, S start_time, S end_time)
      : obs_(std::move(obs)), start_(start_time), end_(end_time) {
    if (obs_.size() < 2) throw DomainError("observation batch: need at least 2 samples");
    for (const auto& o : obs_) {
      if (!std::isfinite(o.accel) || !std::isfinite(o.demand) || !std::isfinite(o.jerk))
        throw DomainError("observation batch: non-finite value");
    }
  }

  std::size_t size() const { return obs_.size(); }
  const Observation<S>& operator[](std::size_t i) const { return obs_[i]; }
  std::span<const Observation<S>> observations() const { return obs_; }
  S start_time() const { return start_; }
  S end_time() const { return end_; }

 private:
  std::vector<Observation<S>> obs_;
  S start_;
  S end_;
};

/// Builds a batch with jerk from central differences of `accel` (one-sided at
/// the two ends).
template <typename S>
ObservationBatch<S> make_batch(std::span<const S> accel, std::span<const S> demand, S t_s,
                               S start_time, S end_time) {
  if (accel.size() != demand.size())
    throw DomainError("observation batch: accel and demand lengths differ");
  const std::size_t n = accel.size();
  if (n < 2) throw DomainError("observation batch: need at least 2 samples");
  std::vector<Observation<S>> obs(n);
  for (std::size_t i = 0; i < n; ++i) {
    S jerk;
    if (i == 0)
      jerk = (accel[1] - accel[0]) / t_s;
    else if (i == n - 1)
      jerk = (accel[n - 1] - accel[n - 2]) / t_s;
    else
      jerk = (accel[i + 1] - accel[i - 1]) / (S(2) * t_s);
    obs[i] = {accel[i], demand[i], jerk};
  }
  return ObservationBatch<S>(std::move(obs), start_time, end_time);
}

/// Isotropic Gaussian prior N(mean, variance * I).
template <typename S>
struct GaussianPrior {
  Theta<S> mean = Theta<S>(S(1), S(0.3));
  S variance = S(10);

  S log_density(const Theta<S>& theta) const {
    return -std::log(S(2) * std::numbers::pi_v<S> * variance) -
           (theta - mean).squaredNorm() / (S(2) * variance);
  }
  Theta<S> gradient(const Theta<S>& theta) const { return -(theta - mean) / variance; }
};

template <typename S>
struct SgldHyper {
  S eta_1 = S(300);
  S eta_cap = S(1);
  std::size_t iterations = 2000;
  std::size_t burn_in = 1200;
  std::size_t minibatch = 32;
  S sigma_sq = S(0.01);
  std::uint64_t seed = 0;
  // Floor on the smallest eigenvalue of the [u, a] second-moment matrix.
  S min_excitation = S(1e-4);
  // Hold T_L at the prior mean and sample K_L alone.
  bool freeze_lag = false;
};

template <typename S>
void validate(const SgldHyper<S>& h, std::size_t batch_size) {
  if (!(h.eta_1 > 0)) throw ConfigError("sgld: eta_1 must be > 0");
  if (!(h.eta_cap > 0)) throw ConfigError("sgld: eta_cap must be > 0");
  if (!(h.burn_in > 0 && h.burn_in < h.iterations))
    throw ConfigError("sgld: need 0 < burn_in < iterations");
  if (!(h.minibatch >= 1 && h.minibatch <= batch_size))
    throw ConfigError("sgld: need 1 <= minibatch <= batch size");
  if (!(h.sigma_sq > 0)) throw ConfigError("sgld: sigma_sq must be > 0");
}

/// Burn-in at 60% of the iteration budget.
inline std::size_t default_burn_in(std::size_t iterations) {
  return static_cast<std::size_t>(0.6 * static_cast<double>(iterations));
}

/// eta_k = min(eta_cap, eta_1 / k), k >= 1.
template <typename S>
S step_size(const SgldHyper<S>& h, std::size_t k) {
  return std::min(h.eta_cap, h.eta_1 / S(k));
}

template <typename S>
S model_jerk(S accel, S demand, const Theta<S>& theta) {
  if (!(theta[kLag] > 0)) throw DomainError("model: T_L must be > 0");
  return (theta[kRatio] * demand - accel) / theta[kLag];
}

template <typename S>
S log_likelihood(const Observation<S>& o, const Theta<S>& theta, S sigma_sq) {
  const S r = o.jerk - model_jerk(o.accel, o.demand, theta);
  return -S(0.5) * std::log(sigma_sq) - r * r / (S(2) * sigma_sq);
}

template <typename S>
Theta<S> log_likelihood_gradient(const Observation<S>& o, const Theta<S>& theta,
                                 S sigma_sq) {
  const S r = o.jerk - model_jerk(o.accel, o.demand, theta);
  const S lag = theta[kLag];
  return Theta<S>(r * (o.demand / lag),
                  r * (o.accel - theta[kRatio] * o.demand) / (lag * lag)) /
         sigma_sq;
}

template <typename S>
S log_posterior(const ObservationBatch<S>& batch, const Theta<S>& theta,
                const GaussianPrior<S>& prior, S sigma_sq) {
  S sum = prior.log_density(theta);
  for (const auto& o : batch.observations()) sum += log_likelihood(o, theta, sigma_sq);
  return sum;
}

/// Gradient of the log posterior using the observations in `indices`, with
/// the likelihood sum rescaled by N / n.
template <typename S>
Theta<S> minibatch_gradient(const ObservationBatch<S>& batch,
                            std::span<const std::size_t> indices, const Theta<S>& theta,
                            const GaussianPrior<S>& prior, S sigma_sq) {
  Theta<S> lik = Theta<S>::Zero();
  for (std::size_t i : indices) lik += log_likelihood_gradient(batch[i], theta, sigma_sq);
  return prior.gradient(theta) + (S(batch.size()) / S(indices.size())) * lik;
}

template <typename S>
Theta<S> log_posterior_gradient(const ObservationBatch<S>& batch, const Theta<S>& theta,
                                const GaussianPrior<S>& prior, S sigma_sq) {
  Theta<S> lik = Theta<S>::Zero();
  for (const auto& o : batch.observations()) lik += log_likelihood_gradient(o, theta, sigma_sq);
  return prior.gradient(theta) + lik;
}

/// One Langevin increment in natural coordinates:
/// (eta/2) * grad + sqrt(eta) * noise_draw, with noise_draw ~ N(0, I).
template <typename S>
Theta<S> sgld_gradient(const ObservationBatch<S>& batch,
                       std::span<const std::size_t> indices, const Theta<S>& theta,
                       const GaussianPrior<S>& prior, S sigma_sq, S eta,
                       const Theta<S>& noise_draw) {
  return (eta / S(2)) * minibatch_gradient(batch, indices, theta, prior, sigma_sq) +
         std::sqrt(eta) * noise_draw;
}

/// False when u and a carry too little independent variation to separate
/// K_L from T_L.
template <typename S>
bool identifiable(const ObservationBatch<S>& batch, S min_excitation) {
  Eigen::Matrix2<S> g = Eigen::Matrix2<S>::Zero();
  for (const auto& o : batch.observations()) {
    const Eigen::Vector2<S> x(o.demand, o.accel);
    g.noalias() += x * x.transpose();
  }
  g /= S(batch.size());
  const Eigen::Vector2<S> ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2<S>>(
                                   g, Eigen::EigenvaluesOnly).eigenvalues();
  return ev[0] >= min_excitation && ev[0] >= S(1e-6) * ev[1];
}

template <typename S>
struct PosteriorSummary {
  Theta<S> mean = Theta<S>::Zero();
  Eigen::Matrix2<S> covariance = Eigen::Matrix2<S>::Zero();
  Theta<S> lower = Theta<S>::Zero();  // 2.5% quantile
  Theta<S> upper = Theta<S>::Zero();  // 97.5% quantile
};

template <typename S>
struct PosteriorEstimate {
  std::vector<Theta<S>> samples;
  PosteriorSummary<S> summary;
  bool low_confidence = false;

  const Theta<S>& mean() const { return summary.mean; }
};

/// Linear-interpolation quantile of sorted data.
template <typename S>
S quantile_sorted(std::span<const S> sorted, S p) {
  const S pos = p * S(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - S(lo)) * (sorted[hi] - sorted[lo]);
}

/// Sample mean, unbiased sample covariance and central 95% intervals.
template <typename S>
PosteriorSummary<S> posterior_summary(std::span<const Theta<S>> samples) {
  if (samples.size() < 2) throw DomainError("posterior summary: need at least 2 samples");
  PosteriorSummary<S> s;
  for (const auto& t : samples) s.mean += t;
  s.mean /= S(samples.size());
  for (const auto& t : samples) {
    const Theta<S> d = t - s.mean;
    s.covariance.noalias() += d * d.transpose();
  }
  s.covariance /= S(samples.size() - 1);
  std::vector<S> column(samples.size());
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < samples.size(); ++i) column[i] = samples[i][c];
    std::sort(column.begin(), column.end());
    s.lower[c] = quantile_sorted<S>(column, S(0.025));
    s.upper[c] = quantile_sorted<S>(column, S(0.975));
  }
  return s;
}

namespace detail {

/// Gauss-Newton curvature of the negative log posterior in log coordinates.
template <typename S>
Eigen::Matrix2<S> log_space_curvature(const ObservationBatch<S>& batch,
                                      const Theta<S>& theta, const GaussianPrior<S>& prior,
                                      S sigma_sq) {
  Eigen::Matrix2<S> h = Eigen::Matrix2<S>::Zero();
  for (const auto& o : batch.observations()) {
    const S f = model_jerk(o.accel, o.demand, theta);
    const Eigen::Vector2<S> j(theta[kRatio] * o.demand / theta[kLag], -f);
    h.noalias() += j * j.transpose();
  }
  h /= sigma_sq;
  h.diagonal() += theta.cwiseAbs2() / prior.variance;
  return h;
}

/// Draws n distinct indices from [0, size) by partial Fisher-Yates.
template <typename Rng>
void sample_indices(std::vector<std::size_t>& pool, std::size_t n, Rng& rng,
                    std::vector<std::size_t>& out) {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
    out[i] = pool[i];
  }
}

}  // namespace detail

/// SGLD optimization-then-sampling. Iterates are kept from k > burn_in.
///
/// Parameters are updated in log coordinates phi = log(theta), which keeps
/// both strictly positive. The log-posterior gradient picks up the chain rule
/// factor theta and the log-Jacobian term 1. Each step is preconditioned by
/// the inverse Gauss-Newton curvature; it tracks the iterate during burn-in
/// and is held fixed while sampling, so the sampling phase is a Langevin
/// chain with a constant mass matrix.
template <typename S>
PosteriorEstimate<S> sgld_run(const ObservationBatch<S>& batch,
                              const GaussianPrior<S>& prior, const SgldHyper<S>& hyper) {
  validate(hyper, batch.size());
  if (!(prior.variance > 0)) throw DomainError("sgld: prior variance must be > 0");
  if (!(prior.mean.array() > S(0)).all())
    throw DomainError("sgld: prior mean must be positive to start the chain");

  std::mt19937_64 rng(hyper.seed);
  std::normal_distribution<S> normal(S(0), S(1));
  std::vector<std::size_t> pool(batch.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<std::size_t> idx;

  Eigen::Vector2<S> phi = prior.mean.array().log().matrix();
  Eigen::Matrix2<S> precond = Eigen::Matrix2<S>::Identity();
  Eigen::Matrix2<S> precond_sqrt = Eigen::Matrix2<S>::Identity();

  PosteriorEstimate<S> est;
  est.samples.reserve(hyper.iterations - hyper.burn_in);
  const auto to_theta = [&](const Eigen::Vector2<S>& p) {
    Theta<S> t = p.array().exp().matrix();
    if (hyper.freeze_lag) t[kLag] = prior.mean[kLag];
    return t;
  };
  for (std::size_t k = 1; k <= hyper.iterations; ++k) {
    const Theta<S> theta = to_theta(phi);
    if (k <= hyper.burn_in) {
      Eigen::Matrix2<S> h = detail::log_space_curvature(batch, theta, prior, hyper.sigma_sq);
      if (hyper.freeze_lag) h(0, 1) = h(1, 0) = S(0);
      Eigen::LLT<Eigen::Matrix2<S>> llt(h);
      if (llt.info() == Eigen::Success) {
        precond = llt.solve(Eigen::Matrix2<S>::Identity());
        precond_sqrt = Eigen::LLT<Eigen::Matrix2<S>>(precond).matrixL();
      }
    }
    detail::sample_indices(pool, hyper.minibatch, rng, idx);
    const S eta = step_size(hyper, k);
    const Eigen::Vector2<S> grad_phi =
        theta.cwiseProduct(minibatch_gradient<S>(batch, idx, theta, prior, hyper.sigma_sq)) +
        Eigen::Vector2<S>::Ones();
    const Eigen::Vector2<S> xi(normal(rng), normal(rng));
    Eigen::Vector2<S> delta =
        (eta / S(2)) * (precond * grad_phi) + std::sqrt(eta) * (precond_sqrt * xi);
    // Trust region on the log step: at most a factor e per iteration.
    delta = delta.cwiseMax(S(-1)).cwiseMin(S(1));
    if (hyper.freeze_lag) delta[kLag] = S(0);
    if (delta.allFinite()) phi += delta;
    if (k > hyper.burn_in) est.samples.push_back(to_theta(phi));
  }
  est.summary = posterior_summary<S>(est.samples);
  est.low_confidence = !identifiable(batch, hyper.min_excitation);
  return est;
}

/// Prior for the next window: previous posterior mean, variance lambda * I.
template <typename S>
GaussianPrior<S> update_prior(const PosteriorEstimate<S>& prev, S lambda) {
  if (!(lambda > 0)) throw DomainError("prior update: lambda must be > 0");
  return GaussianPrior<S>{prev.mean(), lambda};
}

}  // namespace cfuq::estimator
