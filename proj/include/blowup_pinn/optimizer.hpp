#pragma once

// Full-batch Adam and the PINN training loop.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "blowup_pinn/diffnet.hpp"
#include "blowup_pinn/problems.hpp"
#include "blowup_pinn/sampling.hpp"

namespace blowup_pinn {

struct AdamState {
  std::int64_t step = 0;
  Vector m;
  Vector v;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(std::size_t parameter_count, double lr) {
    AdamState s;
    s.lr = lr;
    s.m = Vector::Zero(static_cast<Eigen::Index>(parameter_count));
    s.v = Vector::Zero(static_cast<Eigen::Index>(parameter_count));
    return s;
  }
};

/// One Adam update with bias correction. Throws std::invalid_argument, leaving
/// `state` and `params` untouched, on a length mismatch or non-finite gradient.
inline void adam_step(AdamState& state, NetworkParams& params, const Vector& grad) {
  const auto n = static_cast<Eigen::Index>(params.parameter_count());
  if (grad.size() != n || state.m.size() != n || state.v.size() != n)
    throw std::invalid_argument("adam_step: gradient/moment length does not match parameter count");
  if (!grad.allFinite()) throw std::invalid_argument("adam_step: non-finite gradient");

  const std::int64_t t = state.step + 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
  const Vector m_hat = state.m / c1;
  const Vector v_hat = state.v / c2;
  Vector theta = params.flat();
  theta.array() -= state.lr * m_hat.array() / (v_hat.array().sqrt() + state.eps);
  params.assign_flat(theta);
  state.step = t;
}

struct BestIterate {
  NetworkParams params;
  double loss = std::numeric_limits<double>::infinity();
  std::int64_t iteration = -1;
};

struct HistoryPoint {
  std::int64_t iteration = 0;
  double loss = 0.0;
};

struct TrainConfig {
  int width = 30;
  int depth = 6;
  std::int64_t iterations = 20000;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t dense_history = 1000;  // every iteration up to here
  std::int64_t history_stride = 100;  // then every stride-th
  // Optional progress hook, called with (iteration, loss) at history points.
  std::function<void(std::int64_t, double)> on_progress;
};

struct TrainResult {
  BestIterate best;
  NetworkParams final_params;
  double initial_loss = std::numeric_limits<double>::quiet_NaN();
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<HistoryPoint> history;
  std::int64_t iterations_completed = 0;
  double train_seconds = 0.0;  // optimizer loop only
  bool diverged = false;
  std::string failure;
};

/// Network shape for a problem: (space_dim + 1) inputs, space_dim outputs.
template <class Problem>
std::vector<int> network_shape(const TrainConfig& config) {
  return mlp_layer_sizes(Problem::space_dim + 1, Problem::space_dim, config.width, config.depth);
}

/// Runs `iterations` Adam steps from `initial` on the fixed collocation set.
/// The loss is evaluated at theta_0 ... theta_iterations; the best iterate is
/// the lowest of these. Divergence stops the loop and keeps the partial history.
template <class Problem>
TrainResult train_from(const Problem& problem, const CollocationSet& collocation, const TrainConfig& config,
                       NetworkParams initial) {
  if (config.iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
  if (!(config.lr > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  const std::vector<LossTerm> terms = pinn_loss_terms(problem, collocation);

  TrainResult out;
  NetworkParams params = std::move(initial);
  AdamState adam = AdamState::fresh(params.parameter_count(), config.lr);
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.eps = config.eps;
  JetTape tape;

  auto record = [&](std::int64_t it, double loss) {
    const bool keep = it <= config.dense_history || it == config.iterations ||
                      (config.history_stride > 0 && it % config.history_stride == 0);
    if (!keep) return;
    out.history.push_back({it, loss});
    if (config.on_progress) config.on_progress(it, loss);
  };

  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t it = 0;; ++it) {
    LossAndGrad lg;
    try {
      lg = loss_and_grad(params, std::span<const LossTerm>(terms), tape);
    } catch (const NonFiniteLoss& e) {
      out.diverged = true;
      out.failure = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    if (it == 0) out.initial_loss = lg.loss;
    out.final_loss = lg.loss;
    out.iterations_completed = it;
    record(it, lg.loss);
    if (lg.loss < out.best.loss) {
      out.best.loss = lg.loss;
      out.best.iteration = it;
      out.best.params = params;
    }
    if (it == config.iterations) break;
    try {
      adam_step(adam, params, lg.gradient);
    } catch (const std::invalid_argument& e) {
      out.diverged = true;
      out.failure = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
  }
  out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (out.diverged) out.final_loss = std::numeric_limits<double>::quiet_NaN();
  if (out.best.iteration < 0) out.best.params = params;
  out.final_params = std::move(params);
  return out;
}

/// As train_from, starting from Glorot-initialised weights drawn from config.seed.
template <class Problem>
TrainResult train(const Problem& problem, const CollocationSet& collocation, const TrainConfig& config) {
  return train_from(problem, collocation, config, NetworkParams::glorot(network_shape<Problem>(config), config.seed));
}

}  // namespace blowup_pinn
