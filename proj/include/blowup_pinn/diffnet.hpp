#pragma once

// Fully-connected tanh networks with exact input derivatives (forward-mode
// tangents carried through every layer) and exact parameter gradients of
// losses built from those derivatives (reverse sweep over a per-layer tape of
// values and tangents).
//
// The activation is tanh on hidden layers and the identity on the output
// layer. Residual-based losses need a C^1 surrogate; tanh is an assumption,
// not something fixed by the underlying method.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blowup_pinn/quadrature.hpp"

namespace blowup_pinn {

/// Weights and biases of an MLP. weights[l] maps layer l (size layer_sizes[l])
/// to layer l+1.
///
/// Flat ordering (gradients, checkpoints): layer-major, within a layer the
/// weight matrix in row-major order followed by the bias vector.
struct NetworkParams {
  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int affine_layers() const { return static_cast<int>(weights.size()); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      n += static_cast<std::size_t>(layer_sizes[l + 1]) * (layer_sizes[l] + 1);
    }
    return n;
  }

  Vector flat() const {
    Vector out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (int l = 0; l < affine_layers(); ++l) {
      const Matrix& w = weights[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) out[k++] = w(r, c);
      for (Eigen::Index r = 0; r < biases[l].size(); ++r) out[k++] = biases[l][r];
    }
    return out;
  }

  void assign_flat(const Vector& theta) {
    if (theta.size() != static_cast<Eigen::Index>(parameter_count())) {
      throw std::invalid_argument("NetworkParams::assign_flat: expected " + std::to_string(parameter_count()) +
                                  " values, got " + std::to_string(theta.size()));
    }
    Eigen::Index k = 0;
    for (int l = 0; l < affine_layers(); ++l) {
      Matrix& w = weights[l];
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = theta[k++];
      for (Eigen::Index r = 0; r < biases[l].size(); ++r) biases[l][r] = theta[k++];
    }
  }

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }

  static void validate_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("NetworkParams: need at least input and output layer sizes");
    for (int s : sizes)
      if (s <= 0) throw std::invalid_argument("NetworkParams: layer sizes must be positive");
  }

  static NetworkParams zeros(std::vector<int> sizes) {
    validate_sizes(sizes);
    NetworkParams p;
    p.layer_sizes = std::move(sizes);
    for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
      p.weights.push_back(Matrix::Zero(p.layer_sizes[l + 1], p.layer_sizes[l]));
      p.biases.push_back(Vector::Zero(p.layer_sizes[l + 1]));
    }
    return p;
  }

  /// Glorot-uniform weights, zero biases.
  static NetworkParams glorot(std::vector<int> sizes, std::uint64_t seed) {
    NetworkParams p = zeros(std::move(sizes));
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6e657477u};
    std::mt19937_64 rng(seq);
    for (auto& w : p.weights) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    return p;
  }

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    if (a.layer_sizes != b.layer_sizes) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
      if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
    }
    return true;
  }
};

/// Layer sizes of an MLP with `depth` affine layers of uniform hidden `width`.
inline std::vector<int> mlp_layer_sizes(int input_dim, int output_dim, int width, int depth) {
  if (depth < 1 || width < 1) throw std::invalid_argument("mlp_layer_sizes: width and depth must be >= 1");
  std::vector<int> sizes{input_dim};
  for (int l = 0; l + 1 < depth; ++l) sizes.push_back(width);
  sizes.push_back(output_dim);
  return sizes;
}

/// Network output and its Jacobian with respect to the input point.
struct JetValue {
  Vector value;
  Matrix input_jacobian;  // output_dim x input_dim
};

/// Batched outputs: value is (out x n); d[k] is d value / d input_k.
struct JetBatch {
  Matrix value;
  std::vector<Matrix> d;

  bool has_jet() const { return !d.empty(); }
  Eigen::Index size() const { return value.cols(); }

  static JetBatch zeros_like(const JetBatch& other) {
    JetBatch z;
    z.value = Matrix::Zero(other.value.rows(), other.value.cols());
    for (const auto& m : other.d) z.d.push_back(Matrix::Zero(m.rows(), m.cols()));
    return z;
  }
};

namespace detail {

inline void check_point(const NetworkParams& params, Eigen::Index len) {
  if (len != params.input_dim()) {
    throw std::invalid_argument("diffnet: point has " + std::to_string(len) + " coordinates, network expects " +
                                std::to_string(params.input_dim()));
  }
}

// Plain per-point recurrence; the value path is identical with or without
// the Jacobian so forward and forward_jet agree bitwise.
inline Vector evaluate_point(const NetworkParams& params, const Vector& point, Matrix* jacobian) {
  check_point(params, point.size());
  Vector a = point;
  Matrix t;  // current layer tangents, (layer width) x (input dim)
  if (jacobian) t = Matrix::Identity(params.input_dim(), params.input_dim());
  const int layers = params.affine_layers();
  for (int l = 0; l < layers; ++l) {
    const Matrix& w = params.weights[l];
    const Vector& b = params.biases[l];
    Vector z(w.rows());
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double acc = b[r];
      for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * a[c];
      z[r] = acc;
    }
    Matrix zt;
    if (jacobian) {
      zt.resize(w.rows(), t.cols());
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index k = 0; k < t.cols(); ++k) {
          double acc = 0.0;
          for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * t(c, k);
          zt(r, k) = acc;
        }
    }
    if (l + 1 < layers) {
      for (Eigen::Index r = 0; r < z.size(); ++r) {
        const double y = std::tanh(z[r]);
        z[r] = y;
        if (jacobian) zt.row(r) *= (1.0 - y * y);
      }
    }
    a = std::move(z);
    if (jacobian) t = std::move(zt);
  }
  if (jacobian) *jacobian = std::move(t);
  return a;
}

}  // namespace detail

namespace detail {

// Vectorizable tanh: (1 - e)/(1 + e) with e = exp(-2|x|), and a short odd
// series below |x| = 0.02 where that form loses relative accuracy.
template <class Derived>
void tanh_inplace(Eigen::ArrayBase<Derived>& a) {
  const Eigen::ArrayXXd ax = a.abs();
  const Eigen::ArrayXXd e = (-2.0 * ax).exp();
  const Eigen::ArrayXXd x2 = a.square();
  const Eigen::ArrayXXd series =
      a * (1.0 + x2 * (-1.0 / 3.0 + x2 * (2.0 / 15.0 + x2 * (-17.0 / 315.0 + x2 * (62.0 / 2835.0)))));
  a = (ax < 0.02).select(series, a.sign() * (1.0 - e) / (1.0 + e));
}

}  // namespace detail

/// u_theta(point).
inline Vector forward(const NetworkParams& params, const Vector& point) {
  return detail::evaluate_point(params, point, nullptr);
}

/// u_theta(point) together with its exact input Jacobian.
inline JetValue forward_jet(const NetworkParams& params, const Vector& point) {
  JetValue out;
  out.value = detail::evaluate_point(params, point, &out.input_jacobian);
  return out;
}

/// Records one batched forward pass (values plus, optionally, one tangent
/// channel per input coordinate) so that adjoints of the outputs and of the
/// output tangents can be pulled back to the parameters.
///
/// Channel layout of every stored block: columns [0, n) hold values,
/// columns [(k+1) n, (k+2) n) hold the tangent along input k.
class JetTape {
 public:
  void forward(const NetworkParams& params, const Matrix& points, bool with_jet) {
    if (points.rows() != params.input_dim()) detail::check_point(params, points.rows());
    n_ = points.cols();
    tangents_ = with_jet ? params.input_dim() : 0;
    const Eigen::Index channels = tangents_ + 1;
    const int layers = params.affine_layers();
    h_.resize(static_cast<std::size_t>(layers) + 1);
    zdot_.resize(static_cast<std::size_t>(layers));

    Matrix& h0 = h_[0];
    h0.setZero(params.input_dim(), channels * n_);
    h0.leftCols(n_) = points;
    for (Eigen::Index k = 0; k < tangents_; ++k) h0.row(k).segment((k + 1) * n_, n_).setOnes();

    for (int l = 0; l < layers; ++l) {
      const Matrix& w = params.weights[l];
      Matrix& z = h_[l + 1];
      if (l == 0 && tangents_ > 0) {
        // Input tangents are unit vectors: W e_k is column k of W.
        z.resize(w.rows(), channels * n_);
        z.leftCols(n_).noalias() = w * points;
        for (Eigen::Index k = 0; k < tangents_; ++k) z.middleCols((k + 1) * n_, n_).colwise() = w.col(k);
      } else {
        z.noalias() = w * h_[l];
      }
      z.leftCols(n_).colwise() += params.biases[l];
      if (l + 1 < layers) {
        auto a = z.leftCols(n_).array();
        detail::tanh_inplace(a);
        if (tangents_ > 0) {
          zdot_[l] = z.rightCols(tangents_ * n_);
          const Eigen::ArrayXXd s = 1.0 - a.square();
          for (Eigen::Index k = 0; k < tangents_; ++k) {
            z.middleCols((k + 1) * n_, n_).array() *= s;
          }
        }
      }
    }
  }

  JetBatch output() const {
    const Matrix& top = h_.back();
    JetBatch out;
    out.value = top.leftCols(n_);
    for (Eigen::Index k = 0; k < tangents_; ++k) out.d.push_back(top.middleCols((k + 1) * n_, n_));
    return out;
  }

  /// Adds d(loss)/d(theta) to `grad` (flat ordering) given adjoints of the
  /// outputs recorded by the last forward call.
  void backward(const NetworkParams& params, const JetBatch& adjoint, Vector& grad) {
    const int layers = params.affine_layers();
    const Eigen::Index channels = tangents_ + 1;
    Matrix& g = g_;
    g.resize(params.output_dim(), channels * n_);
    g.leftCols(n_) = adjoint.value;
    for (Eigen::Index k = 0; k < tangents_; ++k) g.middleCols((k + 1) * n_, n_) = adjoint.d[k];

    std::vector<Eigen::Index> offset(static_cast<std::size_t>(layers));
    Eigen::Index running = 0;
    for (int l = 0; l < layers; ++l) {
      offset[l] = running;
      running += params.weights[l].size() + params.biases[l].size();
    }

    for (int l = layers - 1; l >= 0; --l) {
      const Matrix* zbar = &g;
      if (l + 1 < layers) {
        // g holds adjoints of [a | a_dot_k]; a_dot_k = s * z_dot_k, s = 1 - a^2, a = tanh(z).
        const auto a = h_[l + 1].leftCols(n_).array();
        s_ = 1.0 - a.square();
        zbar_.resize(g.rows(), g.cols());
        sbar_.setZero(g.rows(), n_);
        for (Eigen::Index k = 0; k < tangents_; ++k) {
          const auto gk = g.middleCols((k + 1) * n_, n_).array();
          sbar_ += zdot_[l].middleCols(k * n_, n_).array() * gk;
          zbar_.middleCols((k + 1) * n_, n_).array() = s_ * gk;
        }
        zbar_.leftCols(n_).array() = (g.leftCols(n_).array() - 2.0 * a * sbar_) * s_;
        zbar = &zbar_;
      }

      const Matrix& w = params.weights[l];
      if (l == 0 && tangents_ > 0) {
        grad_w_.noalias() = zbar->leftCols(n_) * h_[0].leftCols(n_).transpose();
        for (Eigen::Index k = 0; k < tangents_; ++k)
          grad_w_.col(k) += zbar->middleCols((k + 1) * n_, n_).rowwise().sum();
      } else {
        grad_w_.noalias() = *zbar * h_[l].transpose();
      }
      Eigen::Index k = offset[l];
      for (Eigen::Index r = 0; r < grad_w_.rows(); ++r)
        for (Eigen::Index c = 0; c < grad_w_.cols(); ++c) grad[k++] += grad_w_(r, c);
      const Vector grad_b = zbar->leftCols(n_).rowwise().sum();
      for (Eigen::Index r = 0; r < grad_b.size(); ++r) grad[k++] += grad_b[r];

      if (l > 0) {
        next_.noalias() = w.transpose() * *zbar;
        g.swap(next_);
      }
    }
  }

 private:
  Eigen::Index n_ = 0;
  Eigen::Index tangents_ = 0;
  std::vector<Matrix> h_;     // post-activation blocks, h_[0] is the input block
  std::vector<Matrix> zdot_;  // pre-activation tangents of hidden layers
  // Reverse-sweep scratch, kept to avoid reallocating every call.
  Matrix g_, next_, zbar_, grad_w_;
  Eigen::ArrayXXd s_, sbar_;
};

/// Batched evaluation without a gradient; processed in chunks to bound memory.
inline JetBatch evaluate_batch(const NetworkParams& params, const Matrix& points, bool with_jet,
                               Eigen::Index chunk = 8192) {
  detail::check_point(params, points.rows());
  JetBatch out;
  const Eigen::Index n = points.cols();
  out.value.resize(params.output_dim(), n);
  if (with_jet) out.d.assign(static_cast<std::size_t>(params.input_dim()), Matrix(params.output_dim(), n));
  JetTape tape;
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min(chunk, n - start);
    tape.forward(params, points.middleCols(start, len), with_jet);
    JetBatch part = tape.output();
    out.value.middleCols(start, len) = part.value;
    for (std::size_t k = 0; k < part.d.size(); ++k) out.d[k].middleCols(start, len) = part.d[k];
  }
  return out;
}

/// One family of points entering a loss. `evaluate` receives the surrogate's
/// outputs at `points`, returns the family's loss contribution and writes
/// d(contribution)/d(outputs) into `adjoint` (pre-shaped like `jet`).
struct LossTerm {
  std::string name;
  Matrix points;
  bool needs_jet = false;
  std::function<double(const JetBatch& jet, JetBatch& adjoint)> evaluate;
};

struct LossAndGrad {
  double loss = 0.0;
  Vector gradient;
};

/// Raised when a loss evaluates to NaN/Inf; carries the first offending point.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::string term, Vector point)
      : std::runtime_error(describe(term, point)), term_(std::move(term)), point_(std::move(point)) {}

  const std::string& term() const { return term_; }
  const Vector& point() const { return point_; }

 private:
  static std::string describe(const std::string& term, const Vector& point) {
    std::ostringstream os;
    os << "non-finite loss in term '" << term << "' at point (";
    for (Eigen::Index i = 0; i < point.size(); ++i) os << (i ? ", " : "") << point[i];
    os << ")";
    return os.str();
  }

  std::string term_;
  Vector point_;
};

namespace detail {

inline Eigen::Index first_non_finite_column(const JetBatch& jet, const JetBatch& adjoint) {
  auto bad = [](const Matrix& m, Eigen::Index c) { return !m.col(c).allFinite(); };
  for (Eigen::Index c = 0; c < jet.size(); ++c) {
    if (bad(jet.value, c) || bad(adjoint.value, c)) return c;
    for (std::size_t k = 0; k < jet.d.size(); ++k)
      if (bad(jet.d[k], c) || bad(adjoint.d[k], c)) return c;
  }
  return 0;
}

}  // namespace detail

/// Scalar loss sum_terms term.evaluate(...) and its exact gradient in theta.
/// `tape` is scratch space; reusing one across calls avoids reallocation.
inline LossAndGrad loss_and_grad(const NetworkParams& params, std::span<const LossTerm> terms, JetTape& tape) {
  LossAndGrad out;
  out.gradient = Vector::Zero(static_cast<Eigen::Index>(params.parameter_count()));
  for (const LossTerm& term : terms) {
    if (term.points.cols() == 0) continue;
    tape.forward(params, term.points, term.needs_jet);
    const JetBatch jet = tape.output();
    JetBatch adjoint = JetBatch::zeros_like(jet);
    const double value = term.evaluate(jet, adjoint);
    if (!std::isfinite(value)) {
      throw NonFiniteLoss(term.name, term.points.col(detail::first_non_finite_column(jet, adjoint)));
    }
    out.loss += value;
    tape.backward(params, adjoint, out.gradient);
  }
  if (!std::isfinite(out.loss)) throw NonFiniteLoss("total", terms.empty() ? Vector() : Vector(terms.front().points.col(0)));
  return out;
}

inline LossAndGrad loss_and_grad(const NetworkParams& params, std::span<const LossTerm> terms) {
  JetTape tape;
  return loss_and_grad(params, terms, tape);
}

inline LossAndGrad loss_and_grad(const NetworkParams& params, const std::vector<LossTerm>& terms) {
  return loss_and_grad(params, std::span<const LossTerm>(terms));
}

}  // namespace blowup_pinn
