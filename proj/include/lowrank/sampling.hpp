// Observation models y = A(M*) + omega: sampling operators with adjoints,
// instance generation, and restricted-spectrum estimates.

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/matcore.hpp"

namespace lowrank {

enum class OperatorKind { kFullObservation, kGaussianSensing, kWeightedHadamard, kBernoulliMask };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& s);

// Loss normalization for Gaussian sensing: 1/(2p) per measurement, or the
// plain 1/2 of the unnormalized least-squares loss.
enum class LossScaling { kPerMeasurement, kUnit };

std::string to_string(LossScaling s);
LossScaling loss_scaling_from_string(const std::string& s);

// Abstract linear map A: R^{n x m} -> R^p. Immutable after construction.
// The least-squares loss built on it is loss_scale() * ||A(X) - y||^2.
class SamplingOperator {
 public:
  SamplingOperator(Index n, Index m, Index p, double scale);
  virtual ~SamplingOperator() = default;

  Index rows() const { return n_; }
  Index cols() const { return m_; }
  Index measurements() const { return p_; }
  double loss_scale() const { return scale_; }

  virtual OperatorKind kind() const = 0;
  virtual Vector apply(const Matrix& x) const = 0;
  virtual Matrix adjoint(const Vector& v) const = 0;

  // Extremes of ||A(X)||^2 over unit-norm X when known in closed form.
  virtual std::optional<std::pair<double, double>> exact_spectrum() const { return std::nullopt; }

  // ||A||_op, computed once and cached.
  double operator_norm() const;

 protected:
  virtual double compute_operator_norm() const;

 private:
  Index n_, m_, p_;
  double scale_;
  mutable std::once_flag norm_once_;
  mutable double norm_ = 0.0;
};

using OperatorPtr = std::shared_ptr<const SamplingOperator>;

class FullObservation final : public SamplingOperator {
 public:
  FullObservation(Index n, Index m);
  OperatorKind kind() const override { return OperatorKind::kFullObservation; }
  Vector apply(const Matrix& x) const override;
  Matrix adjoint(const Vector& v) const override;
  std::optional<std::pair<double, double>> exact_spectrum() const override { return {{1.0, 1.0}}; }

 protected:
  double compute_operator_norm() const override { return 1.0; }
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// p dense measurement matrices stored as the rows of a p x (n m) matrix;
// row i is vec(A_i) in column-major order.
class GaussianSensing final : public SamplingOperator {
 public:
  GaussianSensing(Index n, Index m, RowMajorMatrix a, LossScaling scaling);
  OperatorKind kind() const override { return OperatorKind::kGaussianSensing; }
  Vector apply(const Matrix& x) const override;
  Matrix adjoint(const Vector& v) const override;
  const RowMajorMatrix& measurement_matrix() const { return a_; }
  LossScaling scaling() const { return scaling_; }

 private:
  RowMajorMatrix a_;
  LossScaling scaling_;
};

class WeightedHadamard final : public SamplingOperator {
 public:
  explicit WeightedHadamard(Matrix weights);
  OperatorKind kind() const override { return OperatorKind::kWeightedHadamard; }
  Vector apply(const Matrix& x) const override;
  Matrix adjoint(const Vector& v) const override;
  std::optional<std::pair<double, double>> exact_spectrum() const override;
  const Matrix& weights() const { return h_; }

 protected:
  double compute_operator_norm() const override { return h_.maxCoeff(); }

 private:
  Matrix h_;
};

// Observes the entries where mask is nonzero, in column-major order.
class BernoulliMask final : public SamplingOperator {
 public:
  explicit BernoulliMask(const Matrix& mask);
  OperatorKind kind() const override { return OperatorKind::kBernoulliMask; }
  Vector apply(const Matrix& x) const override;
  Matrix adjoint(const Vector& v) const override;
  Matrix mask() const;

 protected:
  double compute_operator_norm() const override { return measurements() > 0 ? 1.0 : 0.0; }

 private:
  std::vector<Index> observed_;  // column-major linear indices
};

inline constexpr std::size_t kDefaultSensingEntryCap = 64u * 1024u * 1024u;

OperatorPtr make_full_observation(Index n, Index m);
OperatorPtr make_gaussian_sensing(Index n, Index m, Index p, std::uint64_t seed,
                                  LossScaling scaling = LossScaling::kPerMeasurement,
                                  std::size_t max_entries = kDefaultSensingEntryCap);
OperatorPtr make_weighted_hadamard(const Matrix& h);
OperatorPtr make_bernoulli_mask(Index n, Index m, double prob, std::uint64_t seed);

struct OperatorSpec {
  OperatorKind kind = OperatorKind::kFullObservation;
  Index p = 0;                 // Gaussian sensing
  LossScaling scaling = LossScaling::kPerMeasurement;
  double weight_lo = 0.9;      // weighted: uniform weights in [lo, hi]
  double weight_hi = 1.1;
  double mask_prob = 0.5;      // Bernoulli mask
  std::size_t max_entries = kDefaultSensingEntryCap;
};

OperatorPtr make_operator(const OperatorSpec& spec, Index n, Index m, std::uint64_t seed);

struct NoiseSpec {
  enum class Calibration { kAbsolute, kRelative };
  Calibration calibration = Calibration::kAbsolute;
  double sigma = 0.0;  // absolute: omega = sigma * xi
  double ratio = 0.0;  // relative: sigma_omega = ratio * ||A(M*)|| / ||xi||

  static NoiseSpec none() { return {}; }
  static NoiseSpec absolute(double sigma);
  static NoiseSpec relative(double ratio);
};

struct RecoveryInstance {
  Matrix m_star;
  OperatorPtr op;
  Vector omega;
  Vector y;
  Index rank = 0;
  std::uint64_t seed = 0;
  NoiseSpec noise;
  OperatorSpec op_spec;
  double sigma_omega = 0.0;

  Index n() const { return m_star.rows(); }
  Index m() const { return m_star.cols(); }
};

// M* = U* V*^T with standard normal factors, y = A(M*) + omega.
RecoveryInstance generate_instance(Index n, Index m, Index rank, const OperatorSpec& spec,
                                   const NoiseSpec& noise, std::uint64_t seed);

struct SpectrumEstimate {
  enum class Method { kExactFullObservation, kExactWeighted, kMonteCarlo };
  double alpha = 0.0;
  double beta = 0.0;
  Index rank_used = 0;
  Index trials = 0;
  Method method = Method::kMonteCarlo;

  bool exact() const { return method != Method::kMonteCarlo; }
};

std::string to_string(SpectrumEstimate::Method m);

// Extremes of ||A(X)||^2 over random unit-norm rank-kappa X (closed form for
// full and weighted observation). Trials run in parallel, each from its own
// derived seed.
SpectrumEstimate estimate_restricted_spectrum(const SamplingOperator& op, Index kappa,
                                              Index trials, std::uint64_t seed);

// Restricted moduli of the loss Hessian: (alpha, beta) times 2 * scale.
SpectrumEstimate hessian_moduli(const SpectrumEstimate& s, double loss_scale);

// ||grad f(M*)|| = 2 * scale * ||A*(omega)||.
double noise_adjoint_norm(const RecoveryInstance& inst);

}  // namespace lowrank
