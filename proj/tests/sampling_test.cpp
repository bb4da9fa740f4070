#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "lowrank/instance_io.hpp"
#include "lowrank/random.hpp"
#include "lowrank/sampling.hpp"
#include "lowrank/theory.hpp"
#include "test_util.hpp"

using namespace lowrank;

namespace {

double adjoint_defect(const SamplingOperator& op, Rng& rng) {
  const Matrix x = gaussian_matrix(op.rows(), op.cols(), rng);
  const Vector v = gaussian_vector(op.measurements(), rng);
  const double lhs = op.apply(x).dot(v);
  const double rhs = (x.array() * op.adjoint(v).array()).sum();
  return std::abs(lhs - rhs) / (x.norm() * v.norm());
}

Matrix positive_weights(Index n, Index m, Rng& rng) {
  return (gaussian_matrix(n, m, rng).array().abs() + 0.5).matrix();
}

}  // namespace

TEST(Operators, AdjointIdentity) {
  Rng rng(1);
  const OperatorPtr ops[] = {make_full_observation(5, 4), make_gaussian_sensing(5, 4, 30, 7),
                             make_weighted_hadamard(positive_weights(5, 4, rng)),
                             make_bernoulli_mask(5, 4, 0.5, 9)};
  for (const auto& op : ops) {
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) worst = std::max(worst, adjoint_defect(*op, rng));
    EXPECT_LE(worst, 1e-10) << to_string(op->kind());
  }
}

TEST(Operators, Linearity) {
  Rng rng(2);
  const OperatorPtr ops[] = {make_full_observation(6, 3), make_gaussian_sensing(6, 3, 40, 3),
                             make_weighted_hadamard(positive_weights(6, 3, rng)),
                             make_bernoulli_mask(6, 3, 0.6, 4)};
  for (const auto& op : ops) {
    const Matrix x = gaussian_matrix(6, 3, rng), y = gaussian_matrix(6, 3, rng);
    const double a = 1.7, b = -0.3;
    const Vector lhs = op->apply(a * x + b * y);
    const Vector rhs = a * op->apply(x) + b * op->apply(y);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * std::max(1.0, rhs.norm())) << to_string(op->kind());
  }
}

TEST(GaussianSensing, ZeroMapsToZero) {
  const OperatorPtr op = make_gaussian_sensing(3, 3, 5, 1);
  EXPECT_EQ(op->apply(Matrix::Zero(3, 3)).norm(), 0.0);
}

TEST(GaussianSensing, SmallAdjoint) {
  const OperatorPtr op = make_gaussian_sensing(2, 2, 3, 17);
  Rng rng(3);
  for (int t = 0; t < 10; ++t) EXPECT_LE(adjoint_defect(*op, rng), 1e-12);
}

TEST(GaussianSensing, EntryVariance) {
  const OperatorPtr op = make_gaussian_sensing(10, 10, 400, 5);
  const auto& a = static_cast<const GaussianSensing&>(*op).measurement_matrix();
  const double var = a.squaredNorm() / static_cast<double>(a.size());
  EXPECT_NEAR(var * 400, 1.0, 0.05);
  EXPECT_NEAR(op->loss_scale(), 1.0 / 800.0, 1e-15);
  const OperatorPtr unit = make_gaussian_sensing(10, 10, 400, 5, LossScaling::kUnit);
  EXPECT_EQ(unit->loss_scale(), 0.5);
}

TEST(GaussianSensing, Concentration) {
  const OperatorPtr op = make_gaussian_sensing(40, 40, 2000, 21);
  Rng rng(4);
  double mean = 0.0;
  for (int t = 0; t < 50; ++t) mean += op->apply(random_low_rank_unit(40, 40, 2, rng)).squaredNorm();
  mean /= 50;
  EXPECT_GE(mean, 0.8);
  EXPECT_LE(mean, 1.2);
}

TEST(GaussianSensing, MemoryGuard) {
  EXPECT_THROW(make_gaussian_sensing(100, 100, 1000, 1, LossScaling::kPerMeasurement, 1000000), Error);
}

TEST(GaussianSensing, Deterministic) {
  const auto a = make_gaussian_sensing(4, 5, 20, 99);
  const auto b = make_gaussian_sensing(4, 5, 20, 99);
  EXPECT_EQ(static_cast<const GaussianSensing&>(*a).measurement_matrix(),
            static_cast<const GaussianSensing&>(*b).measurement_matrix());
}

TEST(FullObservation, AdjointInvertsApply) {
  Rng rng(5);
  const OperatorPtr op = make_full_observation(4, 6);
  const Matrix x = gaussian_matrix(4, 6, rng);
  EXPECT_EQ(op->adjoint(op->apply(x)), x);
  const SpectrumEstimate s = estimate_restricted_spectrum(*op, 2, 10, 1);
  EXPECT_EQ(s.alpha, 1.0);
  EXPECT_EQ(s.beta, 1.0);
  EXPECT_EQ(s.method, SpectrumEstimate::Method::kExactFullObservation);
}

TEST(WeightedHadamard, AllOnesIsFullObservation) {
  Rng rng(6);
  const OperatorPtr w = make_weighted_hadamard(Matrix::Ones(3, 4));
  const OperatorPtr f = make_full_observation(3, 4);
  const Matrix x = gaussian_matrix(3, 4, rng);
  EXPECT_EQ(w->apply(x), f->apply(x));
  const Vector v = gaussian_vector(12, rng);
  EXPECT_EQ(w->adjoint(v), f->adjoint(v));
}

TEST(WeightedHadamard, ExactExtremes) {
  Matrix h(2, 2);
  h << 1, 2, 2, 1;
  const OperatorPtr op = make_weighted_hadamard(h);
  const SpectrumEstimate s = estimate_restricted_spectrum(*op, 1, 5, 1);
  EXPECT_EQ(s.alpha, 1.0);
  EXPECT_EQ(s.beta, 4.0);
  EXPECT_EQ(s.beta / s.alpha, 4.0);
  EXPECT_EQ(s.method, SpectrumEstimate::Method::kExactWeighted);
}

// The moduli are the squared weight extremes, so admissibility needs
// hi / lo <= sqrt(1.38) ~ 1.175.
TEST(WeightedHadamard, NarrowWeightsAreAdmissible) {
  Rng rng(7);
  std::uniform_real_distribution<double> unif(0.92, 1.08);
  Matrix h(20, 20);
  for (Index i = 0; i < h.size(); ++i) h(i) = unif(rng);
  const OperatorPtr op = make_weighted_hadamard(h);
  const SpectrumEstimate s = estimate_restricted_spectrum(*op, 2, 1, 1);
  const double lo = h.minCoeff(), hi = h.maxCoeff();
  EXPECT_DOUBLE_EQ(s.alpha, lo * lo);
  EXPECT_DOUBLE_EQ(s.beta, hi * hi);
  EXPECT_LE(s.beta / s.alpha, 1.38);
  EXPECT_TRUE(gamma_hat(s.alpha, s.beta).admissible);
}

TEST(WeightedHadamard, TenPercentWeightsExceedAdmissibleRatio) {
  Rng rng(7);
  std::uniform_real_distribution<double> unif(0.9, 1.1);
  Matrix h(20, 20);
  for (Index i = 0; i < h.size(); ++i) h(i) = unif(rng);
  const SpectrumEstimate s = estimate_restricted_spectrum(*make_weighted_hadamard(h), 2, 1, 1);
  const double ratio = std::pow(h.maxCoeff() / h.minCoeff(), 2);
  EXPECT_NEAR(s.beta / s.alpha, ratio, 1e-12 * ratio);
  EXPECT_GT(ratio, 1.38);
  EXPECT_FALSE(gamma_hat(s.alpha, s.beta).admissible);
}

TEST(WeightedHadamard, RejectsNonpositiveWeight) {
  Matrix h = Matrix::Ones(2, 2);
  h(1, 0) = 0.0;
  EXPECT_THROW(make_weighted_hadamard(h), Error);
}

TEST(Instance, NoiselessObservation) {
  OperatorSpec spec;
  spec.kind = OperatorKind::kGaussianSensing;
  spec.p = 50;
  const RecoveryInstance inst = generate_instance(8, 8, 2, spec, NoiseSpec::none(), 3);
  EXPECT_EQ(inst.y, inst.op->apply(inst.m_star));
  EXPECT_EQ(inst.omega.norm(), 0.0);
  EXPECT_EQ(numerical_rank(inst.m_star, 1e-10), 2);
}

TEST(Instance, RelativeNoiseCalibration) {
  OperatorSpec spec;
  spec.kind = OperatorKind::kGaussianSensing;
  spec.p = 1950;
  const RecoveryInstance inst = generate_instance(100, 100, 5, spec, NoiseSpec::relative(0.1), 8);
  const double ratio = inst.omega.norm() / inst.op->apply(inst.m_star).norm();
  EXPECT_GE(ratio, 0.095);
  EXPECT_LE(ratio, 0.105);
}

TEST(Instance, Deterministic) {
  OperatorSpec spec;
  spec.kind = OperatorKind::kGaussianSensing;
  spec.p = 60;
  const RecoveryInstance a = generate_instance(8, 8, 2, spec, NoiseSpec::relative(0.1), 42);
  const RecoveryInstance b = generate_instance(8, 8, 2, spec, NoiseSpec::relative(0.1), 42);
  EXPECT_EQ(a.m_star, b.m_star);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.omega, b.omega);
}

TEST(Instance, RankConstraint) {
  EXPECT_THROW(generate_instance(10, 10, 3, OperatorSpec{}, NoiseSpec::none(), 1), Error);
}

TEST(Instance, SaveLoadRoundTrip) {
  const std::string dir = (std::filesystem::temp_directory_path() / "lowrank_instance_test").string();
  std::filesystem::remove_all(dir);
  OperatorSpec spec;
  spec.kind = OperatorKind::kGaussianSensing;
  spec.p = 40;
  const RecoveryInstance a = generate_instance(8, 9, 2, spec, NoiseSpec::relative(0.05), 4);
  save_instance(a, dir);
  const RecoveryInstance b = load_instance(dir);
  EXPECT_EQ(a.m_star, b.m_star);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.omega, b.omega);
  EXPECT_EQ(b.op->kind(), OperatorKind::kGaussianSensing);
  Rng rng(1);
  const Matrix x = gaussian_matrix(8, 9, rng);
  EXPECT_EQ(a.op->apply(x), b.op->apply(x));
  std::filesystem::remove_all(dir);
}

TEST(Spectrum, GaussianMonteCarloRange) {
  const OperatorPtr op = make_gaussian_sensing(40, 40, 2000, 31);
  const SpectrumEstimate s = estimate_restricted_spectrum(*op, 8, 200, 5);
  EXPECT_LE(s.alpha, s.beta);
  EXPECT_GE(s.alpha, 0.5);
  EXPECT_LE(s.beta, 1.5);
  EXPECT_FALSE(s.exact());
}

TEST(Spectrum, MonotoneInTrials) {
  const OperatorPtr op = make_gaussian_sensing(12, 12, 100, 32);
  double prev_a = std::numeric_limits<double>::infinity(), prev_b = 0.0;
  for (Index t : {1, 5, 20, 80}) {
    const SpectrumEstimate s = estimate_restricted_spectrum(*op, 2, t, 77);
    EXPECT_LE(s.alpha, prev_a);
    EXPECT_GE(s.beta, prev_b);
    prev_a = s.alpha;
    prev_b = s.beta;
  }
}

TEST(Spectrum, DeterministicAcrossThreads) {
  const OperatorPtr op = make_gaussian_sensing(12, 12, 100, 33);
  const SpectrumEstimate a = estimate_restricted_spectrum(*op, 3, 40, 9);
  const SpectrumEstimate b = estimate_restricted_spectrum(*op, 3, 40, 9);
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.beta, b.beta);
}

TEST(NoiseAdjoint, ZeroNoise) {
  const RecoveryInstance inst = generate_instance(8, 8, 2, OperatorSpec{}, NoiseSpec::none(), 1);
  EXPECT_EQ(noise_adjoint_norm(inst), 0.0);
}

TEST(NoiseAdjoint, FullObservationIsSpectralNorm) {
  const RecoveryInstance inst = generate_instance(8, 6, 1, OperatorSpec{}, NoiseSpec::absolute(0.3), 2);
  const Matrix w = Eigen::Map<const Matrix>(inst.omega.data(), 8, 6);
  const double s1 = Eigen::JacobiSVD<Matrix>(w).singularValues()(0);
  EXPECT_NEAR(noise_adjoint_norm(inst), s1, 1e-12 * s1);
}

// ||A*(omega)|| against sigma_omega sqrt(ln(nm)) sqrt(1 + delta), delta = 0.2,
// within a factor of 3 on a small Gaussian sensing instance.
TEST(NoiseAdjoint, GaussianLogScaleSmallInstance) {
  OperatorSpec spec;
  spec.kind = OperatorKind::kGaussianSensing;
  spec.p = 300;
  spec.scaling = LossScaling::kUnit;
  const RecoveryInstance inst = generate_instance(10, 10, 2, spec, NoiseSpec::relative(0.1), 3);
  const double ref = inst.sigma_omega * std::sqrt(std::log(100.0)) * std::sqrt(1.2);
  const double v = noise_adjoint_norm(inst);
  EXPECT_LE(v, 3 * ref);
  EXPECT_GE(v, ref / 3);
}

// A*(omega) is a Gaussian matrix with entry variance ||omega||^2 / p, so its
// norm tracks sigma_omega (sqrt(n) + sqrt(m)).
TEST(NoiseAdjoint, GaussianDimensionScaling) {
  OperatorSpec spec;
  spec.kind = OperatorKind::kGaussianSensing;
  spec.p = 900;
  spec.scaling = LossScaling::kUnit;
  for (Index n : {20, 60}) {
    const RecoveryInstance inst = generate_instance(n, n, 3, spec, NoiseSpec::absolute(0.2), 5);
    const double ref = inst.sigma_omega * 2 * std::sqrt(static_cast<double>(n));
    const double v = noise_adjoint_norm(inst);
    EXPECT_GE(v, 0.7 * ref) << n;
    EXPECT_LE(v, 1.3 * ref) << n;
  }
}

TEST(NoiseAdjoint, IncludesLossScale) {
  OperatorSpec spec;
  spec.kind = OperatorKind::kGaussianSensing;
  spec.p = 100;
  const RecoveryInstance inst = generate_instance(8, 8, 2, spec, NoiseSpec::absolute(0.5), 6);
  const Matrix g = inst.op->adjoint(inst.omega) * (1.0 / 100.0);
  const double s1 = Eigen::JacobiSVD<Matrix>(g).singularValues()(0);
  EXPECT_NEAR(noise_adjoint_norm(inst), s1, 1e-12 * s1);
}

TEST(Bernoulli, ObservesMaskedEntries) {
  const OperatorPtr op = make_bernoulli_mask(6, 5, 0.4, 12);
  const Matrix mask = static_cast<const BernoulliMask&>(*op).mask();
  EXPECT_EQ(op->measurements(), static_cast<Index>(mask.sum()));
  Rng rng(8);
  const Matrix x = gaussian_matrix(6, 5, rng);
  EXPECT_EQ(op->adjoint(op->apply(x)), Matrix(mask.array() * x.array()));
}
