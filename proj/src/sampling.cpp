#include "lowrank/sampling.hpp"

#include <cmath>
#include <sstream>

#include "lowrank/kernels.hpp"
#include "lowrank/lanczos.hpp"
#include "lowrank/random.hpp"

namespace lowrank {

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::kFullObservation: return "full";
    case OperatorKind::kGaussianSensing: return "gaussian";
    case OperatorKind::kWeightedHadamard: return "weighted";
    case OperatorKind::kBernoulliMask: return "mask";
  }
  return "unknown";
}

OperatorKind operator_kind_from_string(const std::string& s) {
  if (s == "full") return OperatorKind::kFullObservation;
  if (s == "gaussian") return OperatorKind::kGaussianSensing;
  if (s == "weighted") return OperatorKind::kWeightedHadamard;
  if (s == "mask") return OperatorKind::kBernoulliMask;
  throw Error("unknown operator kind: " + s);
}

std::string to_string(LossScaling s) {
  return s == LossScaling::kPerMeasurement ? "per-measurement" : "unit";
}

LossScaling loss_scaling_from_string(const std::string& s) {
  if (s == "per-measurement") return LossScaling::kPerMeasurement;
  if (s == "unit") return LossScaling::kUnit;
  throw Error("unknown loss scaling: " + s);
}

std::string to_string(SpectrumEstimate::Method m) {
  switch (m) {
    case SpectrumEstimate::Method::kExactFullObservation: return "exact-full-observation";
    case SpectrumEstimate::Method::kExactWeighted: return "exact-weighted";
    case SpectrumEstimate::Method::kMonteCarlo: return "monte-carlo";
  }
  return "unknown";
}

SamplingOperator::SamplingOperator(Index n, Index m, Index p, double scale)
    : n_(n), m_(m), p_(p), scale_(scale) {
  if (n < 1 || m < 1) throw Error("sampling operator: dimensions must be positive");
}

double SamplingOperator::operator_norm() const {
  std::call_once(norm_once_, [this] { norm_ = compute_operator_norm(); });
  return norm_;
}

double SamplingOperator::compute_operator_norm() const {
  const Index n = rows(), m = cols();
  auto gram = [&](const Vector& v) -> Vector {
    const Matrix x = Eigen::Map<const Matrix>(v.data(), n, m);
    const Matrix g = adjoint(apply(x));
    return Eigen::Map<const Vector>(g.data(), n * m);
  };
  const EigenProbe top = lanczos_extreme(gram, n * m, SpectrumEnd::kLargest, 1e-10, 400, 0x0b5e7ULL);
  return std::sqrt(std::max(top.value, 0.0));
}

FullObservation::FullObservation(Index n, Index m) : SamplingOperator(n, m, n * m, 0.5) {}

Vector FullObservation::apply(const Matrix& x) const {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

Matrix FullObservation::adjoint(const Vector& v) const {
  return Eigen::Map<const Matrix>(v.data(), rows(), cols());
}

GaussianSensing::GaussianSensing(Index n, Index m, RowMajorMatrix a, LossScaling scaling)
    : SamplingOperator(n, m, a.rows(),
                       scaling == LossScaling::kPerMeasurement ? 0.5 / static_cast<double>(a.rows())
                                                               : 0.5),
      a_(std::move(a)),
      scaling_(scaling) {
  if (a_.cols() != n * m) throw Error("gaussian sensing: measurement width must be n*m");
}

Vector GaussianSensing::apply(const Matrix& x) const {
  Vector out(measurements());
  kernels::sensing_apply_parallel(a_.data(), a_.rows(), a_.cols(), x.data(), out.data());
  return out;
}

Matrix GaussianSensing::adjoint(const Vector& v) const {
  Matrix out(rows(), cols());
  kernels::sensing_adjoint_parallel(a_.data(), a_.rows(), a_.cols(), v.data(), out.data());
  return out;
}

WeightedHadamard::WeightedHadamard(Matrix weights)
    : SamplingOperator(weights.rows(), weights.cols(), weights.size(), 0.5), h_(std::move(weights)) {
  if (!(h_.minCoeff() > 0.0)) throw Error("weighted observation: weights must be positive");
}

Vector WeightedHadamard::apply(const Matrix& x) const {
  const Matrix hx = h_.cwiseProduct(x);
  return Eigen::Map<const Vector>(hx.data(), hx.size());
}

Matrix WeightedHadamard::adjoint(const Vector& v) const {
  return h_.cwiseProduct(Eigen::Map<const Matrix>(v.data(), rows(), cols()));
}

std::optional<std::pair<double, double>> WeightedHadamard::exact_spectrum() const {
  const double lo = h_.minCoeff(), hi = h_.maxCoeff();
  return {{lo * lo, hi * hi}};
}

namespace {

Index count_nonzero(const Matrix& mask) {
  return static_cast<Index>((mask.array() != 0.0).count());
}

}  // namespace

BernoulliMask::BernoulliMask(const Matrix& mask)
    : SamplingOperator(mask.rows(), mask.cols(), count_nonzero(mask), 0.5) {
  observed_.reserve(static_cast<size_t>(measurements()));
  for (Index k = 0; k < mask.size(); ++k)
    if (mask.data()[k] != 0.0) observed_.push_back(k);
}

Vector BernoulliMask::apply(const Matrix& x) const {
  Vector out(measurements());
  for (size_t i = 0; i < observed_.size(); ++i) out(static_cast<Index>(i)) = x.data()[observed_[i]];
  return out;
}

Matrix BernoulliMask::adjoint(const Vector& v) const {
  Matrix out = Matrix::Zero(rows(), cols());
  for (size_t i = 0; i < observed_.size(); ++i) out.data()[observed_[i]] = v(static_cast<Index>(i));
  return out;
}

Matrix BernoulliMask::mask() const {
  Matrix out = Matrix::Zero(rows(), cols());
  for (Index k : observed_) out.data()[k] = 1.0;
  return out;
}

OperatorPtr make_full_observation(Index n, Index m) {
  return std::make_shared<FullObservation>(n, m);
}

OperatorPtr make_gaussian_sensing(Index n, Index m, Index p, std::uint64_t seed,
                                  LossScaling scaling, std::size_t max_entries) {
  if (p < 1) throw Error("gaussian sensing: p must be at least 1");
  const double entries = static_cast<double>(p) * static_cast<double>(n) * static_cast<double>(m);
  if (entries > static_cast<double>(max_entries)) {
    std::ostringstream msg;
    msg << "gaussian sensing: p*n*m = " << static_cast<long long>(entries)
        << " exceeds the entry cap " << max_entries << "; raise max_entries or shrink the problem";
    throw Error(msg.str());
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(p)));
  RowMajorMatrix a(p, n * m);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < n * m; ++j) a(i, j) = normal(rng);
  return std::make_shared<GaussianSensing>(n, m, std::move(a), scaling);
}

OperatorPtr make_weighted_hadamard(const Matrix& h) { return std::make_shared<WeightedHadamard>(h); }

OperatorPtr make_bernoulli_mask(Index n, Index m, double prob, std::uint64_t seed) {
  if (!(prob > 0.0 && prob <= 1.0)) throw Error("bernoulli mask: probability must be in (0, 1]");
  Rng rng(seed);
  std::bernoulli_distribution coin(prob);
  Matrix mask(n, m);
  for (Index k = 0; k < mask.size(); ++k) mask.data()[k] = coin(rng) ? 1.0 : 0.0;
  return std::make_shared<BernoulliMask>(mask);
}

OperatorPtr make_operator(const OperatorSpec& spec, Index n, Index m, std::uint64_t seed) {
  switch (spec.kind) {
    case OperatorKind::kFullObservation:
      return make_full_observation(n, m);
    case OperatorKind::kGaussianSensing:
      return make_gaussian_sensing(n, m, spec.p, seed, spec.scaling, spec.max_entries);
    case OperatorKind::kWeightedHadamard: {
      if (!(spec.weight_lo > 0.0 && spec.weight_hi >= spec.weight_lo))
        throw Error("weighted observation: need 0 < weight_lo <= weight_hi");
      Rng rng(seed);
      std::uniform_real_distribution<double> unif(spec.weight_lo, spec.weight_hi);
      Matrix h(n, m);
      for (Index k = 0; k < h.size(); ++k) h.data()[k] = unif(rng);
      return make_weighted_hadamard(h);
    }
    case OperatorKind::kBernoulliMask:
      return make_bernoulli_mask(n, m, spec.mask_prob, seed);
  }
  throw Error("make_operator: unknown kind");
}

NoiseSpec NoiseSpec::absolute(double sigma) {
  if (!(sigma >= 0.0)) throw Error("noise: sigma must be nonnegative");
  NoiseSpec s;
  s.calibration = Calibration::kAbsolute;
  s.sigma = sigma;
  return s;
}

NoiseSpec NoiseSpec::relative(double ratio) {
  if (!(ratio >= 0.0)) throw Error("noise: ratio must be nonnegative");
  NoiseSpec s;
  s.calibration = Calibration::kRelative;
  s.ratio = ratio;
  return s;
}

RecoveryInstance generate_instance(Index n, Index m, Index rank, const OperatorSpec& spec,
                                   const NoiseSpec& noise, std::uint64_t seed) {
  if (rank < 1) throw Error("generate_instance: rank must be at least 1");
  if (4 * rank > std::min(n, m)) {
    std::ostringstream msg;
    msg << "generate_instance: need 4*rank <= min(n, m), got rank " << rank << " for " << n << "x" << m;
    throw Error(msg.str());
  }
  RecoveryInstance inst;
  inst.seed = seed;
  inst.rank = rank;
  inst.noise = noise;
  inst.op_spec = spec;

  Rng factor_rng(derive_seed(seed, 0));
  const Matrix u = gaussian_matrix(n, rank, factor_rng);
  const Matrix v = gaussian_matrix(m, rank, factor_rng);
  inst.m_star = u * v.transpose();
  if (numerical_rank(inst.m_star, 1e-10) != rank)
    throw Error("generate_instance: sampled M* is rank deficient");

  inst.op = make_operator(spec, n, m, derive_seed(seed, 1));
  const Vector signal = inst.op->apply(inst.m_star);

  Rng noise_rng(derive_seed(seed, 2));
  const Vector xi = gaussian_vector(inst.op->measurements(), noise_rng);
  double sigma = noise.sigma;
  if (noise.calibration == NoiseSpec::Calibration::kRelative) {
    const double xn = xi.norm();
    sigma = (noise.ratio == 0.0 || xn == 0.0) ? 0.0 : noise.ratio * signal.norm() / xn;
  }
  inst.sigma_omega = sigma;
  inst.omega = sigma * xi;
  inst.y = signal + inst.omega;
  return inst;
}

SpectrumEstimate estimate_restricted_spectrum(const SamplingOperator& op, Index kappa,
                                              Index trials, std::uint64_t seed) {
  if (kappa < 1 || trials < 1) throw Error("estimate_restricted_spectrum: need kappa >= 1 and trials >= 1");
  SpectrumEstimate out;
  out.rank_used = kappa;
  if (auto exact = op.exact_spectrum()) {
    out.alpha = exact->first;
    out.beta = exact->second;
    out.trials = 0;
    out.method = op.kind() == OperatorKind::kFullObservation
                     ? SpectrumEstimate::Method::kExactFullObservation
                     : SpectrumEstimate::Method::kExactWeighted;
    return out;
  }
  const Index k = std::min({kappa, op.rows(), op.cols()});
  std::vector<double> values(static_cast<size_t>(trials));
  kernels::parallel_for(trials, [&](Index t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const Matrix x = random_low_rank_unit(op.rows(), op.cols(), k, rng);
    values[static_cast<size_t>(t)] = op.apply(x).squaredNorm();
  });
  out.alpha = values[0];
  out.beta = values[0];
  for (double v : values) {
    out.alpha = std::min(out.alpha, v);
    out.beta = std::max(out.beta, v);
  }
  out.trials = trials;
  out.method = SpectrumEstimate::Method::kMonteCarlo;
  return out;
}

SpectrumEstimate hessian_moduli(const SpectrumEstimate& s, double loss_scale) {
  SpectrumEstimate out = s;
  out.alpha *= 2.0 * loss_scale;
  out.beta *= 2.0 * loss_scale;
  return out;
}

double noise_adjoint_norm(const RecoveryInstance& inst) {
  if (inst.omega.size() == 0 || inst.omega.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const Matrix g = inst.op->adjoint(inst.omega);
  return 2.0 * inst.op->loss_scale() * thin_svd(g).singulars(0);
}

}  // namespace lowrank
