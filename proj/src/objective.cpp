#include "lowrank/objective.hpp"

#include <algorithm>
#include <cmath>

#include "lowrank/lanczos.hpp"
#include "lowrank/random.hpp"

namespace lowrank {

double Loss::value_and_grad(const Matrix& x, Matrix* g) const {
  *g = grad(x);
  return value(x);
}

double Loss::hess_quadform(const Matrix& x, const Matrix& h) const {
  return (h.array() * hess_apply(x, h).array()).sum();
}

LeastSquaresLoss::LeastSquaresLoss(OperatorPtr op, Vector y) : op_(std::move(op)), y_(std::move(y)) {
  if (!op_) throw Error("LeastSquaresLoss: null operator");
  if (y_.size() != op_->measurements())
    throw Error("LeastSquaresLoss: observation length does not match the operator");
}

double LeastSquaresLoss::value(const Matrix& x) const {
  return scale() * (op_->apply(x) - y_).squaredNorm();
}

Matrix LeastSquaresLoss::grad(const Matrix& x) const {
  return (2.0 * scale()) * op_->adjoint(op_->apply(x) - y_);
}

double LeastSquaresLoss::value_and_grad(const Matrix& x, Matrix* g) const {
  const Vector res = op_->apply(x) - y_;
  *g = (2.0 * scale()) * op_->adjoint(res);
  return scale() * res.squaredNorm();
}

Matrix LeastSquaresLoss::hess_apply(const Matrix&, const Matrix& h) const {
  return (2.0 * scale()) * op_->adjoint(op_->apply(h));
}

double LeastSquaresLoss::hess_quadform(const Matrix&, const Matrix& h) const { return hess_quadform(h); }

double LeastSquaresLoss::hess_quadform(const Matrix& h) const {
  return 2.0 * scale() * op_->apply(h).squaredNorm();
}

double LeastSquaresLoss::hess_bilinear(const Matrix& y, const Matrix& z) const {
  return 2.0 * scale() * op_->apply(y).dot(op_->apply(z));
}

std::shared_ptr<const LeastSquaresLoss> make_loss(const RecoveryInstance& inst) {
  return std::make_shared<LeastSquaresLoss>(inst.op, inst.y);
}

std::shared_ptr<const LeastSquaresLoss> make_full_observation_loss(const Matrix& m) {
  return std::make_shared<LeastSquaresLoss>(make_full_observation(m.rows(), m.cols()),
                                            Eigen::Map<const Vector>(m.data(), m.size()));
}

double f_value(const Loss& loss, const Matrix& x) { return loss.value(x); }
Matrix f_grad(const Loss& loss, const Matrix& x) { return loss.grad(x); }
double hess_quadform_f(const LeastSquaresLoss& loss, const Matrix& h) { return loss.hess_quadform(h); }

RegularizedObjective::RegularizedObjective(LossPtr l, double lam, Index rank)
    : loss(std::move(l)), lambda(lam), r(rank) {
  if (!loss) throw Error("RegularizedObjective: null loss");
  if (!(lambda > 0.0)) throw Error("RegularizedObjective: lambda must be positive");
  if (r < 1) throw Error("RegularizedObjective: rank must be at least 1");
}

Matrix xi_matrix(const Loss& loss, const Matrix& x, double lambda) {
  const Index n = x.rows(), m = x.cols();
  const Matrix g = loss.grad(x);
  Matrix xi = Matrix::Zero(n + m, n + m);
  xi.topLeftCorner(n, n).diagonal().setConstant(lambda);
  xi.bottomRightCorner(m, m).diagonal().setConstant(lambda);
  xi.topRightCorner(n, m) = g;
  xi.bottomLeftCorner(m, n) = g.transpose();
  return xi;
}

double xi_norm(const Loss& loss, const Matrix& x, double lambda) {
  const Matrix g = loss.grad(x);
  const double gn = g.cwiseAbs().maxCoeff() == 0.0 ? 0.0 : thin_svd(g).singulars(0);
  return std::abs(lambda) + gn;
}

namespace {

void check_shapes(const RegularizedObjective& obj, const FactorPair& fp) {
  if (fp.n() != obj.n() || fp.m() != obj.m())
    throw Error("factor pair shape does not match the objective");
}

}  // namespace

double phi_value(const RegularizedObjective& obj, const FactorPair& fp) {
  check_shapes(obj, fp);
  return obj.loss->value(fp.product()) + 0.5 * obj.lambda * fp.squared_norm();
}

double phi_value_and_grad(const RegularizedObjective& obj, const FactorPair& fp, FactorPair* out) {
  check_shapes(obj, fp);
  Matrix g;
  const double f = obj.loss->value_and_grad(fp.product(), &g);
  out->U = g * fp.V + obj.lambda * fp.U;
  out->V = g.transpose() * fp.U + obj.lambda * fp.V;
  return f + 0.5 * obj.lambda * fp.squared_norm();
}

FactorPair phi_grad(const RegularizedObjective& obj, const FactorPair& fp) {
  FactorPair g;
  phi_value_and_grad(obj, fp, &g);
  return g;
}

FactorPair phi_hess_apply(const RegularizedObjective& obj, const FactorPair& fp,
                          const FactorPair& dir) {
  check_shapes(obj, fp);
  const Matrix x = fp.product();
  const Matrix g = obj.loss->grad(x);
  const Matrix h = fp.U * dir.V.transpose() + dir.U * fp.V.transpose();
  const Matrix d = obj.loss->hess_apply(x, h);
  return FactorPair(d * fp.V + g * dir.V + obj.lambda * dir.U,
                    d.transpose() * fp.U + g.transpose() * dir.U + obj.lambda * dir.V);
}

double phi_hess_quadform(const RegularizedObjective& obj, const FactorPair& fp,
                         const FactorPair& dir) {
  check_shapes(obj, fp);
  const Matrix x = fp.product();
  const Matrix g = obj.loss->grad(x);
  const Matrix h = fp.U * dir.V.transpose() + dir.U * fp.V.transpose();
  const double cross = (g.array() * (dir.U * dir.V.transpose()).array()).sum();
  return obj.loss->hess_quadform(x, h) + 2.0 * cross + obj.lambda * dir.squared_norm();
}

Vector flatten(const FactorPair& fp) {
  Vector v(fp.U.size() + fp.V.size());
  v.head(fp.U.size()) = Eigen::Map<const Vector>(fp.U.data(), fp.U.size());
  v.tail(fp.V.size()) = Eigen::Map<const Vector>(fp.V.data(), fp.V.size());
  return v;
}

FactorPair unflatten(const Vector& v, Index n, Index m, Index r) {
  if (v.size() != (n + m) * r) throw Error("unflatten: length mismatch");
  return FactorPair(Eigen::Map<const Matrix>(v.data(), n, r),
                    Eigen::Map<const Matrix>(v.data() + n * r, m, r));
}

namespace {

// Hessian-vector product with the base-point quantities computed once.
class HessianMap {
 public:
  HessianMap(const RegularizedObjective& obj, const FactorPair& fp)
      : obj_(obj), fp_(fp), x_(fp.product()), g_(obj.loss->grad(x_)) {}

  Vector operator()(const Vector& v) const {
    const FactorPair dir = unflatten(v, fp_.n(), fp_.m(), fp_.r());
    const Matrix h = fp_.U * dir.V.transpose() + dir.U * fp_.V.transpose();
    const Matrix d = obj_.loss->hess_apply(x_, h);
    return flatten(FactorPair(d * fp_.V + g_ * dir.V + obj_.lambda * dir.U,
                              d.transpose() * fp_.U + g_.transpose() * dir.U + obj_.lambda * dir.V));
  }

  const Matrix& grad_f() const { return g_; }

 private:
  const RegularizedObjective& obj_;
  const FactorPair& fp_;
  Matrix x_;
  Matrix g_;
};

}  // namespace

Matrix dense_hessian(const RegularizedObjective& obj, const FactorPair& fp) {
  check_shapes(obj, fp);
  const Index dim = (fp.n() + fp.m()) * fp.r();
  if (dim > kDenseHessianCap) throw Error("dense_hessian: too many variables for dense assembly");
  const HessianMap hv(obj, fp);
  Matrix h(dim, dim);
  for (Index i = 0; i < dim; ++i) h.col(i) = hv(Vector::Unit(dim, i));
  return 0.5 * (h + h.transpose());
}

HessianProbe min_eig_hessian(const RegularizedObjective& obj, const FactorPair& fp, double tol,
                             int max_iter) {
  check_shapes(obj, fp);
  if (!(tol > 0.0)) throw Error("min_eig_hessian: tol must be positive");
  const HessianMap hv(obj, fp);
  const Index dim = (fp.n() + fp.m()) * fp.r();
  const EigenProbe e = lanczos_extreme([&](const Vector& v) { return hv(v); }, dim,
                                       SpectrumEnd::kSmallest, tol, max_iter, 0x4e55ULL);
  HessianProbe out;
  out.min_eig = e.value;
  out.direction = unflatten(e.vector, fp.n(), fp.m(), fp.r());
  out.norm_estimate = e.norm_estimate;
  out.residual = e.residual;
  out.iterations = e.iterations;
  out.converged = e.converged;
  return out;
}

bool hessian_psd(const HessianProbe& probe, double lambda, double grad_norm) {
  return probe.min_eig >= -1e-6 * (lambda + grad_norm);
}

namespace {

void check_orthogonal(const Matrix& p, const char* name) {
  if (p.rows() != p.cols())
    throw Error(std::string("rotate_frame: ") + name + " must be square");
  const double err = (p.transpose() * p - Matrix::Identity(p.rows(), p.cols())).cwiseAbs().maxCoeff();
  if (err > 1e-10) throw Error(std::string("rotate_frame: ") + name + " is not orthogonal");
}

}  // namespace

FactorPair rotate_frame(const FactorPair& fp, const Matrix& p, const Matrix& q,
                        FrameDirection direction) {
  check_orthogonal(p, "P");
  check_orthogonal(q, "Q");
  if (p.rows() != fp.n() || q.rows() != fp.m()) throw Error("rotate_frame: dimension mismatch");
  if (direction == FrameDirection::kToDiagonal)
    return FactorPair(p.transpose() * fp.U, q.transpose() * fp.V);
  return FactorPair(p * fp.U, q * fp.V);
}

DiagonalObjective::DiagonalObjective(Vector s, Index rows, Index cols, double lam, Index rank)
    : sigma(std::move(s)), n(rows), m(cols), lambda(lam), r(rank) {
  if (sigma.size() != std::min(n, m)) throw Error("DiagonalObjective: sigma length must be min(n, m)");
  if (r < 1 || r > std::min(n, m)) throw Error("DiagonalObjective: rank out of range");
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) < 0.0) throw Error("DiagonalObjective: negative diagonal entry");
    if (i > 0 && sigma(i) > sigma(i - 1)) throw Error("DiagonalObjective: diagonal must be nonincreasing");
  }
}

Matrix DiagonalObjective::sigma_matrix() const {
  Matrix s = Matrix::Zero(n, m);
  for (Index i = 0; i < sigma.size(); ++i) s(i, i) = sigma(i);
  return s;
}

std::vector<double> DiagonalObjective::distinct_top_values(double rel_tol) const {
  std::vector<double> out;
  const double scale = std::max(sigma.size() ? sigma(0) : 0.0, 1e-300);
  for (Index i = 0; i < r; ++i)
    if (out.empty() || out.back() - sigma(i) > rel_tol * scale) out.push_back(sigma(i));
  return out;
}

RegularizedObjective DiagonalObjective::objective() const {
  return RegularizedObjective(make_full_observation_loss(sigma_matrix()), lambda, r);
}

Check restricted_isometry_audit(const LeastSquaresLoss& loss, const SpectrumEstimate& op_spectrum,
                                Index kappa, Index samples, std::uint64_t seed) {
  Check c;
  c.id = "restricted-isometry.hessian";
  const SpectrumEstimate mod = hessian_moduli(op_spectrum, loss.scale());
  c.premise("spectrum-exact", op_spectrum.exact(), op_spectrum.exact() ? 1.0 : 0.0,
            to_string(op_spectrum.method));
  c.premise("moduli-positive", mod.alpha > 0.0 && mod.beta >= mod.alpha, mod.alpha);
  const double a = mod.alpha, b = mod.beta;
  const Index k = std::min({kappa, loss.rows(), loss.cols()});
  double worst = -std::numeric_limits<double>::infinity();
  double worst_lhs = 0.0, worst_rhs = 0.0;
  for (Index t = 0; t < samples; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const Matrix y = random_low_rank_unit(loss.rows(), loss.cols(), k, rng);
    const Matrix z = random_low_rank_unit(loss.rows(), loss.cols(), k, rng);
    const double lhs = std::abs(2.0 / (a + b) * loss.hess_bilinear(y, z) - (y.array() * z.array()).sum());
    const double rhs = (b - a) / (a + b) * y.norm() * z.norm();
    if (lhs - rhs > worst) {
      worst = lhs - rhs;
      worst_lhs = lhs;
      worst_rhs = rhs;
    }
  }
  c.lhs = worst_lhs;
  c.rhs = worst_rhs;
  c.tolerance = 1e-12;
  c.metrics["samples"] = static_cast<double>(samples);
  c.metrics["alpha"] = a;
  c.metrics["beta"] = b;
  c.notes = "worst sampled pair reported";
  c.finalize();
  return c;
}

}  // namespace lowrank
