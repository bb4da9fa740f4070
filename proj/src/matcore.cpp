#include "lowrank/matcore.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace lowrank {

Index SvdResult::rank(double tau) const {
  if (singulars.size() == 0 || !(singulars(0) > 0.0)) return 0;
  const double cut = tau * singulars(0);
  Index k = 0;
  for (Index i = 0; i < singulars.size(); ++i)
    if (singulars(i) > cut) ++k;
  return k;
}

SvdResult thin_svd(const Matrix& x) {
  if (!x.allFinite()) throw Error("thin_svd: input has non-finite entries");
  SvdResult out;
  const Index k = std::min(x.rows(), x.cols());
  if (k == 0) {
    out.left.resize(x.rows(), 0);
    out.right.resize(x.cols(), 0);
    out.singulars.resize(0);
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "thin_svd: SVD did not converge on a " << x.rows() << "x" << x.cols()
        << " matrix (status " << static_cast<int>(svd.info()) << ")";
    throw Error(msg.str());
  }
  out.left = svd.matrixU();
  out.right = svd.matrixV();
  out.singulars = svd.singularValues();
  for (Index j = 0; j < k; ++j) {
    Index imax = 0;
    out.left.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.left(imax, j) < 0.0) {
      out.left.col(j) *= -1.0;
      out.right.col(j) *= -1.0;
    }
  }
  return out;
}

Index numerical_rank(const Matrix& x, double tau) {
  return thin_svd(x).rank(tau);
}

Index factor_rank(const Matrix& u, double tau) {
  const Vector s = thin_svd(u).singulars;
  if (s.size() == 0 || !(s(0) > 0.0)) return 0;
  const double cut = tau * s(0) * s(0);
  Index k = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) * s(i) > cut) ++k;
  return k;
}

FactorPair::FactorPair(Matrix u, Matrix v) : U(std::move(u)), V(std::move(v)) {
  if (U.cols() != V.cols())
    throw Error("FactorPair: U and V must have the same number of columns");
}

FactorPair FactorPair::zeros(Index n, Index m, Index r) {
  return FactorPair(Matrix::Zero(n, r), Matrix::Zero(m, r));
}

FactorPair& FactorPair::operator+=(const FactorPair& o) {
  U += o.U;
  V += o.V;
  return *this;
}

FactorPair& FactorPair::operator-=(const FactorPair& o) {
  U -= o.U;
  V -= o.V;
  return *this;
}

FactorPair& FactorPair::operator*=(double s) {
  U *= s;
  V *= s;
  return *this;
}

FactorPair operator+(FactorPair a, const FactorPair& b) { return a += b; }
FactorPair operator-(FactorPair a, const FactorPair& b) { return a -= b; }
FactorPair operator*(double s, FactorPair a) { return a *= s; }

double inner(const FactorPair& a, const FactorPair& b) {
  return (a.U.array() * b.U.array()).sum() + (a.V.array() * b.V.array()).sum();
}

Matrix stack(const FactorPair& fp) {
  Matrix w(fp.n() + fp.m(), fp.r());
  w << fp.U, fp.V;
  return w;
}

Matrix stack_hat(const FactorPair& fp) {
  Matrix w(fp.n() + fp.m(), fp.r());
  w << fp.U, -fp.V;
  return w;
}

FactorPair unstack(const Matrix& w, Index n) {
  if (n < 0 || n > w.rows()) throw Error("unstack: split point out of range");
  return FactorPair(w.topRows(n), w.bottomRows(w.rows() - n));
}

namespace {

void check_split(const Matrix& a, Index n) {
  if (a.rows() != a.cols()) throw Error("block projection: matrix must be square");
  if (n < 0 || n > a.rows()) throw Error("block projection: split point out of range");
}

}  // namespace

Matrix p_on(const Matrix& a, Index n) {
  check_split(a, n);
  const Index m = a.rows() - n;
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  out.topLeftCorner(n, n) = a.topLeftCorner(n, n);
  out.bottomRightCorner(m, m) = a.bottomRightCorner(m, m);
  return out;
}

Matrix p_off(const Matrix& a, Index n) {
  check_split(a, n);
  const Index m = a.rows() - n;
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  out.topRightCorner(n, m) = a.topRightCorner(n, m);
  out.bottomLeftCorner(m, n) = a.bottomLeftCorner(m, n);
  return out;
}

ProcrustesResult procrustes(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error("procrustes: A and B must have the same shape");
  const SvdResult s = thin_svd(b.transpose() * a);
  ProcrustesResult out;
  out.rotation = s.left * s.right.transpose();
  out.distance = (a - b * out.rotation).norm();
  return out;
}

double spectral_norm(const Matrix& x, double tol) {
  if (x.size() == 0 || x.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  std::mt19937_64 gen(0x5eed5eedULL);
  std::normal_distribution<double> normal;
  Vector v(x.cols());
  for (Index i = 0; i < v.size(); ++i) v(i) = normal(gen);
  v.normalize();
  double mu = 0.0;
  const int max_iter = 100000;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = x.transpose() * (x * v);
    const double mu_next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    // Rayleigh quotient error is quadratic in the eigenvector error, so stop
    // once successive estimates agree well below the requested tolerance.
    if (it > 0 && std::abs(mu_next - mu) <= 1e-3 * tol * mu_next) {
      mu = mu_next;
      break;
    }
    mu = mu_next;
  }
  return std::sqrt(std::max(mu, 0.0));
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_matrix(std::ostream& os, const Matrix& x) {
  os << x.rows() << ' ' << x.cols() << '\n';
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (j) os << ' ';
      os << format_double(x(i, j));
    }
    os << '\n';
  }
}

Matrix read_matrix(std::istream& is) {
  Index rows = -1, cols = -1;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0)
    throw Error("read_matrix: malformed header");
  Matrix x(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (!(is >> x(i, j))) throw Error("read_matrix: truncated data");
  return x;
}

void write_vector(std::ostream& os, const Vector& v) {
  os << v.size() << '\n';
  for (Index i = 0; i < v.size(); ++i) os << format_double(v(i)) << '\n';
}

Vector read_vector(std::istream& is) {
  Index n = -1;
  if (!(is >> n) || n < 0) throw Error("read_vector: malformed header");
  Vector v(n);
  for (Index i = 0; i < n; ++i)
    if (!(is >> v(i))) throw Error("read_vector: truncated data");
  return v;
}

void save_matrix(const std::string& path, const Matrix& x) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_matrix(os, x);
  if (!os) throw Error("write failed: " + path);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  return read_matrix(is);
}

void save_vector(const std::string& path, const Vector& v) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_vector(os, v);
  if (!os) throw Error("write failed: " + path);
}

Vector load_vector(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  return read_vector(is);
}

}  // namespace lowrank
