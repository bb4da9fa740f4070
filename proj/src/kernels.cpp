#include "lowrank/kernels.hpp"

#include <cstdlib>
#include <exception>
#include <vector>

#include <omp.h>

namespace lowrank::kernels {

namespace {

using RowMap = Eigen::Map<const Eigen::VectorXd>;

constexpr Index kAdjointChunk = 512;

inline double row_dot(const double* a, Index d, Index i, const double* x) {
  return RowMap(a + i * d, d).dot(RowMap(x, d));
}

inline void adjoint_chunk(const double* a, Index p, Index d, const double* v,
                          double* out, Index j0, Index j1) {
  Eigen::Map<Eigen::VectorXd> o(out + j0, j1 - j0);
  o.setZero();
  for (Index i = 0; i < p; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    o += vi * RowMap(a + i * d + j0, j1 - j0);
  }
}

}  // namespace

void sensing_apply_serial(const double* a, Index p, Index d, const double* x,
                          double* out) {
  for (Index i = 0; i < p; ++i) out[i] = row_dot(a, d, i, x);
}

void sensing_apply_parallel(const double* a, Index p, Index d, const double* x,
                            double* out) {
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < p; ++i) out[i] = row_dot(a, d, i, x);
}

void sensing_adjoint_serial(const double* a, Index p, Index d, const double* v,
                            double* out) {
  adjoint_chunk(a, p, d, v, out, 0, d);
}

void sensing_adjoint_parallel(const double* a, Index p, Index d,
                              const double* v, double* out) {
  const Index chunks = (d + kAdjointChunk - 1) / kAdjointChunk;
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < chunks; ++c) {
    const Index j0 = c * kAdjointChunk;
    const Index j1 = std::min(d, j0 + kAdjointChunk);
    adjoint_chunk(a, p, d, v, out, j0, j1);
  }
}

void parallel_for(Index n, const std::function<void(Index)>& body) {
  std::vector<std::exception_ptr> errors(static_cast<size_t>(std::max<Index>(n, 0)));
#pragma omp parallel for schedule(dynamic, 1)
  for (Index i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void serial_for(Index n, const std::function<void(Index)>& body) {
  for (Index i = 0; i < n; ++i) body(i);
}

int worker_threads() { return omp_get_max_threads(); }

void set_worker_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int threads_from_env() {
  const char* s = std::getenv("LOWRANK_THREADS");
  if (!s) return 0;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (end == s || v <= 0 || v > 4096) return 0;
  return static_cast<int>(v);
}

}  // namespace lowrank::kernels
