#include "greybox/batch.h"

#include <cmath>
#include <cstdlib>
#include <string>

#include <omp.h>

#include "greybox/gp.h"

namespace greybox {

void set_thread_count(int threads) {
  if (threads > 0) {
    omp_set_num_threads(threads);
  } else {
    omp_set_num_threads(omp_get_num_procs());
  }
}

void apply_thread_env() {
  const char* env = std::getenv("GREYBOX_BO_THREADS");
  if (env == nullptr || *env == '\0') return;
  set_thread_count(std::atoi(env));
}

namespace parallel {

Matrix gram(const Kernel& kernel, const PointSet& x) {
  const Eigen::Index n = x.cols();
  Matrix k(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = kernel(x.col(i), x.col(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Matrix cross_gram(const Kernel& kernel, const PointSet& a, const PointSet& b) {
  Matrix k(a.cols(), b.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = 0; i < a.cols(); ++i) k(i, j) = kernel(a.col(i), b.col(j));
  return k;
}

Vector evaluate(const std::function<double(ConstPoint)>& fn, const PointSet& points) {
  Vector out(points.cols());
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index j = 0; j < points.cols(); ++j) out(j) = fn(points.col(j));
  return out;
}

BatchPrediction predict(const GpPosterior& gp, const PointSet& points) {
  BatchPrediction out{Vector(points.cols()), Vector(points.cols())};
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    out.mean(j) = gp.mean(points.col(j));
    out.variance(j) = gp.variance(points.col(j));
  }
  return out;
}

}  // namespace parallel

namespace serial {

Matrix gram(const Kernel& kernel, const PointSet& x) {
  const Eigen::Index n = x.cols();
  Matrix k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = kernel(x.col(i), x.col(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Matrix cross_gram(const Kernel& kernel, const PointSet& a, const PointSet& b) {
  Matrix k(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = 0; i < a.cols(); ++i) k(i, j) = kernel(a.col(i), b.col(j));
  return k;
}

Vector evaluate(const std::function<double(ConstPoint)>& fn, const PointSet& points) {
  Vector out(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) out(j) = fn(points.col(j));
  return out;
}

BatchPrediction predict(const GpPosterior& gp, const PointSet& points) {
  BatchPrediction out{Vector(points.cols()), Vector(points.cols())};
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    out.mean(j) = gp.mean(points.col(j));
    out.variance(j) = gp.variance(points.col(j));
  }
  return out;
}

}  // namespace serial

Eigen::Index argmax_lowest(const Vector& values) {
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (std::isnan(values(i))) continue;
    if (best < 0 || values(i) > values(best)) best = i;
  }
  return best < 0 ? 0 : best;
}

GridMax grid_max_1d(const std::function<double(double)>& fn, double lo, double hi, int n) {
  PointSet grid(1, n);
  for (int i = 0; i < n; ++i) grid(0, i) = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  const Vector values = parallel::evaluate([&](ConstPoint x) { return fn(x(0)); }, grid);
  const Eigen::Index best = argmax_lowest(values);
  return {grid(0, best), values(best)};
}

}  // namespace greybox
