#pragma once

#include <cstdint>
#include <functional>

#include "greybox/kernel.h"
#include "greybox/types.h"

namespace greybox {

class GpPosterior;

/// Caps OpenMP parallelism; 0 restores the runtime default.
void set_thread_count(int threads);
/// Reads GREYBOX_BO_THREADS (0 or unset = auto) and applies it.
void apply_thread_env();

struct BatchPrediction {
  Vector mean;
  Vector variance;
};

// Each output entry is computed independently with a fixed operation order, so
// the parallel and serial variants agree bit-for-bit regardless of thread count.

namespace parallel {
Matrix gram(const Kernel& kernel, const PointSet& x);
Matrix cross_gram(const Kernel& kernel, const PointSet& a, const PointSet& b);
Vector evaluate(const std::function<double(ConstPoint)>& fn, const PointSet& points);
BatchPrediction predict(const GpPosterior& gp, const PointSet& points);
}  // namespace parallel

namespace serial {
Matrix gram(const Kernel& kernel, const PointSet& x);
Matrix cross_gram(const Kernel& kernel, const PointSet& a, const PointSet& b);
Vector evaluate(const std::function<double(ConstPoint)>& fn, const PointSet& points);
BatchPrediction predict(const GpPosterior& gp, const PointSet& points);
}  // namespace serial

/// Index of the largest entry; ties resolve to the lowest index. NaNs are skipped.
Eigen::Index argmax_lowest(const Vector& values);

/// Maximum of fn over a uniform grid of n points on [lo, hi] (1-d scans for oracles).
struct GridMax {
  double x;
  double value;
};
GridMax grid_max_1d(const std::function<double(double)>& fn, double lo, double hi, int n);

}  // namespace greybox
