#include "greybox/normal.h"

#include <cmath>
#include <numbers>

namespace greybox {

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_excess(double z) { return z * normal_cdf(z) + normal_pdf(z); }

}  // namespace greybox
