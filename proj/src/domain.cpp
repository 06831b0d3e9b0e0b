#include "greybox/domain.h"

#include <stdexcept>

namespace greybox {

SearchDomain::SearchDomain(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() < 1) throw std::invalid_argument("SearchDomain: dimension must be >= 1");
  if (lower_.size() != upper_.size())
    throw std::invalid_argument("SearchDomain: lower/upper size mismatch");
  for (Eigen::Index i = 0; i < lower_.size(); ++i)
    if (!(lower_(i) < upper_(i)))
      throw std::invalid_argument("SearchDomain: lower must be strictly below upper");
}

SearchDomain SearchDomain::unit(int d) { return {Vector::Zero(d), Vector::Ones(d)}; }

bool SearchDomain::contains(ConstPoint x) const {
  if (x.size() != lower_.size()) return false;
  return (x.array() >= lower_.array()).all() && (x.array() <= upper_.array()).all();
}

Vector SearchDomain::project(ConstPoint x) const { return x.cwiseMax(lower_).cwiseMin(upper_); }

Vector SearchDomain::to_unit(ConstPoint x) const {
  return ((x - lower_).array() / (upper_ - lower_).array()).matrix();
}

Vector SearchDomain::from_unit(ConstPoint u) const {
  return (lower_.array() + u.array() * (upper_ - lower_).array()).matrix();
}

}  // namespace greybox
