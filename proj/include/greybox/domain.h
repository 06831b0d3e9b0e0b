#pragma once

#include "greybox/types.h"

namespace greybox {

/// Axis-aligned box [lower, upper] in R^d.
class SearchDomain {
 public:
  SearchDomain(Vector lower, Vector upper);

  static SearchDomain unit(int d);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  bool contains(ConstPoint x) const;
  Vector project(ConstPoint x) const;

  /// Affine maps between the box and the unit cube.
  Vector to_unit(ConstPoint x) const;
  Vector from_unit(ConstPoint u) const;

 private:
  Vector lower_;
  Vector upper_;
};

}  // namespace greybox
