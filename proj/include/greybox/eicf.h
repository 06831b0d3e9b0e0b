#pragma once

#include "greybox/acquisition.h"
#include "greybox/mogp.h"
#include "greybox/types.h"

namespace greybox {

/// Monte Carlo EI for a composite objective g(h(x)) with fixed draws z (k x M):
/// the sample mean and standard error of {g(mu_n(x) + C_n(x) z_m) - best}^+.
Estimate eicf_value(const MoGpPosterior& post, const OuterFunction& g, const Incumbent& incumbent,
                    ConstPoint x, const Matrix& z);

/// One draw of the gradient estimator: grad_x g(mu_n(x) + C_n(x) z) when the
/// improvement is positive, otherwise zero.
Vector eicf_gradient_sample(const MoGpPosterior& post, const OuterFunction& g, const Incumbent& incumbent,
                            ConstPoint x, const Vector& z);

/// Sample-average EI-CF with fixed draws and its exact gradient (the average of
/// the per-draw estimators). Deterministic in (post, x, z).
double eicf_saa(const MoGpPosterior& post, const OuterFunction& g, const Incumbent& incumbent,
                ConstPoint x, const Matrix& z, Vector* grad = nullptr);

}  // namespace greybox
