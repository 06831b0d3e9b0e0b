#pragma once

namespace greybox {

double normal_pdf(double z);
double normal_cdf(double z);
/// z * Phi(z) + phi(z), the expected positive part E[(z + Z)^+] for standard normal Z.
double normal_excess(double z);

}  // namespace greybox
