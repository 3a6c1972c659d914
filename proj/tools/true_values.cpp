// Prints the quadrature truth values used by the simulation studies:
// target values, efficiency bounds, and both readings of the density
// study's scale parameter. Run before trusting any study output.

#include <cstdio>

#include "hal/sim.hpp"

int main() {
  for (hal::DgpKind kind : {hal::DgpKind::ate_sim61, hal::DgpKind::density_sim62,
                            hal::DgpKind::custom_null}) {
    const hal::TrueValues t = hal::true_values(kind);
    std::printf("%s:\n", hal::dgp_name(kind).c_str());
    std::printf("  psi0              = %.12g\n", t.psi0);
    std::printf("  efficiency_bound  = %.12g\n", t.efficiency_bound);
    if (kind == hal::DgpKind::density_sim62) {
      std::printf("  sigma2 (variance reading, used) = %.12g\n",
                  t.density_sigma2);
      std::printf("  psi0 under the sd reading       = %.12g\n", t.psi0_alt);
    }
  }
  return 0;
}
