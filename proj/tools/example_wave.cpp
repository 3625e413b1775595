// Minimal library use: a travelling wave above c* and a few samples of its profile.
#include <cstdio>

#include "dlat/waves.hpp"

int main() {
    const dlat::LatticeModel model(1.0, 1.0, dlat::Nonlinearity::logistic(1.0, 0.5));
    const double c = 1.2 * dlat::compute_cstar(model.D, model.linearization_rate()).c_star;
    const auto p = dlat::solve_profile(c, model);

    std::printf("c = %.6f  method = %s  residual = %.2e\n", c, p.method.c_str(), p.residual_sup);
    for (double xi = -10.0; xi <= 10.0; xi += 2.5) std::printf("phi(%5.1f) = %.10f\n", xi, p(xi));
}
