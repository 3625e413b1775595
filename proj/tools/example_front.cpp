// Minimal library use: simulate the logistic benchmark and compare the fitted front speed with c*.
#include <cstdio>

#include "dlat/dispersion.hpp"
#include "dlat/simulator.hpp"
#include "dlat/spreading.hpp"

int main() {
    const dlat::LatticeModel model(1.0, 1.0, dlat::Nonlinearity::logistic(1.0, 0.5));
    const double c_star = dlat::compute_cstar(model.D, model.linearization_rate()).c_star;

    dlat::SimulationOptions opt;
    opt.T = 100.0;
    opt.N = 300;
    opt.stride = 10;
    opt.speed_bound = 1.25 * c_star;
    const auto traj = dlat::simulate(model, dlat::InitialData::bump(2, 0.5), opt);

    const double E = dlat::equilibrium(model.g);
    const auto fit = dlat::estimate_speed(dlat::track_front(traj, 0.5 * E));
    std::printf("c* = %.6f  fitted = %.6f  r^2 = %.6f\n", c_star, fit.speed, fit.r_squared);
}
