// Prints the squeezing curve at the default device parameters.

#include <cstdio>

#include "magsq/magsq.hpp"

int main() {
    using namespace magsq;
    const DeviceParams p;
    const auto c = dispersive_coefficients(p);
    std::printf("self-Kerr delta/2pi = %.4f MHz, chi/2pi = %.4f MHz\n", angular_to_hz(c.delta) / 1e6,
                angular_to_hz(c.chi) / 1e6);

    const auto traj = run_squeezing_sweep(p, {0.0, 50e-9, 100e-9, 150e-9, 200e-9, 250e-9});
    std::printf("%8s %8s %8s %8s %8s\n", "tau[ns]", "V_min", "V_max", "<n>", "dB");
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const auto s = summarize(traj.states[i]);
        std::printf("%8.0f %8.4f %8.4f %8.4f %8.3f\n", traj.times[i] * 1e9, s.v_min, s.v_max, s.mean_n,
                    squeezing_db(s.v_min));
    }
}
