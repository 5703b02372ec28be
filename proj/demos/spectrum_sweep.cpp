// Sweeps a constant rotation coefficient through the asymptotic loop operator
// and prints, for each rotation number, the spectral gap around zero, the
// largest admissible exponential weight, and the index of the corresponding
// rotation path.  The gap closes at integer rotation numbers, where the index
// jumps by two.

#include <cmath>
#include <cstdio>
#include <vector>

#include <Eigen/Dense>

#include "scglue/operators.hpp"

using namespace scglue;

namespace {

SymplecticPath rotation_path(double turns, int M) {
    std::vector<Eigen::MatrixXd> samples;
    samples.reserve(M);
    for (int i = 0; i < M; ++i) {
        const double ang = 2.0 * M_PI * turns * i / (M - 1);
        Eigen::MatrixXd P(2, 2);
        P << std::cos(ang), -std::sin(ang), std::sin(ang), std::cos(ang);
        samples.push_back(std::move(P));
    }
    return SymplecticPath(1, std::move(samples));
}

}  // namespace

int main() {
    const int nt = 40, K = 8, M = 1025;  // fine path sampling resolves ~3 turns
    std::printf("a,gap_lo,gap_hi,admissible_weight,cz_index\n");
    for (int step = 1; step <= 29; ++step) {
        const double a = 0.1 * step;
        if (std::abs(a - std::round(a)) < 1e-9) continue;  // gap closed, path degenerate
        const Eigen::MatrixXd S = 2.0 * M_PI * a * Eigen::MatrixXd::Identity(2, 2);
        const auto spec = asymptotic_spectrum(constant_loop_operator(1, nt, S), K);
        const auto weight = admissible_weight(spec);
        const int mu = conley_zehnder(rotation_path(a, M));
        std::printf("%.1f,%.6f,%.6f,%.6f,%d\n", a, spec.gap_lo, spec.gap_hi,
                    weight ? *weight : 0.0, mu);
    }
    return 0;
}
