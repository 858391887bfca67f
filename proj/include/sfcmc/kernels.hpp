#pragma once

// Data-parallel inner loops. Every kernel has a serial reference version and
// an OpenMP version; both produce bit-identical results because each output
// element is accumulated by exactly one thread in a fixed order.

#include <cstddef>
#include <span>
#include <vector>

namespace sfcmc {

enum class Execution { Serial, Parallel };

namespace kernels {

// out[j] = trapezoid approximation of \int_0^{x_j} a(x) b(x_j - x) dx on a
// uniform grid with spacing h; out[0] = 0.
void trapezoid_convolution_serial(std::span<const double> a, std::span<const double> b, double h, std::span<double> out);
void trapezoid_convolution_parallel(std::span<const double> a, std::span<const double> b, double h,
                                    std::span<double> out);

inline void trapezoid_convolution(std::span<const double> a, std::span<const double> b, double h, std::span<double> out,
                                  Execution exec) {
    if (exec == Execution::Parallel)
        trapezoid_convolution_parallel(a, b, h, out);
    else
        trapezoid_convolution_serial(a, b, h, out);
}

// Per-row max_i x_i / sum_i x_i of a row-major (rows x cols) block.
void max_share_serial(std::span<const double> rows, std::size_t cols, std::span<double> out);
void max_share_parallel(std::span<const double> rows, std::size_t cols, std::span<double> out);

int max_threads();

}  // namespace kernels
}  // namespace sfcmc
