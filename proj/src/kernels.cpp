#include "sfcmc/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sfcmc::kernels {

namespace {

inline double convolution_point(std::span<const double> a, std::span<const double> b, double h, std::size_t j) {
    if (j == 0) return 0.0;
    double sum = 0.5 * (a[0] * b[j] + a[j] * b[0]);
    for (std::size_t k = 1; k < j; ++k) sum += a[k] * b[j - k];
    return h * sum;
}

inline double max_share_row(const double* row, std::size_t cols) {
    double total = 0.0, biggest = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
        total += row[c];
        biggest = std::max(biggest, row[c]);
    }
    return total > 0.0 ? biggest / total : 0.0;
}

}  // namespace

void trapezoid_convolution_serial(std::span<const double> a, std::span<const double> b, double h, std::span<double> out) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = convolution_point(a, b, h, j);
}

void trapezoid_convolution_parallel(std::span<const double> a, std::span<const double> b, double h,
                                    std::span<double> out) {
    const auto n = static_cast<long>(out.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (long j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] = convolution_point(a, b, h, static_cast<std::size_t>(j));
}

void max_share_serial(std::span<const double> rows, std::size_t cols, std::span<double> out) {
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = max_share_row(rows.data() + r * cols, cols);
}

void max_share_parallel(std::span<const double> rows, std::size_t cols, std::span<double> out) {
    const auto n = static_cast<long>(out.size());
#pragma omp parallel for schedule(static)
    for (long r = 0; r < n; ++r)
        out[static_cast<std::size_t>(r)] = max_share_row(rows.data() + static_cast<std::size_t>(r) * cols, cols);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace sfcmc::kernels
