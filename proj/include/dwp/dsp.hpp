#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace dwp {

using cplx = std::complex<double>;
using ComplexBuf = std::vector<cplx>;

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace dwp

namespace dwp::dsp {

/// Unnormalized forward DFT via iterative radix-2. `size` must be a power of
/// two and equal to x.size().
ComplexBuf fft(std::span<const cplx> x, std::size_t size);

/// Inverse DFT scaled by 1/size, so ifft(fft(x)) == x.
ComplexBuf ifft(std::span<const cplx> x, std::size_t size);

double squared_norm(std::span<const cplx> x);

/// Rescales x so that its squared Euclidean norm equals x.size().
/// Throws DegenerateInputError on an all-zero input.
ComplexBuf normalize_field(std::span<const cplx> x);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Weighted least-squares line minimizing sum w_i (y_i - slope*x_i - intercept)^2.
LineFit wls_line_fit(std::span<const double> xs, std::span<const double> ys,
                     std::span<const double> weights);

/// Wraps an angle into [-pi, pi].
double wrap_phase(double radians);

}  // namespace dwp::dsp
