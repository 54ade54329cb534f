#include "dwp/dsp.hpp"

#include <cmath>
#include <string>

#include "dwp/error.hpp"

namespace dwp::dsp {
namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void transform_in_place(ComplexBuf& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles are computed directly rather than by recurrence so that every
      // stage is accurate to one rounding.
      const double angle = sign * 2.0 * kPi * static_cast<double>(k) / static_cast<double>(len);
      const cplx w(std::cos(angle), std::sin(angle));
      for (std::size_t start = 0; start < n; start += len) {
        const cplx u = a[start + k];
        const cplx v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

void check_size(std::span<const cplx> x, std::size_t size) {
  if (!is_power_of_two(size)) {
    throw ArgumentError("fft size " + std::to_string(size) + " is not a power of two");
  }
  if (x.size() != size) {
    throw ArgumentError("fft input length " + std::to_string(x.size()) +
                        " does not match size " + std::to_string(size));
  }
}

}  // namespace

ComplexBuf fft(std::span<const cplx> x, std::size_t size) {
  check_size(x, size);
  ComplexBuf out(x.begin(), x.end());
  transform_in_place(out, false);
  return out;
}

ComplexBuf ifft(std::span<const cplx> x, std::size_t size) {
  check_size(x, size);
  ComplexBuf out(x.begin(), x.end());
  transform_in_place(out, true);
  const double scale = 1.0 / static_cast<double>(size);
  for (auto& v : out) v *= scale;
  return out;
}

double squared_norm(std::span<const cplx> x) {
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc;
}

ComplexBuf normalize_field(std::span<const cplx> x) {
  if (x.empty()) throw ArgumentError("normalize_field: empty input");
  const double norm = std::sqrt(squared_norm(x));
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DegenerateInputError("normalize_field: input has zero (or non-finite) norm");
  }
  const double scale = std::sqrt(static_cast<double>(x.size())) / norm;
  ComplexBuf out(x.begin(), x.end());
  for (auto& v : out) v *= scale;
  return out;
}

LineFit wls_line_fit(std::span<const double> xs, std::span<const double> ys,
                     std::span<const double> weights) {
  if (xs.size() != ys.size() || xs.size() != weights.size()) {
    throw ArgumentError("wls_line_fit: length mismatch");
  }
  if (xs.size() < 2) throw ArgumentError("wls_line_fit: need at least two points");

  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (weights[i] < 0.0) throw ArgumentError("wls_line_fit: negative weight");
    sw += weights[i];
    sx += weights[i] * xs[i];
    sy += weights[i] * ys[i];
  }
  if (!(sw > 0.0)) throw DegenerateInputError("wls_line_fit: all weights are zero");
  const double mx = sx / sw;
  const double my = sy / sw;
  // Centered sums keep the normal equations well conditioned.
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    sxx += weights[i] * dx * dx;
    sxy += weights[i] * dx * (ys[i] - my);
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) scale = std::max(scale, std::abs(xs[i] - mx));
  if (!(sxx > 1e-24 * sw * std::max(scale * scale, 1.0))) {
    throw DegenerateInputError("wls_line_fit: abscissae are degenerate (singular fit)");
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

double wrap_phase(double radians) {
  double r = std::remainder(radians, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

}  // namespace dwp::dsp
