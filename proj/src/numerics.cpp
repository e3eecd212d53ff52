#include "hydro/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace hydro {

cplx cexpm1(cplx z) {
  const double a = z.real();
  const double b = z.imag();
  const double s = std::sin(0.5 * b);
  const double re = std::expm1(a) * std::cos(b) - 2.0 * s * s;
  const double im = std::exp(a) * std::sin(b);
  return {re, im};
}

cplx phi1(cplx z) {
  if (std::abs(z) == 0.0) return {1.0, 0.0};
  if (std::abs(z) < 1e-5) {
    // Taylor to fourth order; remainder below 1e-26.
    return 1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
  }
  return cexpm1(z) / z;
}

double trapezoid_average(const std::vector<double>& times,
                         const std::vector<double>& values) {
  if (times.size() != values.size()) {
    throw std::invalid_argument("trapezoid_average: size mismatch");
  }
  if (times.size() < 2) {
    throw std::invalid_argument("trapezoid_average: need at least 2 frames");
  }
  CompensatedSum acc;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double h = times[k] - times[k - 1];
    if (h < 0) throw std::invalid_argument("trapezoid_average: times not sorted");
    acc.add(0.5 * h * (values[k] + values[k - 1]));
  }
  const double span = times.back() - times.front();
  if (span <= 0) throw std::invalid_argument("trapezoid_average: empty window");
  return acc.value() / span;
}

}  // namespace hydro
