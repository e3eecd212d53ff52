#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace hydro {

using cplx = std::complex<double>;

// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// e^z - 1 without cancellation near z = 0.
cplx cexpm1(cplx z);

// (e^z - 1)/z, equal to 1 at z = 0.
cplx phi1(cplx z);

// Trapezoidal (1/(t_end - t_0)) * integral of samples over their time grid.
double trapezoid_average(const std::vector<double>& times,
                         const std::vector<double>& values);

}  // namespace hydro
