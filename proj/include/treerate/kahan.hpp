#pragma once

#include <cmath>

namespace treerate {

// Kahan-Neumaier compensated accumulator. Mass, entropy and divergence
// sums run over up to ~10^6 terms; plain summation would eat the 1e-12
// tolerances the invariants are checked at.
class KahanSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace treerate
