// Copyright 2026 The Metro Homelessness Atlas Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

namespace atlas {

/// Compensated (Neumaier) summation.
class KahanSum {
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
  KahanSum& operator+=(double v) {
    add(v);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double kahan_total(std::span<const double> values);

// Upper-tail probabilities.
double student_t_two_sided_p(double t, double df);
double chi_squared_upper_p(double statistic, double df);
double normal_two_sided_p(double z);

enum class StarLegend {
  kCorrelation,  // * .05, ** .01, *** .001
  kRegression,   // + .10, * .05, ** .01, *** .001
};

std::string significance_stars(double p, StarLegend legend);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// printf-style fixed formatting, used for text tables.
std::string format_fixed(double v, int decimals);

}  // namespace atlas
