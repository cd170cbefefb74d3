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

// Brute-force reference computations written without Eigen so they share no
// code path with the library.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

Mat transpose(const Mat& a);
Mat multiply(const Mat& a, const Mat& b);
// Gauss-Jordan with partial pivoting; throws on a zero pivot.
Mat inverse(const Mat& a);

Vec normal_equations(const Mat& x, const Vec& y);

// Loop-over-clusters sandwich with the G/(G-1) * (n-1)/(n-k) factor.
Mat cluster_sandwich(const Mat& x, const Vec& residuals, const std::vector<std::string>& clusters);

// White covariance scaled by n/(n-k).
Mat hc1(const Mat& x, const Vec& residuals);

// Central differences of a vector function, one column per parameter.
Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& at, double step);

}  // namespace oracle
