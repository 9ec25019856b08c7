#pragma once

#include <functional>
#include <vector>

#include "civae/tensor.hpp"

// Independent numerical oracles for the test suites. Everything here is
// deliberately naive and separate from the library's computation paths.
namespace oracles {

/// Adaptive Simpson quadrature on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-11, int max_depth = 60);

/// Composite Simpson on a 2-D rectangle with (nx, ny) panels.
double integrate_2d(const std::function<double(double, double)>& f, double ax, double bx,
                    double ay, double by, int nx = 400, int ny = 400);

/// Plain i-j-k triple-loop matrix product.
civae::Tensor naive_matmul(const civae::Tensor& a, const civae::Tensor& b);

/// Central finite difference of a scalar function of one coordinate.
double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5);

double mean_of(const std::vector<double>& v);
double sd_of(const std::vector<double>& v);
double pearson(const std::vector<double>& a, const std::vector<double>& b);

} // namespace oracles
