#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "lipspline/graph.hpp"
#include "lipspline/ops.hpp"

namespace lipspline {

/// Linear spline on the uniform grid {(k_min - 1) T, ..., (k_max + 1) T},
/// extrapolated linearly, evaluated as sigma(alpha x) / alpha.
struct Spline {
  std::vector<double> coeffs;
  double step = 1.0;
  double alpha = 1.0;
  long k_min = 0;

  std::size_t size() const noexcept { return coeffs.size(); }
  long k_max() const noexcept { return k_min + static_cast<long>(coeffs.size()) - 3; }
  double knot(std::size_t j) const noexcept { return static_cast<double>(k_min - 1 + static_cast<long>(j)) * step; }
  ops::SplineGrid grid() const noexcept { return {step, k_min}; }
};

enum class SplineInit { Identity, Relu, AbsoluteValue, LeakyRelu, MaxMin };

const char* to_string(SplineInit init);
SplineInit parse_spline_init(const std::string& name);

double spline_eval(const Spline& s, double x);
std::vector<double> spline_eval(const Spline& s, std::span<const double> x);

inline double clip(double x, double t) { return x > t ? t : (x < -t ? -t : x); }

/// Cumulative sum of the clipped first differences, shifted to keep the mean of c.
/// The result has all first differences within [-t, t].
std::vector<double> spline_proj(std::span<const double> c, double t);

std::vector<double> first_differences(std::span<const double> c);
std::vector<double> second_differences(std::span<const double> c);

/// Second-order total variation (1/T) |L c|_1.
double tv2(const Spline& s);
/// Number of second differences above `threshold` in magnitude, plus one.
double aelr(const Spline& s, double threshold = 0.01);

/// Samples `preset` at the knots of a K-coefficient grid whose nonlinear region is [-range, range].
/// K must be odd; K = 3 puts the single interior knot at 0 with T = range.
/// `neuron` selects identity (even) or absolute value (odd) for the MaxMin preset.
Spline init_spline(SplineInit preset, std::size_t k, double range, std::size_t neuron = 0, double slope = 0.01);

/// CSV with header knot_position,coefficient,second_difference (blank at the two ends).
void write_spline_csv(std::ostream& os, const Spline& s);
/// Parses a dump written by write_spline_csv; alpha is reset to 1.
Spline read_spline_csv(std::istream& is);

// Graph forms, acting row-wise on [C, K] coefficient nodes.
/// `k` is the number of coefficients per row.
Var spline_proj(Graph& g, Var coeffs, double step, std::size_t k);
/// Sum over rows of (1/T) |L c|_1.
Var tv2(Graph& g, Var coeffs, double step);

}  // namespace lipspline
