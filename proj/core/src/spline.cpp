#include "lipspline/spline.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "lipspline/error.hpp"

namespace lipspline {

const char* to_string(SplineInit init) {
  switch (init) {
    case SplineInit::Identity: return "identity";
    case SplineInit::Relu: return "relu";
    case SplineInit::AbsoluteValue: return "absolute_value";
    case SplineInit::LeakyRelu: return "leaky_relu";
    case SplineInit::MaxMin: return "maxmin";
  }
  return "?";
}

SplineInit parse_spline_init(const std::string& name) {
  for (auto v : {SplineInit::Identity, SplineInit::Relu, SplineInit::AbsoluteValue, SplineInit::LeakyRelu,
                 SplineInit::MaxMin}) {
    if (name == to_string(v)) return v;
  }
  throw ConfigError("unknown spline initialization '" + name + "'");
}

double spline_eval(const Spline& s, double x) {
  if (s.alpha == 0.0) throw NumericError("spline: alpha must be nonzero");
  if (s.size() < 2) throw ShapeError("spline: at least two coefficients required");
  return ops::spline_value(s.coeffs, s.grid(), s.alpha, x);
}

std::vector<double> spline_eval(const Spline& s, std::span<const double> x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = spline_eval(s, x[i]);
  return y;
}

std::vector<double> first_differences(std::span<const double> c) {
  if (c.size() < 2) throw ShapeError("first differences need at least two coefficients");
  std::vector<double> d(c.size() - 1);
  for (std::size_t i = 0; i + 1 < c.size(); ++i) d[i] = c[i + 1] - c[i];
  return d;
}

std::vector<double> second_differences(std::span<const double> c) {
  if (c.size() < 3) return {};
  std::vector<double> d(c.size() - 2);
  for (std::size_t i = 0; i + 2 < c.size(); ++i) d[i] = c[i] - 2.0 * c[i + 1] + c[i + 2];
  return d;
}

std::vector<double> spline_proj(std::span<const double> c, double t) {
  if (c.size() < 2) throw ShapeError("spline_proj: at least two coefficients required");
  if (!(t > 0.0)) throw ConfigError("spline_proj: step must be positive");
  const double n = static_cast<double>(c.size());
  const double mean_c = std::accumulate(c.begin(), c.end(), 0.0) / n;
  std::vector<double> out(c.size());
  out[0] = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) out[i] = out[i - 1] + clip(c[i] - c[i - 1], t);
  const double mean_out = std::accumulate(out.begin(), out.end(), 0.0) / n;
  for (auto& v : out) v = v - mean_out + mean_c;
  return out;
}

double tv2(const Spline& s) {
  double acc = 0.0;
  for (double v : second_differences(s.coeffs)) acc += std::abs(v);
  return acc / s.step;
}

double aelr(const Spline& s, double threshold) {
  double count = 1.0;
  for (double v : second_differences(s.coeffs)) {
    if (std::abs(v) > threshold) count += 1.0;
  }
  return count;
}

Spline init_spline(SplineInit preset, std::size_t k, double range, std::size_t neuron, double slope) {
  if (k < 3) throw ConfigError("init_spline: at least three coefficients required");
  if (k % 2 == 0) throw ConfigError("init_spline: coefficient count must be odd for a grid symmetric about 0");
  if (!(range > 0.0)) throw ConfigError("init_spline: range must be positive");
  if (preset == SplineInit::LeakyRelu && std::abs(slope) > 1.0) {
    throw ConfigError("init_spline: leaky slope must lie in [-1, 1]");
  }
  Spline s;
  s.step = k == 3 ? range : 2.0 * range / static_cast<double>(k - 3);
  s.k_min = -static_cast<long>(k - 3) / 2;
  s.coeffs.resize(k);
  if (preset == SplineInit::MaxMin) preset = neuron % 2 == 0 ? SplineInit::Identity : SplineInit::AbsoluteValue;
  for (std::size_t j = 0; j < k; ++j) {
    const double x = s.knot(j);
    double v = x;
    switch (preset) {
      case SplineInit::Identity: v = x; break;
      case SplineInit::Relu: v = x > 0.0 ? x : 0.0; break;
      case SplineInit::AbsoluteValue: v = std::abs(x); break;
      case SplineInit::LeakyRelu: v = x > 0.0 ? x : slope * x; break;
      case SplineInit::MaxMin: break;
    }
    s.coeffs[j] = v;
  }
  return s;
}

void write_spline_csv(std::ostream& os, const Spline& s) {
  const auto lc = second_differences(s.coeffs);
  std::ostringstream buf;
  buf << std::setprecision(17);
  buf << "knot_position,coefficient,second_difference\n";
  for (std::size_t j = 0; j < s.size(); ++j) {
    buf << s.knot(j) << ',' << s.coeffs[j] << ',';
    if (j > 0 && j + 1 < s.size()) buf << lc[j - 1];
    buf << '\n';
  }
  os << buf.str();
}

namespace {

double parse_double(const std::string& field, std::size_t line) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("spline csv line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

}  // namespace

Spline read_spline_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "knot_position,coefficient,second_difference") {
    throw ConfigError("spline csv: missing header");
  }
  std::vector<double> knots;
  Spline s;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',')) {
      throw ConfigError("spline csv line " + std::to_string(lineno) + ": expected three columns");
    }
    knots.push_back(parse_double(a, lineno));
    s.coeffs.push_back(parse_double(b, lineno));
  }
  if (s.coeffs.size() < 2) throw ConfigError("spline csv: at least two rows required");
  s.step = knots[1] - knots[0];
  if (!(s.step > 0.0)) throw ConfigError("spline csv: knot positions must increase");
  s.k_min = std::lround(knots[0] / s.step) + 1;
  return s;
}

Var spline_proj(Graph& g, Var coeffs, double step, std::size_t k) {
  const Var increments = g.cumsum(g.clip(g.diff(coeffs), step, true), true);
  const Var centred = g.sub(increments, g.broadcast_last(g.mean_last(increments), k));
  return g.add(centred, g.broadcast_last(g.mean_last(coeffs), k));
}

Var tv2(Graph& g, Var coeffs, double step) { return g.scale(g.l1(g.diff(g.diff(coeffs))), 1.0 / step); }

}  // namespace lipspline
