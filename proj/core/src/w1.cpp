#include "lipspline/w1.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include "lipspline/error.hpp"

namespace lipspline {

MixtureParams gaussian_params(std::vector<double> mean, Tensor factor) {
  const std::size_t n = mean.size();
  if (n == 0) throw ConfigError("gaussian needs a non-empty mean");
  if (!factor.empty() && factor.shape() != Shape{n, n}) throw ShapeError("covariance factor must be N x N");
  GaussianComponent c{std::move(mean), std::move(factor)};
  return MixtureParams{{c, c}};
}

MixtureParams random_mixture(std::size_t dim, std::mt19937_64& rng) {
  if (dim == 0) throw ConfigError("mixture dimension must be positive");
  std::normal_distribution<double> normal;
  MixtureParams p;
  for (auto& c : p.components) {
    c.mean.resize(dim);
    for (auto& m : c.mean) m = normal(rng);
    c.factor = Tensor({dim, dim});
    for (auto& a : c.factor.data()) a = normal(rng);
  }
  return p;
}

Tensor sample_mixture(const MixtureParams& p, std::size_t n, std::mt19937_64& rng) {
  const std::size_t dim = p.dim();
  std::normal_distribution<double> normal;
  std::vector<double> g(dim);
  Tensor out({n, dim});
  for (std::size_t s = 0; s < n; ++s) {
    const auto& c = p.components[rng() & 1U];
    double* row = out.data().data() + s * dim;
    std::copy(c.mean.begin(), c.mean.end(), row);
    if (c.factor.empty()) continue;
    for (auto& v : g) v = normal(rng);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) row[j] += c.factor.at(i, j) * g[i];
  }
  return out;
}

double dual_objective(const FrozenNetwork& critic, const Tensor& batch1, const Tensor& batch2) {
  const Tensor f1 = critic.apply(batch1);
  const Tensor f2 = critic.apply(batch2);
  const double m1 = std::accumulate(f1.data().begin(), f1.data().end(), 0.0) / static_cast<double>(f1.size());
  const double m2 = std::accumulate(f2.data().begin(), f2.data().end(), 0.0) / static_cast<double>(f2.size());
  return m1 - m2;
}

namespace {

Tensor stack_rows(const Tensor& a, const Tensor& b) {
  Shape s = a.shape();
  s[0] += b.dim(0);
  Tensor out(s);
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<long>(a.size()));
  return out;
}

}  // namespace

CriticTraining train_critic(const NetworkSpec& spec, const MixtureParams& p1, const MixtureParams& p2,
                            const CriticConfig& cfg) {
  validate(cfg.train);
  if (spec.widths.front() != p1.dim() || p1.dim() != p2.dim() || spec.widths.back() != 1) {
    throw ConfigError("critic must map the sample dimension to a scalar");
  }
  CriticTraining result{Network(spec), {}};
  Network& net = result.critic;
  std::mt19937_64 rng(cfg.train.seed);
  std::mt19937_64 log_rng(cfg.train.seed ^ 0x5bd1e995ULL);
  const Tensor log1 = sample_mixture(p1, cfg.log_samples, log_rng);
  const Tensor log2 = sample_mixture(p2, cfg.log_samples, log_rng);

  const std::size_t b = cfg.train.batch_size;
  Tensor weights({2 * b, 1});
  for (std::size_t i = 0; i < b; ++i) {
    weights[i] = 1.0 / static_cast<double>(b);
    weights[b + i] = -1.0 / static_cast<double>(b);
  }
  Adam opt;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const Tensor x = stack_rows(sample_mixture(p1, b, rng), sample_mixture(p2, b, rng));
    net.refresh_constraints(cfg.train.power_iters);
    Graph g;
    const auto out = net.forward(g, g.input("x"));
    Var loss = g.scale(g.sum(g.mul(out.y, g.constant(weights))), -1.0);
    if (out.tv2.valid() && cfg.train.lambda > 0.0) loss = g.add(loss, g.scale(out.tv2, cfg.train.lambda));
    g.evaluate({{"x", x}});
    opt.step(net.parameters(), g.gradient(loss), cfg.train);
    net.project_splines();
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step == cfg.steps)) {
      result.train_estimates.push_back(dual_objective(net.freeze(), log1, log2));
    }
  }
  return result;
}

W1Estimate estimate_w1(const FrozenNetwork& critic, const MixtureParams& p1, const MixtureParams& p2,
                       std::size_t n_mc, std::size_t repeats, std::uint64_t seed) {
  if (n_mc < 2 || repeats == 0) throw ConfigError("estimate_w1 needs n_mc >= 2 and at least one repeat");
  std::mt19937_64 rng(seed);
  std::vector<double> est;
  double se_acc = 0.0;
  constexpr std::size_t kChunk = 8192;
  for (std::size_t r = 0; r < repeats; ++r) {
    double s1 = 0.0, q1 = 0.0, s2 = 0.0, q2 = 0.0;
    for (std::size_t done = 0; done < n_mc; done += kChunk) {
      const std::size_t m = std::min(kChunk, n_mc - done);
      const Tensor f1 = critic.apply(sample_mixture(p1, m, rng));
      const Tensor f2 = critic.apply(sample_mixture(p2, m, rng));
      for (double v : f1.data()) {
        s1 += v;
        q1 += v * v;
      }
      for (double v : f2.data()) {
        s2 += v;
        q2 += v * v;
      }
    }
    const double n = static_cast<double>(n_mc);
    const double m1 = s1 / n, m2 = s2 / n;
    const double var1 = std::max(0.0, q1 / n - m1 * m1), var2 = std::max(0.0, q2 / n - m2 * m2);
    est.push_back(m1 - m2);
    se_acc += std::sqrt((var1 + var2) / n);
  }
  W1Estimate e;
  const double k = static_cast<double>(repeats);
  e.mean = std::accumulate(est.begin(), est.end(), 0.0) / k;
  double var = 0.0;
  for (double v : est) var += (v - e.mean) * (v - e.mean);
  e.std = repeats > 1 ? std::sqrt(var / (k - 1.0)) : 0.0;
  e.standard_error = se_acc / k;
  return e;
}

// --- one-dimensional oracle ------------------------------------------------------

Distribution1d Distribution1d::normal(double mean, double stddev) {
  if (!(stddev > 0.0)) throw ConfigError("normal distribution needs a positive standard deviation");
  Distribution1d d;
  d.kind_ = Kind::Normal;
  d.m1_ = mean;
  d.s1_ = stddev;
  return d;
}

Distribution1d Distribution1d::point(double location) {
  Distribution1d d;
  d.kind_ = Kind::Point;
  d.m1_ = location;
  return d;
}

Distribution1d Distribution1d::normal_mixture(double m1, double s1, double m2, double s2) {
  if (!(s1 > 0.0 && s2 > 0.0)) throw ConfigError("mixture components need positive standard deviations");
  Distribution1d d;
  d.kind_ = Kind::Mixture;
  d.m1_ = m1;
  d.s1_ = s1;
  d.m2_ = m2;
  d.s2_ = s2;
  return d;
}

Distribution1d Distribution1d::empirical(std::vector<double> samples) {
  if (samples.empty()) throw ConfigError("empirical distribution needs samples");
  std::sort(samples.begin(), samples.end());
  Distribution1d d;
  d.kind_ = Kind::Empirical;
  d.samples_ = std::move(samples);
  return d;
}

Distribution1d Distribution1d::from_mixture(const MixtureParams& p) {
  if (p.dim() != 1) throw ConfigError("from_mixture needs a one-dimensional mixture");
  const auto& a = p.components[0];
  const auto& b = p.components[1];
  const double sa = a.factor.empty() ? 0.0 : std::abs(a.factor[0]);
  const double sb = b.factor.empty() ? 0.0 : std::abs(b.factor[0]);
  if (sa == 0.0 && sb == 0.0) {
    if (a.mean[0] == b.mean[0]) return point(a.mean[0]);
    return empirical({a.mean[0], b.mean[0]});
  }
  if (sa == 0.0 || sb == 0.0) throw ConfigError("mixtures of a point mass and a Gaussian are not supported");
  if (a.mean[0] == b.mean[0] && sa == sb) return normal(a.mean[0], sa);
  return normal_mixture(a.mean[0], sa, b.mean[0], sb);
}

double Distribution1d::cdf(double x) const {
  switch (kind_) {
    case Kind::Normal: return boost::math::cdf(boost::math::normal(m1_, s1_), x);
    case Kind::Point: return x >= m1_ ? 1.0 : 0.0;
    case Kind::Mixture:
      return 0.5 * (boost::math::cdf(boost::math::normal(m1_, s1_), x) +
                    boost::math::cdf(boost::math::normal(m2_, s2_), x));
    case Kind::Empirical: {
      const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
      return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
    }
  }
  return 0.0;
}

double Distribution1d::quantile(double t) const {
  if (!(t > 0.0 && t < 1.0)) throw ConfigError("quantile level must lie in (0, 1)");
  switch (kind_) {
    case Kind::Normal: return boost::math::quantile(boost::math::normal(m1_, s1_), t);
    case Kind::Point: return m1_;
    case Kind::Mixture: {
      const double lo = std::min(boost::math::quantile(boost::math::normal(m1_, s1_), t),
                                 boost::math::quantile(boost::math::normal(m2_, s2_), t));
      const double hi = std::max(boost::math::quantile(boost::math::normal(m1_, s1_), t),
                                 boost::math::quantile(boost::math::normal(m2_, s2_), t));
      if (hi - lo < 1e-15 * (1.0 + std::abs(lo))) return lo;
      std::uintmax_t iters = 200;
      const auto r = boost::math::tools::toms748_solve([&](double x) { return cdf(x) - t; }, lo, hi,
                                                       boost::math::tools::eps_tolerance<double>(50), iters);
      return 0.5 * (r.first + r.second);
    }
    case Kind::Empirical: {
      const auto n = samples_.size();
      auto k = static_cast<std::size_t>(std::ceil(t * static_cast<double>(n))) ;
      k = std::clamp<std::size_t>(k, 1, n);
      return samples_[k - 1];
    }
  }
  return 0.0;
}

std::vector<double> Distribution1d::jumps() const {
  std::vector<double> out;
  if (kind_ != Kind::Empirical) return out;
  const auto n = samples_.size();
  for (std::size_t k = 1; k < n; ++k) {
    if (samples_[k] != samples_[k - 1]) out.push_back(static_cast<double>(k) / static_cast<double>(n));
  }
  return out;
}

double w1_1d_oracle(const Distribution1d& d1, const Distribution1d& d2) {
  std::vector<double> cuts{0.0, 1.0};
  for (double t : d1.jumps()) cuts.push_back(t);
  for (double t : d2.jumps()) cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto gap = [&](double t) { return d1.quantile(t) - d2.quantile(t); };
  boost::math::quadrature::tanh_sinh<double> integrator;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    // split at sign changes of the quantile gap so each piece is smooth
    std::vector<double> pieces{a};
    constexpr int kProbe = 256;
    double prev_t = a + (b - a) * 0.5 / kProbe;
    double prev = gap(prev_t);
    for (int k = 1; k < kProbe; ++k) {
      const double t = a + (b - a) * (k + 0.5) / kProbe;
      const double cur = gap(t);
      if ((prev < 0.0) != (cur < 0.0) && prev != 0.0 && cur != 0.0) {
        std::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(gap, prev_t, t, prev, cur,
                                                         boost::math::tools::eps_tolerance<double>(50), iters);
        pieces.push_back(0.5 * (r.first + r.second));
      }
      prev_t = t;
      prev = cur;
    }
    pieces.push_back(b);
    for (std::size_t j = 0; j + 1 < pieces.size(); ++j) {
      if (pieces[j + 1] <= pieces[j]) continue;
      total += integrator.integrate([&](double t) { return std::abs(gap(t)); }, pieces[j], pieces[j + 1], 1e-10);
    }
  }
  return total;
}

}  // namespace lipspline
