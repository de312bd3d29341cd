#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "io.hpp"
#include "rng.hpp"

namespace liqstring {

enum class option_kind { call, put };

inline const char* to_string(option_kind k) { return k == option_kind::call ? "call" : "put"; }

struct option_spec {
  double strike = 0.0;
  double expiry = 0.0;  // years from t0
  double rate = 0.0;    // continuously compounded
  option_kind kind = option_kind::call;

  void validate() const {
    if (!(strike > 0.0)) throw domain_error("option strike must be positive");
    if (!(expiry > 0.0)) throw domain_error("option expiry must be positive");
    if (!std::isfinite(rate)) throw domain_error("option rate must be finite");
  }
};

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

struct mc_price {
  double price = 0.0;
  double stderr_ = 0.0;
};

// Sample average of the payoff; no discount unless a factor is given.
inline mc_price mc_option_price(const std::vector<double>& pi_T, const option_spec& spec, double discount = 1.0) {
  spec.validate();
  const std::size_t N = pi_T.size();
  if (N < 2) throw data_error("Monte Carlo price needs at least 2 samples");
  double sum = 0.0, sum2 = 0.0;
  for (double p : pi_T) {
    const double v = spec.kind == option_kind::call ? std::max(p - spec.strike, 0.0) : std::max(spec.strike - p, 0.0);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / N;
  const double var = std::max(0.0, (sum2 - N * mean * mean) / (N - 1));
  return {discount * mean, discount * std::sqrt(var / N)};
}

inline std::vector<mc_price> mc_prices(const std::vector<double>& pi_T, const std::vector<option_spec>& specs,
                                       bool discount = false) {
  std::vector<mc_price> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(mc_option_price(pi_T, s, discount ? std::exp(-s.rate * s.expiry) : 1.0));
  return out;
}

inline double bs_d1(double spot, const option_spec& spec, double vol) {
  spec.validate();
  if (!(spot > 0.0)) throw domain_error("spot must be positive");
  if (!(vol > 0.0)) throw domain_error("volatility must be positive");
  const double sq = vol * std::sqrt(spec.expiry);
  return (std::log(spot / spec.strike) + (spec.rate + 0.5 * vol * vol) * spec.expiry) / sq;
}

inline double bs_price(double spot, const option_spec& spec, double vol) {
  const double d1 = bs_d1(spot, spec, vol);
  const double d2 = d1 - vol * std::sqrt(spec.expiry);
  const double df = std::exp(-spec.rate * spec.expiry);
  const double call = spot * norm_cdf(d1) - spec.strike * df * norm_cdf(d2);
  if (spec.kind == option_kind::call) return call;
  return call - spot + spec.strike * df;
}

// Phi(d1) for calls, Phi(-d1) for puts
inline double bs_delta(double spot, const option_spec& spec, double vol) {
  const double d1 = bs_d1(spot, spec, vol);
  return spec.kind == option_kind::call ? norm_cdf(d1) : norm_cdf(-d1);
}

inline double bs_vega(double spot, const option_spec& spec, double vol) {
  return spot * norm_pdf(bs_d1(spot, spec, vol)) * std::sqrt(spec.expiry);
}

struct implied_vol_result {
  double vol = 0.0;
  bool at_lower = false;  // target at or below the price at the lower bracket
  bool at_upper = false;
};

inline constexpr double iv_lo = 1e-6;
inline constexpr double iv_hi = 5.0;

inline implied_vol_result implied_vol(double spot, const option_spec& spec, double target) {
  spec.validate();
  if (!(spot > 0.0)) throw domain_error("spot must be positive");
  const double kdf = spec.strike * std::exp(-spec.rate * spec.expiry);
  const bool call = spec.kind == option_kind::call;
  const double lo_band = call ? std::max(spot - kdf, 0.0) : std::max(kdf - spot, 0.0);
  const double hi_band = call ? spot : kdf;
  const double slack = 1e-12 * spot;
  if (!std::isfinite(target) || target < lo_band - slack || target > hi_band + slack)
    throw inversion_error("target " + fmt_double(target) + " outside the no-arbitrage band [" + fmt_double(lo_band) + ", " +
                          fmt_double(hi_band) + "] at strike " + fmt_double(spec.strike));

  implied_vol_result r;
  const double tol = 1e-10 * spot;
  double a = iv_lo, b = iv_hi;
  const double fa = bs_price(spot, spec, a) - target;
  const double fb = bs_price(spot, spec, b) - target;
  if (fa >= 0.0) {
    r.vol = a;
    r.at_lower = true;
    return r;
  }
  if (fb <= 0.0) {
    r.vol = b;
    r.at_upper = true;
    return r;
  }
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    const double m = 0.5 * (a + b);
    if (bs_price(spot, spec, m) - target < 0.0)
      a = m;
    else
      b = m;
  }
  double v = 0.5 * (a + b);
  for (int it = 0; it < 20; ++it) {
    const double f = bs_price(spot, spec, v) - target;
    if (std::abs(f) <= 1e-3 * tol) break;
    const double vega = bs_vega(spot, spec, v);
    if (!(vega > 0.0)) break;
    const double next = v - f / vega;
    if (!(next > a - 1e-9 && next < b + 1e-9)) break;
    v = next;
  }
  if (!(std::abs(bs_price(spot, spec, v) - target) <= tol))
    throw inversion_error("implied vol did not converge at strike " + fmt_double(spec.strike));
  r.vol = v;
  return r;
}

struct smile_point {
  option_kind kind = option_kind::call;
  double strike = 0.0;
  double delta = 0.0;
  double mc_price = 0.0;
  double mc_stderr = 0.0;
  double implied_vol = 0.0;
  bool flagged = false;
};

struct smile_failure {
  option_kind kind = option_kind::call;
  double strike = 0.0;
  double mc_price = 0.0;
  std::string reason;
};

struct smile {
  std::vector<smile_point> points;
  std::vector<smile_failure> failures;
};

// Calls and puts per strike; rows sorted by kind then delta.
inline smile smile_report(const std::vector<double>& pi_T, double pi_t0, const std::vector<double>& strikes, double rate,
                          double expiry, bool discount = false) {
  if (pi_T.empty()) throw data_error("smile needs samples");
  smile out;
  for (option_kind kind : {option_kind::call, option_kind::put}) {
    for (double K : strikes) {
      const option_spec spec{K, expiry, rate, kind};
      const auto mc = mc_option_price(pi_T, spec, discount ? std::exp(-rate * expiry) : 1.0);
      try {
        const auto iv = implied_vol(pi_t0, spec, mc.price);
        if (iv.at_lower || iv.at_upper) {
          out.failures.push_back({kind, K, mc.price, iv.at_lower ? "price at intrinsic value" : "vol above bracket"});
          continue;
        }
        out.points.push_back({kind, K, bs_delta(pi_t0, spec, iv.vol), mc.price, mc.stderr_, iv.vol, false});
      } catch (const inversion_error& e) {
        out.failures.push_back({kind, K, mc.price, e.what()});
      }
    }
  }
  std::stable_sort(out.points.begin(), out.points.end(), [](const smile_point& a, const smile_point& b) {
    if (a.kind != b.kind) return a.kind == option_kind::call;
    return a.delta < b.delta;
  });
  return out;
}

inline void write_smile_csv(std::ostream& os, const smile& s, const std::string& header_note = {}) {
  if (!header_note.empty()) os << "# " << header_note << '\n';
  os << "kind,strike,delta,mc_price,mc_stderr,implied_vol\n";
  for (const auto& p : s.points)
    os << to_string(p.kind) << ',' << fmt_double(p.strike) << ',' << fmt_double(p.delta) << ',' << fmt_double(p.mc_price) << ','
       << fmt_double(p.mc_stderr) << ',' << fmt_double(p.implied_vol) << '\n';
  for (const auto& f : s.failures)
    os << "# failed," << to_string(f.kind) << ',' << fmt_double(f.strike) << ',' << fmt_double(f.mc_price) << ',' << f.reason << '\n';
}

// Geometric Brownian terminal values, used as a sampler oracle.
inline std::vector<double> sample_lognormal(double spot, double drift, double vol, double T, std::size_t n, std::uint64_t seed) {
  splitmix_engine eng(seed);
  std::vector<double> out(n);
  const double m = (drift - 0.5 * vol * vol) * T, s = vol * std::sqrt(T);
  for (auto& v : out) v = spot * std::exp(m + s * eng.normal());
  return out;
}

}  // namespace liqstring
