#include <gtest/gtest.h>

#include <sstream>

#include <liqstring/pricing.hpp>

using namespace liqstring;

TEST(McPrice, AtStrikeAndTwoPoint) {
  const option_spec call{100, 1, 0, option_kind::call}, put{100, 1, 0, option_kind::put};
  const std::vector<double> flat(10, 100.0);
  EXPECT_EQ(mc_option_price(flat, call).price, 0.0);
  EXPECT_EQ(mc_option_price(flat, put).price, 0.0);
  const std::vector<double> two{90.0, 110.0};
  EXPECT_EQ(mc_option_price(two, call).price, 5.0);
  EXPECT_EQ(mc_option_price(two, put).price, 5.0);
  EXPECT_THROW(mc_option_price({1.0}, call), data_error);
}

TEST(McPrice, ParityMonotoneConvex) {
  const auto pi = sample_lognormal(100.0, 0.0, 0.3, 0.5, 5000, 3);
  double mean = 0.0;
  for (double v : pi) mean += v;
  mean /= pi.size();
  std::vector<double> calls, puts;
  for (double K = 70; K <= 130; K += 2.5) {
    const double c = mc_option_price(pi, {K, 0.5, 0.01, option_kind::call}).price;
    const double p = mc_option_price(pi, {K, 0.5, 0.01, option_kind::put}).price;
    EXPECT_NEAR(c - p, mean - K, 1e-12 * std::max(1.0, K));
    calls.push_back(c);
    puts.push_back(p);
  }
  for (std::size_t i = 1; i < calls.size(); ++i) {
    EXPECT_LE(calls[i], calls[i - 1]);
    EXPECT_GE(puts[i], puts[i - 1]);
  }
  for (std::size_t i = 1; i + 1 < calls.size(); ++i) EXPECT_GE(calls[i + 1] - 2 * calls[i] + calls[i - 1], -1e-12);
}

TEST(McPrice, DiscountFlag) {
  const std::vector<double> two{90.0, 110.0};
  const auto r = mc_prices(two, {{100, 1, 0.05, option_kind::call}}, true);
  EXPECT_NEAR(r[0].price, 5.0 * std::exp(-0.05), 1e-15);
}

TEST(BlackScholes, DeltaAtD1Point1) {
  const option_spec s{100, 1, 0, option_kind::call};
  EXPECT_NEAR(bs_d1(100, s, 0.2), 0.1, 1e-15);
  EXPECT_NEAR(bs_delta(100, s, 0.2), 0.539828, 1e-6);
  EXPECT_NEAR(bs_delta(100, {100, 1, 0, option_kind::put}, 0.2), 1 - 0.539828, 1e-6);
  EXPECT_NEAR(norm_cdf(0.1), 0.539827837277029, 1e-15);
}

TEST(BlackScholes, DeterministicLimitAndParity) {
  const option_spec c{90, 0.5, 0.03, option_kind::call}, p{90, 0.5, 0.03, option_kind::put};
  EXPECT_NEAR(bs_price(100, c, 1e-8), 100 - 90 * std::exp(-0.015), 1e-10);
  for (double v : {0.05, 0.3, 1.2})
    EXPECT_NEAR(bs_price(100, c, v) - bs_price(100, p, v), 100 - 90 * std::exp(-0.015), 1e-11);
  EXPECT_THROW(bs_price(-1, c, 0.2), domain_error);
  EXPECT_THROW(bs_price(100, c, 0.0), domain_error);
  EXPECT_THROW(bs_price(100, {0, 1, 0, option_kind::call}, 0.2), domain_error);
}

TEST(ImpliedVol, RoundTrip) {
  const option_spec s{100, 1, 0, option_kind::call};
  EXPECT_NEAR(implied_vol(100, s, bs_price(100, s, 0.3)).vol, 0.3, 1e-8);
  for (option_kind k : {option_kind::call, option_kind::put})
    for (double K : {60.0, 95.0, 100.0, 130.0})
      for (double v = 0.01; v <= 3.0; v *= 1.37) {
        const option_spec sp{K, 30.0 / 365.0, 0.002537, k};
        const double target = bs_price(100, sp, v);
        // deep out-of-the-money prices below resolution carry no vol information
        if (target < 1e-9 * 100 || bs_vega(100, sp, v) < 1e-6) continue;
        EXPECT_NEAR(implied_vol(100, sp, target).vol, v, 1e-8) << K << ' ' << v;
      }
}

TEST(ImpliedVol, BandEdges) {
  const option_spec s{90, 1, 0, option_kind::call};
  const auto lo = implied_vol(100, s, 10.0);
  EXPECT_TRUE(lo.at_lower);
  EXPECT_EQ(lo.vol, iv_lo);
  EXPECT_THROW(implied_vol(100, s, 100.5), inversion_error);
  EXPECT_THROW(implied_vol(100, s, 9.0), inversion_error);
  EXPECT_THROW(implied_vol(100, {110, 1, 0, option_kind::put}, 110.5), inversion_error);
}

TEST(Smile, AtTheMoneySingleStrike) {
  const auto pi = sample_lognormal(100, 0, 0.25, 0.25, 4000, 1);
  const auto sm = smile_report(pi, 100, {100}, 0, 0.25);
  ASSERT_EQ(sm.points.size(), 2u);
  EXPECT_EQ(sm.points[0].kind, option_kind::call);
  EXPECT_NEAR(sm.points[0].delta, 0.5, 0.05);
  EXPECT_NEAR(sm.points[1].delta, 0.5, 0.05);
}

TEST(Smile, LognormalOracleIsFlat) {
  // samples rescaled to the exact forward, so only strike-level noise is left
  const double spot = 100, vol = 0.3, T = 30.0 / 365.0;
  auto pi = sample_lognormal(spot, 0, vol, T, 10000, 11);
  double mean = 0;
  for (double v : pi) mean += v;
  mean /= pi.size();
  for (double& v : pi) v *= spot / mean;
  const std::vector<double> strikes{94, 96, 98, 100, 102, 104, 106};
  const auto sm = smile_report(pi, spot, strikes, 0, T);
  ASSERT_EQ(sm.failures.size(), 0u);
  const smile_point* lo = &sm.points[0];
  const smile_point* hi = &sm.points[0];
  for (const auto& p : sm.points) {
    if (p.implied_vol < lo->implied_vol) lo = &p;
    if (p.implied_vol > hi->implied_vol) hi = &p;
  }
  auto se = [&](const smile_point& p) { return p.mc_stderr / bs_vega(spot, {p.strike, T, 0, p.kind}, p.implied_vol); };
  EXPECT_LE(hi->implied_vol - lo->implied_vol, 3 * std::hypot(se(*hi), se(*lo)));
  for (const auto& p : sm.points) EXPECT_NEAR(p.implied_vol, vol, 3 * se(p));
  for (std::size_t i = 1; i < sm.points.size(); ++i) {
    if (sm.points[i].kind == sm.points[i - 1].kind) {
      EXPECT_GE(sm.points[i].delta, sm.points[i - 1].delta);
    }
  }
}

TEST(Smile, FailuresBecomeCommentRows) {
  const std::vector<double> pi{100, 100, 100};
  const auto sm = smile_report(pi, 100, {90}, 0.05, 1.0);
  EXPECT_EQ(sm.points.size(), 0u);
  EXPECT_EQ(sm.failures.size(), 2u);
  std::ostringstream os;
  write_smile_csv(os, sm, "undiscounted payoffs");
  EXPECT_NE(os.str().find("kind,strike,delta,mc_price,mc_stderr,implied_vol\n"), std::string::npos);
  EXPECT_NE(os.str().find("# failed,call,90"), std::string::npos);
  EXPECT_EQ(os.str().rfind("# undiscounted payoffs\n", 0), 0u);
}
