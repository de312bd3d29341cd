#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include <liqstring/demand_surface.hpp>
#include <liqstring/order_book.hpp>

using namespace liqstring;

namespace {
order_event add(std::uint64_t ref, double px, std::int64_t qty, side s, std::int64_t t = 0) {
  return {ref, t, px, qty, s, action::add};
}

book_state example_book() {
  book_state b;
  b.seed_resting(1, side::buy, 100, 10);
  b.seed_resting(2, side::sell, 120, 10);
  b.seed_resting(3, side::sell, 130, 10);
  return b;
}

using levels = std::vector<std::pair<double, std::int64_t>>;
}  // namespace

TEST(MatchOrder, PartialFillRestsRemainder) {
  auto [book, trades, cp] = match_order(example_book(), add(4, 125, 15, side::buy));
  ASSERT_EQ(trades.size(), 1u);
  EXPECT_EQ(trades[0].price, 120.0);
  EXPECT_EQ(trades[0].quantity, 10);
  ASSERT_TRUE(cp);
  EXPECT_EQ(*cp, 120.0);
  EXPECT_EQ(book.bid_levels(), (levels{{125.0, 5}, {100.0, 10}}));
  EXPECT_EQ(book.ask_levels(), (levels{{130.0, 10}}));
  EXPECT_FALSE(book.crossed());
}

TEST(MatchOrder, NoCrossRests) {
  auto [book, trades, cp] = match_order(example_book(), add(4, 110, 7, side::buy));
  EXPECT_TRUE(trades.empty());
  EXPECT_FALSE(cp);
  EXPECT_EQ(book.bid_levels(), (levels{{110.0, 7}, {100.0, 10}}));
}

TEST(MatchOrder, SellSweepsTwoLevels) {
  auto [b1, t1, c1] = match_order(example_book(), add(4, 125, 15, side::buy));
  auto [book, trades, cp] = match_order(b1, add(5, 90, 25, side::sell));
  ASSERT_EQ(trades.size(), 2u);
  EXPECT_EQ(trades[0].price, 125.0);
  EXPECT_EQ(trades[0].quantity, 5);
  EXPECT_EQ(trades[1].price, 100.0);
  EXPECT_EQ(trades[1].quantity, 10);
  EXPECT_EQ(*cp, 100.0);
  EXPECT_TRUE(book.bid_levels().empty());
  EXPECT_EQ(book.ask_levels(), (levels{{90.0, 10}, {130.0, 10}}));
}

TEST(MatchOrder, TimePriorityWithinLevel) {
  book_state b;
  b.seed_resting(1, side::sell, 50, 5);
  b.seed_resting(2, side::sell, 50, 5);
  auto [book, trades, cp] = match_order(b, add(3, 50, 7, side::buy));
  ASSERT_EQ(trades.size(), 2u);
  EXPECT_EQ(trades[0].maker_ref, 1u);
  EXPECT_EQ(trades[0].quantity, 5);
  EXPECT_EQ(trades[1].maker_ref, 2u);
  EXPECT_EQ(trades[1].quantity, 2);
  EXPECT_EQ(book.resting_quantity(2), 3);
}

TEST(MatchOrder, RejectsNonAdd) {
  order_event e = add(9, 1, 1, side::buy);
  e.a = action::remove;
  EXPECT_THROW(match_order(book_state{}, e), data_error);
}

TEST(MatchOrder, ConservationAndNoCrossRandom) {
  splitmix_engine rng(17);
  book_state book;
  for (std::uint64_t ref = 1; ref <= 3000; ++ref) {
    const side s = rng.uniform() < 0.5 ? side::buy : side::sell;
    const double px = 90.0 + std::floor(rng.uniform() * 200.0) * 0.1;
    const std::int64_t qty = 1 + static_cast<std::int64_t>(rng.uniform() * 50);
    std::int64_t before = 0;
    for (const auto& l : book.bid_levels()) before += l.second;
    for (const auto& l : book.ask_levels()) before += l.second;
    auto [next, trades, cp] = match_order(book, add(ref, px, qty, s));
    std::int64_t traded = 0;
    for (const auto& t : trades) {
      traded += t.quantity;
      EXPECT_GT(t.quantity, 0);
      if (s == side::buy) {
        EXPECT_LE(to_ticks(t.price), to_ticks(px));
      } else {
        EXPECT_GE(to_ticks(t.price), to_ticks(px));
      }
    }
    std::int64_t after = 0;
    for (const auto& l : next.bid_levels()) after += l.second;
    for (const auto& l : next.ask_levels()) after += l.second;
    // the taker's filled quantity equals the makers' lost quantity
    EXPECT_EQ(before + qty - 2 * traded, after);
    EXPECT_FALSE(next.crossed());
    book = std::move(next);
  }
}

TEST(BookState, ModifyAndDelete) {
  book_state b = example_book();
  b.apply({2, 1, 120, 4, side::sell, action::modify});
  EXPECT_EQ(b.resting_quantity(2), 4);
  b.apply({2, 2, 110, 4, side::sell, action::modify});  // new price resets priority
  EXPECT_EQ(b.ask_levels(), (levels{{110.0, 4}, {130.0, 10}}));
  b.apply({3, 3, 0, 0, side::sell, action::remove});
  EXPECT_EQ(b.ask_levels(), (levels{{110.0, 4}}));
  b.apply({3, 4, 0, 0, side::sell, action::remove});
  EXPECT_EQ(b.stale_count(), 1u);
}

TEST(ParseEvents, EmptyBodyAndOneRow) {
  std::istringstream empty(std::string(event_csv_header) + "\n");
  EXPECT_TRUE(parse_events(empty).events.empty());
  std::istringstream one(std::string(event_csv_header) + "\n1,0,120.0,10,S,A\n");
  const auto ev = parse_events(one).events;
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].ref_id, 1u);
  EXPECT_EQ(ev[0].price, 120.0);
  EXPECT_EQ(ev[0].quantity, 10);
  EXPECT_EQ(ev[0].s, side::sell);
  EXPECT_EQ(ev[0].a, action::add);
}

TEST(ParseEvents, ReportsBadRowsWithLineNumbers) {
  std::istringstream in(std::string(event_csv_header) + "\n1,0,120.0,10,S,A\n2,5,121,10,S,M\n3,6,1,1,X,A\n4,7,1,1,B,Q\n");
  try {
    parse_events(in);
    FAIL() << "expected a parse error";
  } catch (const parse_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos);
    EXPECT_NE(msg.find("line 4"), std::string::npos);
    EXPECT_NE(msg.find("line 5"), std::string::npos);
  }
  std::istringstream again(std::string(event_csv_header) + "\n1,0,120.0,10,S,A\n2,5,121,10,S,M\n");
  const auto r = parse_events(again, {false});
  EXPECT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.issues.size(), 1u);
  std::istringstream nohdr("1,0,120.0,10,S,A\n");
  EXPECT_THROW(parse_events(nohdr), parse_error);
}

TEST(ParseEvents, SortsByTimestampAndRoundTrips) {
  std::vector<order_event> ev{add(1, 100.5, 3, side::buy, 10), add(2, 101.25, 4, side::sell, 5)};
  std::stringstream ss;
  write_events(ss, ev);
  const auto back = parse_events(ss).events;
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].ref_id, 2u);
  EXPECT_EQ(back[1].price, 100.5);
}

TEST(BuildSurface, SingleBuyBookkeeping) {
  const auto px = price_axis(100.0, 1.0, 10);
  time_axis tx{0, 1000, 3, 1.0};
  const auto s = build_surface({add(1, 103.5, 10, side::buy, 0)}, px, tx);
  for (int j = 0; j <= 3; ++j)
    for (int i = 0; i <= 10; ++i) EXPECT_EQ(s.Q(i, j), i <= 3 ? 10.0 : 0.0) << i << "," << j;
  EXPECT_EQ(s.q(4, 0), 10.0);
}

TEST(BuildSurface, BoundaryConvention) {
  const auto px = price_axis(100.0, 1.0, 4);
  time_axis tx{0, 1000, 1, 1.0};
  const auto s = build_surface({add(1, 102, 5, side::buy), add(2, 103, 7, side::sell)}, px, tx);
  EXPECT_EQ(s.Q(2, 0), 5.0);   // buy at the node counts
  EXPECT_EQ(s.Q(3, 0), -7.0);  // sell at the node counts
  EXPECT_EQ(s.Q(0, 0), 5.0);
  EXPECT_EQ(s.Q(4, 0), -7.0);
}

TEST(BuildSurface, CancelledBeforeFirstStep) {
  const auto px = price_axis(100.0, 1.0, 5);
  time_axis tx{0, 1000, 3, 1.0};
  std::vector<order_event> ev{add(1, 102, 5, side::buy, 100), {1, 500, 102, 5, side::buy, action::remove}};
  surface_report rep;
  const auto s = build_surface(ev, px, tx, &rep);
  EXPECT_EQ(s.Q.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(rep.events_used, 2u);
}

TEST(BuildSurface, CountsEventsOutsideWindow) {
  const auto px = price_axis(100.0, 1.0, 5);
  time_axis tx{1000, 1000, 2, 1.0};
  surface_report rep;
  build_surface({add(1, 102, 5, side::buy, 500), add(2, 102, 5, side::buy, 9000)}, px, tx, &rep);
  EXPECT_EQ(rep.events_outside_time, 2u);
}

TEST(BuildSurface, AaplGridShape) {
  const auto px = price_axis::spanning(344.24, 350.96, 100);
  EXPECT_NEAR(px.dp, 0.0672, 1e-12);
  time_axis tx;
  EXPECT_EQ(tx.n_steps, 78);
  EXPECT_EQ(tx.stamp(78), session_ms);
}

TEST(Synth, ZeroIntensityIsEmpty) {
  generator_config g;
  g.initial_orders = 0;
  g.arrival_rate = 0.0;
  EXPECT_TRUE(synthesize_events(g, 1).empty());
  g.arrival_rate = -1.0;
  EXPECT_THROW(synthesize_events(g, 1), config_error);
}

TEST(Synth, BuyOnlyIsNonNegative) {
  generator_config g;
  g.initial_orders = 500;
  g.arrival_rate = 0.05;
  g.mid0 = 351.5;  // mid above the window: every limit order is a buy
  g.hump = 0.0;
  g.mid_vol = 0.0;
  g.marketable_prob = 0.0;
  const auto ev = synthesize_events(g, 3);
  ASSERT_FALSE(ev.empty());
  for (const auto& e : ev) EXPECT_EQ(e.s, side::buy);
  const auto s = build_surface(ev, price_axis::spanning(g.p_lo, g.p_hi, g.n_cells), time_axis{});
  EXPECT_GE(s.Q.minCoeff(), 0.0);
}

TEST(Synth, DefaultStreamPassesInvariants) {
  generator_config g;
  const auto ev = synthesize_events(g, 11);
  EXPECT_GT(ev.size(), 100000u);
  EXPECT_TRUE(std::is_sorted(ev.begin(), ev.end(),
                             [](const order_event& a, const order_event& b) { return a.timestamp_ms < b.timestamp_ms; }));
  surface_report rep;
  const auto s = build_surface(ev, price_axis::spanning(g.p_lo, g.p_hi, g.n_cells), time_axis{}, &rep);
  const auto c = check_surface(s);
  EXPECT_TRUE(c.monotone);
  EXPECT_TRUE(c.density_nonnegative);
  EXPECT_EQ(rep.prices_clipped, 0u);
  EXPECT_GT(s.Q(0, 0), 0.0);
  EXPECT_LT(s.Q(100, 0), 0.0);
  // same seed, same stream
  const auto ev2 = synthesize_events(g, 11);
  ASSERT_EQ(ev.size(), ev2.size());
  EXPECT_EQ(ev.back().ref_id, ev2.back().ref_id);
}

TEST(SurfaceCsv, RoundTrip) {
  const auto px = price_axis(100.0, 0.5, 4);
  time_axis tx{0, 1000, 2, 1.0};
  const auto s = build_surface({add(1, 101, 5, side::buy), add(2, 101.5, 3, side::sell, 1500)}, px, tx);
  std::stringstream ss;
  write_surface(ss, s);
  const auto back = read_surface(ss);
  EXPECT_EQ(back.Q, s.Q);
  EXPECT_EQ(back.q, s.q);
  EXPECT_EQ(back.prices, s.prices);
}
