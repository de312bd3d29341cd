#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "grid.hpp"
#include "io.hpp"
#include "order_book.hpp"
#include "rng.hpp"

namespace liqstring {

// Snapshot times t0_ms + j*step_ms, j = 0..n_steps, mapped to model time j*horizon/n_steps.
struct time_axis {
  std::int64_t t0_ms = 0;
  std::int64_t step_ms = 300000;
  int n_steps = 78;
  double horizon = 1.0;

  std::int64_t stamp(int j) const { return t0_ms + step_ms * j; }
  double t(int j) const { return j == n_steps ? horizon : horizon * j / n_steps; }
};

inline constexpr std::int64_t session_ms = 23400000;  // 9:30 to 16:00

// Q(p_i, t_j) and q(p_i, t_j); columns are times. q at p_0 is undefined and stored as 0.
struct demand_surface {
  std::vector<double> prices;
  std::vector<double> times;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd q;

  int n_prices() const { return static_cast<int>(prices.size()); }
  int n_times() const { return static_cast<int>(times.size()); }
  double dp() const { return prices.size() > 1 ? (prices.back() - prices.front()) / (prices.size() - 1) : 0.0; }
  price_axis axis() const { return price_axis(prices.front(), dp(), n_prices() - 1); }
};

struct surface_report {
  std::uint64_t events_used = 0;
  std::uint64_t events_outside_time = 0;
  std::uint64_t prices_clipped = 0;
  std::uint64_t stale_refs = 0;
  std::uint64_t trades = 0;
};

// Backward differences, q(p_i) = -(Q(p_i) - Q(p_{i-1}))/dp.
inline void fill_density(demand_surface& s) {
  const double dp = s.dp();
  s.q = Eigen::MatrixXd::Zero(s.Q.rows(), s.Q.cols());
  for (int j = 0; j < s.Q.cols(); ++j)
    for (int i = 1; i < s.Q.rows(); ++i) s.q(i, j) = -(s.Q(i, j) - s.Q(i - 1, j)) / dp;
}

namespace detail {
inline void snapshot(const book_state& book, const price_axis& px, Eigen::Ref<Eigen::VectorXd> col) {
  const int n = px.n;
  const double half_tick = 0.5 * price_tick;
  std::vector<double> buy_at(n + 2, 0.0), sell_at(n + 2, 0.0);
  for (const auto& [p, qty] : book.bid_levels()) {
    // counts at nodes p_i <= p
    const double pc = std::clamp(p, px.p_lo, px.p_hi());
    int top = static_cast<int>(std::floor((pc - px.p_lo + half_tick) / px.dp));
    top = std::clamp(top, 0, n);
    buy_at[top] += static_cast<double>(qty);
  }
  for (const auto& [p, qty] : book.ask_levels()) {
    // counts at nodes p_i >= p
    const double pc = std::clamp(p, px.p_lo, px.p_hi());
    int bottom = static_cast<int>(std::ceil((pc - px.p_lo - half_tick) / px.dp));
    bottom = std::clamp(bottom, 0, n);
    sell_at[bottom] += static_cast<double>(qty);
  }
  double buys = 0.0;
  for (int i = n; i >= 0; --i) {
    buys += buy_at[i];
    col[i] = buys;
  }
  double sells = 0.0;
  for (int i = 0; i <= n; ++i) {
    sells += sell_at[i];
    col[i] -= sells;
  }
}
}  // namespace detail

// Replays events through the matching engine and records resting net demand at each snapshot.
inline demand_surface build_surface(const std::vector<order_event>& events, const price_axis& px,
                                    const time_axis& tx, surface_report* report = nullptr) {
  if (tx.n_steps <= 0 || tx.step_ms <= 0) throw config_error("time axis needs positive steps");
  demand_surface s;
  s.prices.resize(px.n + 1);
  for (int i = 0; i <= px.n; ++i) s.prices[i] = px.at(i);
  s.times.resize(tx.n_steps + 1);
  for (int j = 0; j <= tx.n_steps; ++j) s.times[j] = tx.t(j);
  s.Q = Eigen::MatrixXd::Zero(px.n + 1, tx.n_steps + 1);

  surface_report rep;
  book_state book;
  std::size_t next = 0;
  const std::int64_t last = tx.stamp(tx.n_steps);
  for (int j = 0; j <= tx.n_steps; ++j) {
    const std::int64_t cut = tx.stamp(j);
    while (next < events.size() && events[next].timestamp_ms <= cut) {
      const order_event& e = events[next++];
      if (e.timestamp_ms < tx.t0_ms || e.timestamp_ms > last) {
        ++rep.events_outside_time;
        continue;
      }
      if (e.a != action::remove && (e.price < px.p_lo || e.price > px.p_hi())) ++rep.prices_clipped;
      rep.trades += book.apply(e).trades.size();
      ++rep.events_used;
    }
    detail::snapshot(book, px, s.Q.col(j));
  }
  rep.events_outside_time += events.size() - next;
  rep.stale_refs = book.stale_count();
  fill_density(s);
  if (report) *report = rep;
  return s;
}

struct surface_check {
  bool monotone = true;
  bool density_nonnegative = true;
  int first_bad_time = -1;
  int first_bad_price = -1;
  bool ok() const { return monotone && density_nonnegative; }
};

inline surface_check check_surface(const demand_surface& s, double tol = 0.0) {
  surface_check c;
  for (int j = 0; j < s.Q.cols(); ++j)
    for (int i = 1; i < s.Q.rows(); ++i) {
      if (s.Q(i, j) > s.Q(i - 1, j) + tol) {
        if (c.monotone) c.first_bad_time = j, c.first_bad_price = i;
        c.monotone = false;
      }
      if (s.q(i, j) < -tol) c.density_nonnegative = false;
    }
  return c;
}

// Synthetic event stream -------------------------------------------------

struct generator_config {
  double p_lo = 344.24;
  double p_hi = 350.96;
  int n_cells = 100;
  std::int64_t session = session_ms;
  double mid0 = 347.60;
  double hump = 0.05;          // dollars, rise then fall of the reference mid
  double mid_vol = 0.05;       // dollars per sqrt(session)
  int initial_orders = 40000;
  double arrival_rate = 1.0;   // adds per second
  double mean_lifetime_s = 40000.0;
  double modify_prob = 0.1;
  double marketable_prob = 0.001;
  double price_halfwidth = 1e9;  // dollars around mid; the window bounds it anyway
  int lot = 100;
  int max_lots = 1;
  int reprice_per_arrival = 1;

  void validate() const {
    if (!(arrival_rate >= 0.0) || initial_orders < 0) throw config_error("generator: negative intensity");
    if (!(mean_lifetime_s > 0.0)) throw config_error("generator: lifetime must be positive");
    if (!(p_hi > p_lo) || p_lo < 0.0) throw config_error("generator: bad price window");
    if (modify_prob < 0.0 || modify_prob > 1.0 || marketable_prob < 0.0 || marketable_prob > 1.0)
      throw config_error("generator: probabilities must lie in [0,1]");
    if (lot <= 0 || max_lots <= 0) throw config_error("generator: lot sizes must be positive");
    if (!(price_halfwidth > 0.0)) throw config_error("generator: price_halfwidth must be positive");
    if (reprice_per_arrival < 0) throw config_error("generator: reprice_per_arrival must be >= 0");
    if (session <= 0) throw config_error("generator: session length must be positive");
  }
};

inline std::vector<order_event> synthesize_events(const generator_config& cfg, std::uint64_t seed) {
  cfg.validate();
  splitmix_engine rng(seed);
  const double sess = static_cast<double>(cfg.session);

  // Reference mid on a one-second lattice.
  const int n_sec = static_cast<int>(cfg.session / 1000) + 1;
  std::vector<double> walk(n_sec + 1, 0.0);
  const double step_sd = cfg.mid_vol / std::sqrt(static_cast<double>(n_sec));
  for (int k = 1; k <= n_sec; ++k) walk[k] = walk[k - 1] + step_sd * rng.normal();
  auto mid_at = [&](std::int64_t ms) {
    const double u = std::min(1.0, static_cast<double>(ms) / sess);
    const int k = std::min(n_sec, static_cast<int>(ms / 1000));
    const double m = cfg.mid0 + cfg.hump * std::sin(3.14159265358979323846 * u) + walk[k];
    // a mid placed outside the window stays there (one-sided stream)
    if (cfg.mid0 <= cfg.p_lo || cfg.mid0 >= cfg.p_hi) return m;
    return std::clamp(m, cfg.p_lo + 0.5 * (cfg.p_hi - cfg.p_lo) / cfg.n_cells,
                      cfg.p_hi - 0.5 * (cfg.p_hi - cfg.p_lo) / cfg.n_cells);
  };
  auto draw_price = [&](double mid) {
    const double lo = std::max(cfg.p_lo, mid - cfg.price_halfwidth);
    const double hi = std::min(cfg.p_hi, mid + cfg.price_halfwidth);
    double p = 0.0;
    for (;;) {
      p = from_ticks(to_ticks(lo + (hi - lo) * rng.uniform()));
      if (p >= cfg.p_lo && p <= cfg.p_hi && p != from_ticks(to_ticks(mid))) break;
    }
    return p;
  };
  auto draw_qty = [&] {
    const int lots = 1 + static_cast<int>(rng.uniform() * cfg.max_lots);
    return static_cast<std::int64_t>(std::min(lots, cfg.max_lots)) * cfg.lot;
  };

  struct pending {
    std::int64_t t;
    std::uint64_t seq;
    order_event e;
    bool operator>(const pending& o) const { return t != o.t ? t > o.t : seq > o.seq; }
  };
  std::priority_queue<pending, std::vector<pending>, std::greater<>> later;
  std::uint64_t seq = 0;
  std::uint64_t next_ref = 1;
  std::vector<order_event> out;
  book_state book;

  auto emit = [&](const order_event& e) {
    book.apply(e);
    out.push_back(e);
  };
  auto schedule_life = [&](const order_event& add) {
    const std::int64_t life = std::max<std::int64_t>(1, std::llround(rng.exponential(1.0 / cfg.mean_lifetime_s) * 1000.0));
    const std::int64_t cut = std::max(1, cfg.lot / 2);
    if (rng.uniform() < cfg.modify_prob && add.quantity > cut) {
      order_event m = add;
      m.a = action::modify;
      m.quantity = add.quantity - cut;
      m.timestamp_ms = add.timestamp_ms + life / 2;
      later.push({m.timestamp_ms, seq++, m});
    }
    order_event d = add;
    d.a = action::remove;
    d.timestamp_ms = add.timestamp_ms + life;
    later.push({d.timestamp_ms, seq++, d});
  };
  auto new_limit = [&](std::int64_t t) {
    const double mid = mid_at(t);
    order_event e;
    e.ref_id = next_ref++;
    e.timestamp_ms = t;
    e.quantity = draw_qty();
    e.a = action::add;
    if (rng.uniform() < cfg.marketable_prob) {
      e.s = rng.uniform() < 0.5 ? side::buy : side::sell;
      e.price = e.s == side::buy ? cfg.p_hi : cfg.p_lo;
      e.quantity = cfg.lot;
    } else {
      e.price = draw_price(mid);
      e.s = e.price < mid ? side::buy : side::sell;
      // A limit order that would cross rests on the other side instead.
      const std::int64_t px = to_ticks(e.price);
      if (e.s == side::buy && book.best_ask_ticks() && px >= *book.best_ask_ticks()) e.s = side::sell;
      else if (e.s == side::sell && book.best_bid_ticks() && px <= *book.best_bid_ticks()) e.s = side::buy;
    }
    emit(e);
    if (book.contains(e.ref_id)) schedule_life(e);
  };

  // Stale quotes on the wrong side of the reference mid are pulled and re-entered on the other side
  // at the same price, so the book follows the mid without draining any price cell.
  auto reprice = [&](std::int64_t t) {
    const std::int64_t mid = to_ticks(mid_at(t));
    for (int n = 0; n < cfg.reprice_per_arrival; ++n) {
      const auto ba = book.best_ask_ticks();
      const auto bb = book.best_bid_ticks();
      const bool ask_stale = ba && *ba < mid;
      const bool bid_stale = bb && *bb > mid;
      if (!ask_stale && !bid_stale) return;
      // the whole level moves, otherwise the re-entered order would trade with its neighbours
      const std::deque<resting_order> level =
          ask_stale ? book.asks().begin()->second : book.bids().begin()->second;
      const double price = from_ticks(ask_stale ? *ba : *bb);
      const side from = ask_stale ? side::sell : side::buy;
      for (const auto& victim : level) emit({victim.ref_id, t, price, victim.quantity, from, action::remove});
      for (const auto& victim : level) {
        order_event e{next_ref++, t, price, victim.quantity, from == side::sell ? side::buy : side::sell, action::add};
        emit(e);
        if (book.contains(e.ref_id)) schedule_life(e);
      }
    }
  };

  for (int i = 0; i < cfg.initial_orders; ++i) new_limit(0);

  const double rate_ms = cfg.arrival_rate / 1000.0;
  double t_next = rate_ms > 0.0 ? rng.exponential(rate_ms) : sess + 1.0;
  for (;;) {
    const std::int64_t arrival = static_cast<std::int64_t>(std::ceil(t_next));
    const bool arrivals_left = t_next <= sess;
    if (!later.empty() && (!arrivals_left || later.top().t <= arrival)) {
      pending p = later.top();
      later.pop();
      if (p.t > cfg.session) continue;
      if (!book.contains(p.e.ref_id)) continue;
      emit(p.e);
      continue;
    }
    if (!arrivals_left) break;
    new_limit(arrival);
    reprice(arrival);
    t_next += rng.exponential(rate_ms);
  }
  return out;
}

// Surface CSV (long format) ---------------------------------------------

inline constexpr const char* surface_csv_header = "t_index,p_index,t,p,Q,q";

inline void write_surface(std::ostream& os, const demand_surface& s) {
  os << surface_csv_header << '\n';
  for (int j = 0; j < s.n_times(); ++j)
    for (int i = 0; i < s.n_prices(); ++i)
      os << j << ',' << i << ',' << fmt_double(s.times[j]) << ',' << fmt_double(s.prices[i]) << ','
         << fmt_double(s.Q(i, j)) << ',' << fmt_double(s.q(i, j)) << '\n';
}

inline demand_surface read_surface(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != surface_csv_header)
    throw parse_error("surface CSV: expected header '" + std::string(surface_csv_header) + "'");
  struct row { int j, i; double t, p, Q, q; };
  std::vector<row> rows;
  int max_i = -1, max_j = -1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    row r{};
    if (f.size() != 6 || !parse_number(f[0], r.j) || !parse_number(f[1], r.i) || !parse_number(f[2], r.t) ||
        !parse_number(f[3], r.p) || !parse_number(f[4], r.Q) || !parse_number(f[5], r.q) || r.i < 0 || r.j < 0)
      throw parse_error("surface CSV line " + std::to_string(lineno) + ": malformed row");
    max_i = std::max(max_i, r.i);
    max_j = std::max(max_j, r.j);
    rows.push_back(r);
  }
  if (rows.empty()) throw data_error("surface CSV has no rows");
  const std::size_t expect = static_cast<std::size_t>(max_i + 1) * static_cast<std::size_t>(max_j + 1);
  if (rows.size() != expect) throw data_error("surface CSV is not a full grid");
  demand_surface s;
  s.prices.assign(max_i + 1, 0.0);
  s.times.assign(max_j + 1, 0.0);
  s.Q = Eigen::MatrixXd::Zero(max_i + 1, max_j + 1);
  s.q = Eigen::MatrixXd::Zero(max_i + 1, max_j + 1);
  for (const auto& r : rows) {
    s.prices[r.i] = r.p;
    s.times[r.j] = r.t;
    s.Q(r.i, r.j) = r.Q;
    s.q(r.i, r.j) = r.q;
  }
  return s;
}

}  // namespace liqstring
