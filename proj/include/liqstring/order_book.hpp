#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "io.hpp"

namespace liqstring {

enum class side : char { buy = 'B', sell = 'S' };
enum class action : char { add = 'A', modify = 'M', remove = 'D' };

struct order_event {
  std::uint64_t ref_id = 0;
  std::int64_t timestamp_ms = 0;
  double price = 0.0;
  std::int64_t quantity = 0;
  side s = side::buy;
  action a = action::add;
};

// Prices live on an integer grid of 1e-4 dollars inside the book.
inline constexpr double price_tick = 1e-4;
inline std::int64_t to_ticks(double price) { return std::llround(price / price_tick); }
inline double from_ticks(std::int64_t t) { return static_cast<double>(t) * price_tick; }

struct trade {
  double price = 0.0;
  std::int64_t quantity = 0;
  std::uint64_t maker_ref = 0;
  std::uint64_t taker_ref = 0;
};

struct match_result {
  std::vector<trade> trades;
  std::optional<double> clearing_price;
  std::int64_t rested = 0;  // quantity left in the book
};

struct resting_order {
  std::uint64_t ref_id = 0;
  std::int64_t quantity = 0;
};

class book_state {
 public:
  using level = std::deque<resting_order>;
  using bid_map = std::map<std::int64_t, level, std::greater<>>;
  using ask_map = std::map<std::int64_t, level, std::less<>>;

  const bid_map& bids() const { return bids_; }
  const ask_map& asks() const { return asks_; }
  std::optional<double> last_clearing_price() const { return last_clearing_; }
  std::uint64_t stale_count() const { return stale_; }
  std::size_t order_count() const { return index_.size(); }

  bool contains(std::uint64_t ref) const { return index_.count(ref) != 0; }

  std::optional<std::int64_t> best_bid_ticks() const {
    if (bids_.empty()) return std::nullopt;
    return bids_.begin()->first;
  }
  std::optional<std::int64_t> best_ask_ticks() const {
    if (asks_.empty()) return std::nullopt;
    return asks_.begin()->first;
  }
  bool crossed() const {
    return !bids_.empty() && !asks_.empty() && bids_.begin()->first >= asks_.begin()->first;
  }

  // Aggregated (price, quantity) per level in priority order.
  std::vector<std::pair<double, std::int64_t>> bid_levels() const { return aggregate(bids_); }
  std::vector<std::pair<double, std::int64_t>> ask_levels() const { return aggregate(asks_); }

  // Incoming limit order: cross while possible, rest the remainder.
  match_result submit(const order_event& e) {
    if (e.quantity <= 0) throw data_error("order quantity must be positive");
    if (index_.count(e.ref_id)) throw data_error("duplicate live ref_id " + std::to_string(e.ref_id));
    const std::int64_t px = to_ticks(e.price);
    match_result r;
    std::int64_t left = e.quantity;
    if (e.s == side::buy)
      left = sweep(asks_, left, e.ref_id, r, [px](std::int64_t lvl) { return lvl <= px; });
    else
      left = sweep(bids_, left, e.ref_id, r, [px](std::int64_t lvl) { return lvl >= px; });
    if (left > 0) {
      if (e.s == side::buy)
        bids_[px].push_back({e.ref_id, left});
      else
        asks_[px].push_back({e.ref_id, left});
      index_[e.ref_id] = {e.s, px};
    }
    r.rested = left;
    if (!r.trades.empty()) {
      r.clearing_price = r.trades.back().price;
      last_clearing_ = r.clearing_price;
    }
    return r;
  }

  // False when the order is no longer in the book.
  bool cancel(std::uint64_t ref) {
    auto it = index_.find(ref);
    if (it == index_.end()) {
      ++stale_;
      return false;
    }
    const auto [s, px] = it->second;
    index_.erase(it);
    if (s == side::buy)
      erase_from(bids_, px, ref);
    else
      erase_from(asks_, px, ref);
    return true;
  }

  // Same price and smaller size keeps priority; anything else cancels and re-adds.
  match_result modify(const order_event& e) {
    auto it = index_.find(e.ref_id);
    if (it == index_.end()) {
      ++stale_;
      return {};
    }
    if (e.quantity <= 0) throw data_error("modify quantity must be positive");
    const auto [s, px] = it->second;
    const std::int64_t new_px = to_ticks(e.price);
    if (s == e.s && new_px == px) {
      level& lv = s == side::buy ? bids_.at(px) : asks_.at(px);
      for (auto& o : lv)
        if (o.ref_id == e.ref_id && e.quantity < o.quantity) {
          o.quantity = e.quantity;
          match_result r;
          r.rested = e.quantity;
          return r;
        }
    }
    cancel(e.ref_id);
    return submit(e);
  }

  match_result apply(const order_event& e) {
    switch (e.a) {
      case action::add: return submit(e);
      case action::modify: return modify(e);
      case action::remove: cancel(e.ref_id); return {};
    }
    return {};
  }

  std::int64_t resting_quantity(std::uint64_t ref) const {
    auto it = index_.find(ref);
    if (it == index_.end()) return 0;
    const auto& lvls = it->second.s == side::buy ? level_of(bids_, it->second.ticks) : level_of(asks_, it->second.ticks);
    for (const auto& o : lvls)
      if (o.ref_id == ref) return o.quantity;
    return 0;
  }

  // Place a resting order without matching; used to set up a known book.
  void seed_resting(std::uint64_t ref, side s, double price, std::int64_t qty) {
    order_event e{ref, 0, price, qty, s, action::add};
    const std::int64_t px = to_ticks(price);
    if ((s == side::buy && best_ask_ticks() && *best_ask_ticks() <= px) ||
        (s == side::sell && best_bid_ticks() && *best_bid_ticks() >= px))
      throw data_error("seed_resting would cross the book");
    submit(e);
  }

 private:
  struct locator {
    side s;
    std::int64_t ticks;
  };

  template <class Map, class Pred>
  std::int64_t sweep(Map& book, std::int64_t left, std::uint64_t taker, match_result& r, Pred crosses) {
    while (left > 0 && !book.empty() && crosses(book.begin()->first)) {
      auto lvl = book.begin();
      level& q = lvl->second;
      while (left > 0 && !q.empty()) {
        resting_order& maker = q.front();
        const std::int64_t fill = std::min(left, maker.quantity);
        r.trades.push_back({from_ticks(lvl->first), fill, maker.ref_id, taker});
        left -= fill;
        maker.quantity -= fill;
        if (maker.quantity == 0) {
          index_.erase(maker.ref_id);
          q.pop_front();
        }
      }
      if (q.empty()) book.erase(lvl);
    }
    return left;
  }

  template <class Map>
  static void erase_from(Map& book, std::int64_t px, std::uint64_t ref) {
    auto lvl = book.find(px);
    if (lvl == book.end()) return;
    auto& q = lvl->second;
    q.erase(std::remove_if(q.begin(), q.end(), [ref](const resting_order& o) { return o.ref_id == ref; }), q.end());
    if (q.empty()) book.erase(lvl);
  }

  template <class Map>
  static const level& level_of(const Map& book, std::int64_t px) {
    return book.at(px);
  }

  template <class Map>
  static std::vector<std::pair<double, std::int64_t>> aggregate(const Map& book) {
    std::vector<std::pair<double, std::int64_t>> out;
    out.reserve(book.size());
    for (const auto& [px, q] : book) {
      std::int64_t total = 0;
      for (const auto& o : q) total += o.quantity;
      out.emplace_back(from_ticks(px), total);
    }
    return out;
  }

  bid_map bids_;
  ask_map asks_;
  std::unordered_map<std::uint64_t, locator> index_;
  std::optional<double> last_clearing_;
  std::uint64_t stale_ = 0;
};

// Value-semantics wrapper: match one Add against a copy of the book.
inline std::tuple<book_state, std::vector<trade>, std::optional<double>> match_order(book_state book,
                                                                                  const order_event& incoming) {
  if (incoming.a != action::add) throw data_error("match_order expects an Add event");
  match_result r = book.submit(incoming);
  return {std::move(book), std::move(r.trades), r.clearing_price};
}

// Event CSV ---------------------------------------------------------------

inline constexpr const char* event_csv_header = "ref_id,timestamp_ms,price,quantity,side,action";

struct parse_issue {
  std::size_t line = 0;
  std::string message;
};

struct parse_result {
  std::vector<order_event> events;
  std::vector<parse_issue> issues;
};

struct parse_options {
  bool strict = true;  // throw listing every bad line
};

inline std::string describe(const std::vector<parse_issue>& issues) {
  std::string msg;
  for (const auto& i : issues) msg += "line " + std::to_string(i.line) + ": " + i.message + "\n";
  return msg;
}

inline parse_result parse_events(std::istream& in, parse_options opt = {}) {
  parse_result out;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::vector<std::size_t> lines;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    if (!have_header) {
      if (sv != event_csv_header)
        throw parse_error("line " + std::to_string(lineno) + ": expected header '" + event_csv_header + "'");
      have_header = true;
      continue;
    }
    const auto f = split_csv(sv);
    if (f.size() != 6) {
      out.issues.push_back({lineno, "expected 6 fields, got " + std::to_string(f.size())});
      continue;
    }
    order_event e;
    if (!parse_number(f[0], e.ref_id)) {
      out.issues.push_back({lineno, "bad ref_id '" + std::string(f[0]) + "'"});
      continue;
    }
    if (!parse_number(f[1], e.timestamp_ms) || e.timestamp_ms < 0) {
      out.issues.push_back({lineno, "bad timestamp '" + std::string(f[1]) + "'"});
      continue;
    }
    if (!parse_number(f[2], e.price) || !(e.price >= 0.0) || !std::isfinite(e.price)) {
      out.issues.push_back({lineno, "bad price '" + std::string(f[2]) + "'"});
      continue;
    }
    if (!parse_number(f[3], e.quantity) || e.quantity <= 0) {
      out.issues.push_back({lineno, "bad quantity '" + std::string(f[3]) + "'"});
      continue;
    }
    if (f[4] == "B")
      e.s = side::buy;
    else if (f[4] == "S")
      e.s = side::sell;
    else {
      out.issues.push_back({lineno, "unknown side code '" + std::string(f[4]) + "'"});
      continue;
    }
    if (f[5] == "A")
      e.a = action::add;
    else if (f[5] == "M")
      e.a = action::modify;
    else if (f[5] == "D")
      e.a = action::remove;
    else {
      out.issues.push_back({lineno, "unknown action code '" + std::string(f[5]) + "'"});
      continue;
    }
    out.events.push_back(e);
    lines.push_back(lineno);
  }
  if (!have_header) {
    if (lineno == 0) return out;
    throw parse_error("missing header row");
  }

  std::vector<std::size_t> order(out.events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.events[a].timestamp_ms < out.events[b].timestamp_ms;
  });

  std::vector<order_event> sorted;
  sorted.reserve(order.size());
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t idx : order) {
    const order_event& e = out.events[idx];
    if (e.a == action::add) {
      seen.insert(e.ref_id);
    } else if (!seen.count(e.ref_id)) {
      out.issues.push_back({lines[idx], std::string(e.a == action::modify ? "Modify" : "Delete") +
                                            " references unseen ref_id " + std::to_string(e.ref_id)});
      continue;
    }
    sorted.push_back(e);
  }
  out.events = std::move(sorted);
  std::sort(out.issues.begin(), out.issues.end(),
            [](const parse_issue& a, const parse_issue& b) { return a.line < b.line; });
  if (opt.strict && !out.issues.empty()) throw parse_error("malformed event rows:\n" + describe(out.issues));
  return out;
}

inline std::string format_price(double price) {
  // Four decimals at most, trailing zeros trimmed.
  std::int64_t t = to_ticks(price);
  std::string s = std::to_string(t / 10000) + "." ;
  std::string frac = std::to_string(t % 10000);
  frac.insert(0, 4 - frac.size(), '0');
  while (frac.size() > 1 && frac.back() == '0') frac.pop_back();
  return s + frac;
}

inline void write_events(std::ostream& os, const std::vector<order_event>& events) {
  os << event_csv_header << '\n';
  for (const auto& e : events)
    os << e.ref_id << ',' << e.timestamp_ms << ',' << format_price(e.price) << ',' << e.quantity << ','
       << static_cast<char>(e.s) << ',' << static_cast<char>(e.a) << '\n';
}

inline void print_book(std::ostream& os, const book_state& b) {
  // Both sides listed by ascending price.
  auto bids = b.bid_levels();
  std::reverse(bids.begin(), bids.end());
  os << "Buy book\n";
  for (const auto& [p, q] : bids) os << "  " << format_price(p) << " " << q << '\n';
  os << "Sell book\n";
  for (const auto& [p, q] : b.ask_levels()) os << "  " << format_price(p) << " " << q << '\n';
}

}  // namespace liqstring
