#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "mx/feed_parser.hpp"
#include "mx/l1.hpp"

namespace mx::lob {

/// Recoverable feed inconsistencies. In lenient mode they are counted and the book
/// is left unchanged; in strict mode they raise BookError.
struct AnomalyCounts {
    std::size_t unknown_ref = 0;     // cancel/modify/trade of an order not in the book
    std::size_t duplicate_ref = 0;   // add of an order already resting
    std::size_t overfill = 0;        // trade larger than the resting quantity
    std::size_t bad_quantity = 0;    // add/modify with quantity <= 0
    std::size_t wrong_security = 0;
    std::size_t busts = 0;           // trade busts, logged only

    std::size_t total() const {
        return unknown_ref + duplicate_ref + overfill + bad_quantity + wrong_security;
    }
    AnomalyCounts& operator+=(const AnomalyCounts& o);
    bool operator==(const AnomalyCounts&) const = default;
};

class BookError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Mode { Strict, Lenient };

struct RestingOrder {
    Price price;
    Quantity qty = 0;
    Nanos priority_ns = 0;
    std::uint64_t arrival = 0;  // tie-break for equal priority_ns
};

/// The single priority order at the top of a side.
struct Best {
    OrderRef ref = 0;
    Price price;
    Quantity qty = 0;
    bool operator==(const Best&) const = default;
};

struct Level {
    Price price;
    Quantity qty = 0;
    bool operator==(const Level&) const = default;
};

struct DepthSnapshot {
    Nanos ts = 0;
    std::vector<Level> bids;  // strictly descending price
    std::vector<Level> asks;  // strictly ascending price
    bool operator==(const DepthSnapshot&) const = default;
};

std::string depth_json(const DepthSnapshot& s);

struct TradeUpdate {
    std::optional<L1Record> trade;
    std::optional<L1Record> quote;
    bool hit_side_empty = false;  // post-trade emptiness of the consumed side
};

/// Per-security order book with price-time priority at equal prices (earliest
/// event timestamp first, then arrival order).
class OrderBook {
public:
    explicit OrderBook(SecurityId security, Mode mode = Mode::Lenient);

    /// Add, cancel or modify. Returns the L1 record iff the affected side's best changed.
    std::optional<L1Record> apply(const feed::MarketMessage& m);

    /// Trade message: the trade record plus the resulting quote update, if any.
    TradeUpdate apply_trade(const feed::MarketMessage& m);

    std::optional<Best> best(Side s) const;
    bool empty(Side s) const;
    std::size_t size(Side s) const;
    const std::unordered_map<OrderRef, RestingOrder>& orders(Side s) const;

    DepthSnapshot depth_snapshot(Nanos ts) const;

    void clear();
    SecurityId security() const { return security_; }
    const AnomalyCounts& anomalies() const { return anomalies_; }

private:
    using Key = std::tuple<std::int64_t, Nanos, std::uint64_t, OrderRef>;

    struct Book {
        std::unordered_map<OrderRef, RestingOrder> orders;
        std::set<Key> ladder;
    };

    Book& book(Side s) { return s == Side::Buy ? bids_ : asks_; }
    const Book& book(Side s) const { return s == Side::Buy ? bids_ : asks_; }
    static Key key(Side s, OrderRef ref, const RestingOrder& o);
    std::optional<Side> locate(OrderRef ref) const;
    void insert(Side s, OrderRef ref, const RestingOrder& o);
    void erase(Side s, OrderRef ref);
    L1Record quote_record(Side s, Nanos ts) const;
    bool anomaly(std::size_t AnomalyCounts::*counter, const std::string& what);

    SecurityId security_;
    Mode mode_;
    Book bids_;
    Book asks_;
    std::uint64_t arrivals_ = 0;
    AnomalyCounts anomalies_;
};

struct TradeOutcome {
    Nanos ts = 0;
    TradeSign sign = TradeSign::Buyer;
    bool hit_side_empty = false;
};

struct ReplayOptions {
    Mode mode = Mode::Lenient;
    bool record_depth = false;
    bool reset_daily = true;  // fresh book at each local calendar day
};

struct ReplayResult {
    std::vector<L1Record> l1;
    std::vector<DepthSnapshot> depth;
    std::vector<TradeOutcome> trades;
    AnomalyCounts anomalies;
};

/// Replays one security's messages (non-book kinds other than trades and busts are ignored).
ReplayResult replay(std::span<const feed::MarketMessage> messages, SecurityId security,
                    const ReplayOptions& opts = {});

/// Fraction of trades after which the consumed side was empty; absent with no trades.
std::optional<double> break_rate(std::span<const TradeOutcome> trades);

}  // namespace mx::lob
