#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mx/feed_parser.hpp"
#include "mx/l1.hpp"
#include "mx/lob_engine.hpp"
#include "mx/taq_core.hpp"

namespace mx::synth {

struct ImpactLaw {
    double alpha = 0.4;
    double lambda = 10;
    double noise = 0.05;  // sd of the multiplicative log-normal factor
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    int n_securities = 1;
    SecurityId first_security = 1;
    std::string start_date = "2019-01-02";
    int n_days = 1;
    taq::Session session;
    std::size_t messages_per_security = 10000;  // book messages, spread evenly over the days

    // relative intensities of the event kinds
    double add_rate = 0.45;
    double cancel_rate = 0.2;
    double modify_rate = 0.1;
    double trade_rate = 0.25;
    double tie_probability = 0.05;     // event shares the previous timestamp
    std::size_t heartbeat_every = 0;   // 0 disables heartbeats

    double initial_price_zac = 10000;
    std::int64_t tick_raw = Price::kScale;  // one cent
    double walk_sigma_ticks = 0.5;
    int max_offset_ticks = 10;
    int target_orders_per_side = 12;
    Quantity min_qty = 1;
    Quantity max_qty = 500;
    double sweep_probability = 0.1;  // market order larger than the best order

    bool shallow = false;
    int shallow_max_orders = 3;
    std::optional<double> target_break_rate;

    double sign_persistence = 0.5;  // P(next market order repeats the previous sign)
    std::optional<ImpactLaw> impact;
    std::size_t impact_trades_per_day = 200;
};

/// Throws std::invalid_argument on a malformed configuration.
void validate(const ScenarioConfig& c);
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);
std::string scenario_json(const ScenarioConfig& c);

struct TruthTrade {
    SecurityId security = 0;
    Nanos ts = 0;
    TradeSign sign = TradeSign::Buyer;
    Price price;
    Quantity volume = 0;
    std::optional<double> mid_before;  // ZAC
    std::optional<double> mid_after;
    std::optional<double> target_dp;  // impact-law mode
    double omega = 0;                  // impact-law mode
};

struct GroundTruth {
    std::map<SecurityId, std::vector<L1Record>> l1;      // records emitted while generating
    std::vector<TruthTrade> trades;                       // one per trade message
    std::map<SecurityId, std::vector<int>> order_signs;   // one per market order
    std::map<SecurityId, double> C;                       // average daily value traded, Rand
    std::map<SecurityId, std::optional<double>> break_rate;
    std::optional<ImpactLaw> law;
};

struct Generated {
    std::string wire;
    std::vector<feed::MarketMessage> messages;  // book, trade and admin messages in feed order
    std::size_t heartbeats = 0;
    GroundTruth truth;
};

/// Deterministic given the seed; each security draws from its own substream.
Generated generate(const ScenarioConfig& config);

/// +-1 sequence where each sign repeats the previous one with probability p.
std::vector<int> markov_signs(std::size_t n, double p, std::uint64_t seed);

/// Reference book that rescans every resting order to find each best.
class OracleBook {
public:
    struct Order {
        OrderRef ref = 0;
        Side side = Side::Buy;
        Price price;
        Quantity qty = 0;
        Nanos priority_ns = 0;
        std::uint64_t arrival = 0;
    };

    explicit OracleBook(SecurityId security, lob::Mode mode = lob::Mode::Lenient) : security_(security), mode_(mode) {}

    /// Applies any book or trade message, appending emitted records to `out`.
    /// Returns true when the message changed the book.
    bool apply(const feed::MarketMessage& m, std::vector<L1Record>& out);

    std::optional<Order> best(Side s) const;
    const std::vector<Order>& orders() const { return orders_; }
    std::size_t count(Side s) const;
    Quantity side_quantity(Side s) const;
    std::vector<Order> priority_order(Side s) const;  // best first
    void clear() { orders_.clear(); }
    const lob::AnomalyCounts& anomalies() const { return anomalies_; }
    std::optional<double> mid() const;

private:
    bool anomaly(std::size_t lob::AnomalyCounts::*counter);
    std::optional<std::size_t> find(OrderRef ref) const;
    L1Record quote(Side s, Nanos ts) const;

    SecurityId security_;
    lob::Mode mode_;
    std::vector<Order> orders_;
    std::uint64_t arrivals_ = 0;
    lob::AnomalyCounts anomalies_;
};

/// Brute-force L1 for one security, same emission rules and daily reset as the engine.
std::vector<L1Record> oracle_l1(std::span<const feed::MarketMessage> messages, SecurityId security,
                                lob::Mode mode = lob::Mode::Lenient, lob::AnomalyCounts* anomalies = nullptr);

}  // namespace mx::synth
