#pragma once

#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mx/l1.hpp"

namespace mx::classify {

enum class Rule { Quote, Tick, LeeReady };
std::string_view to_string(Rule r);
inline constexpr Rule kAllRules[] = {Rule::Quote, Rule::Tick, Rule::LeeReady};

struct TradeInput {
    Nanos ts = 0;
    Price price;
    Quantity volume = 0;
    std::optional<double> mid_before;  // ZAC, book in effect just before the trade
    std::optional<TradeSign> truth;
};

struct SignedTrade {
    Nanos ts = 0;
    Price price;
    Quantity volume = 0;
    std::optional<TradeSign> inferred;
    std::optional<TradeSign> truth;
    bool no_mid = false;
};

/// Trades of an L1 stream with their pre-trade mids; a recorded sign becomes the truth.
std::vector<TradeInput> trades_from_l1(std::span<const L1Record> l1);

std::vector<SignedTrade> classify(std::span<const TradeInput> trades, Rule rule);

/// Tick test alone: sign against the previous trade, or the last differing one when
/// unchanged. Resets at each local day so the first trade of a day stays unclassified.
std::vector<std::optional<TradeSign>> tick_signs(std::span<const TradeInput> trades);

struct Evaluation {
    Rule rule = Rule::Quote;
    std::size_t n_trades = 0;
    std::size_t n_unclassified = 0;
    std::size_t n_correct = 0;
    std::size_t n_no_mid = 0;
    std::optional<double> accuracy;  // correct / classifiable
};

class NoGroundTruth : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Evaluation evaluate(std::span<const SignedTrade> signed_trades, Rule rule);

struct SecurityReport {
    std::string security;
    std::vector<Evaluation> rules;  // one per rule in kAllRules order
};

SecurityReport evaluate_all(std::string security, std::span<const TradeInput> trades);

/// Security,QuoteRule,TickRule,LeeReadyRule with accuracies in percent.
std::string accuracy_table_csv(std::span<const SecurityReport> reports);
/// Long form with the underlying counts.
std::string detail_csv(std::span<const SecurityReport> reports);

}  // namespace mx::classify
