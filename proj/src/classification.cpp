#include "mx/classification.hpp"

#include <fmt/format.h>

#include "mx/taq_core.hpp"
#include "mx/time.hpp"

namespace mx::classify {

std::string_view to_string(Rule r) {
    switch (r) {
    case Rule::Quote: return "quote";
    case Rule::Tick: return "tick";
    case Rule::LeeReady: return "lee_ready";
    }
    return "?";
}

std::vector<TradeInput> trades_from_l1(std::span<const L1Record> l1) {
    std::vector<TradeInput> out;
    for (const auto& t : taq::scan_trades(l1).trades)
        out.push_back({t.ts, t.price, t.volume, t.mid_before, t.sign});
    return out;
}

namespace {

std::optional<TradeSign> quote_sign(const TradeInput& t) {
    if (!t.mid_before) return std::nullopt;
    const double p = t.price.zac();
    if (p > *t.mid_before) return TradeSign::Buyer;
    if (p < *t.mid_before) return TradeSign::Seller;
    return std::nullopt;
}

}  // namespace

std::vector<std::optional<TradeSign>> tick_signs(std::span<const TradeInput> trades) {
    std::vector<std::optional<TradeSign>> out(trades.size());
    std::optional<std::int64_t> day;
    std::optional<Price> prev;
    std::optional<Price> last_diff;  // last price different from `prev`
    for (std::size_t k = 0; k < trades.size(); ++k) {
        const auto d = local_day(trades[k].ts);
        if (day != d) {
            prev.reset();
            last_diff.reset();
        }
        day = d;
        const Price p = trades[k].price;
        if (prev) {
            if (p != *prev) {
                out[k] = p > *prev ? TradeSign::Buyer : TradeSign::Seller;
                last_diff = prev;
            } else if (last_diff) {
                out[k] = p > *last_diff ? TradeSign::Buyer : TradeSign::Seller;
            }
        }
        prev = p;
    }
    return out;
}

std::vector<SignedTrade> classify(std::span<const TradeInput> trades, Rule rule) {
    std::vector<SignedTrade> out;
    out.reserve(trades.size());
    const auto ticks = rule == Rule::Quote ? std::vector<std::optional<TradeSign>>(trades.size()) : tick_signs(trades);
    for (std::size_t k = 0; k < trades.size(); ++k) {
        const auto& t = trades[k];
        SignedTrade s{t.ts, t.price, t.volume, std::nullopt, t.truth, !t.mid_before};
        switch (rule) {
        case Rule::Quote: s.inferred = quote_sign(t); break;
        case Rule::Tick: s.inferred = ticks[k]; break;
        case Rule::LeeReady: {
            const auto q = quote_sign(t);
            s.inferred = q ? q : ticks[k];
            break;
        }
        }
        out.push_back(s);
    }
    return out;
}

Evaluation evaluate(std::span<const SignedTrade> signed_trades, Rule rule) {
    Evaluation e;
    e.rule = rule;
    for (const auto& s : signed_trades) {
        if (!s.truth) throw NoGroundTruth("evaluate: trade without ground-truth sign");
        ++e.n_trades;
        if (s.no_mid) ++e.n_no_mid;
        if (!s.inferred) ++e.n_unclassified;
        else if (*s.inferred == *s.truth) ++e.n_correct;
    }
    const auto classifiable = e.n_trades - e.n_unclassified;
    if (classifiable > 0) e.accuracy = static_cast<double>(e.n_correct) / static_cast<double>(classifiable);
    return e;
}

SecurityReport evaluate_all(std::string security, std::span<const TradeInput> trades) {
    SecurityReport r{std::move(security), {}};
    for (auto rule : kAllRules) r.rules.push_back(evaluate(classify(trades, rule), rule));
    return r;
}

namespace {

std::string percent(const std::optional<double>& a) {
    return a ? fmt::format("{:.2f}", *a * 100.0) : "NaN";
}

}  // namespace

std::string accuracy_table_csv(std::span<const SecurityReport> reports) {
    std::string out = "Security,QuoteRule,TickRule,LeeReadyRule\n";
    for (const auto& r : reports) {
        out += r.security;
        for (const auto& e : r.rules) out += "," + percent(e.accuracy);
        out += '\n';
    }
    return out;
}

std::string detail_csv(std::span<const SecurityReport> reports) {
    std::string out = "Security,Rule,Trades,Unclassified,Correct,NoMid,Accuracy\n";
    for (const auto& r : reports)
        for (const auto& e : r.rules)
            out += fmt::format("{},{},{},{},{},{},{}\n", r.security, to_string(e.rule), e.n_trades, e.n_unclassified,
                               e.n_correct, e.n_no_mid, percent(e.accuracy));
    return out;
}

}  // namespace mx::classify
