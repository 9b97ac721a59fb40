#include "mx/lob_engine.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "mx/time.hpp"

namespace mx::lob {

using feed::MarketMessage;
using feed::MessageKind;

AnomalyCounts& AnomalyCounts::operator+=(const AnomalyCounts& o) {
    unknown_ref += o.unknown_ref;
    duplicate_ref += o.duplicate_ref;
    overfill += o.overfill;
    bad_quantity += o.bad_quantity;
    wrong_security += o.wrong_security;
    busts += o.busts;
    return *this;
}

OrderBook::OrderBook(SecurityId security, Mode mode) : security_(security), mode_(mode) {}

OrderBook::Key OrderBook::key(Side s, OrderRef ref, const RestingOrder& o) {
    // Bids sort by descending price, asks ascending; then time, then arrival.
    const std::int64_t p = s == Side::Buy ? -o.price.raw : o.price.raw;
    return {p, o.priority_ns, o.arrival, ref};
}

std::optional<Side> OrderBook::locate(OrderRef ref) const {
    if (bids_.orders.contains(ref)) return Side::Buy;
    if (asks_.orders.contains(ref)) return Side::Sell;
    return std::nullopt;
}

void OrderBook::insert(Side s, OrderRef ref, const RestingOrder& o) {
    auto& b = book(s);
    b.orders.emplace(ref, o);
    b.ladder.insert(key(s, ref, o));
}

void OrderBook::erase(Side s, OrderRef ref) {
    auto& b = book(s);
    auto it = b.orders.find(ref);
    b.ladder.erase(key(s, ref, it->second));
    b.orders.erase(it);
}

std::optional<Best> OrderBook::best(Side s) const {
    const auto& b = book(s);
    if (b.ladder.empty()) return std::nullopt;
    const OrderRef ref = std::get<3>(*b.ladder.begin());
    const auto& o = b.orders.at(ref);
    return Best{ref, o.price, o.qty};
}

bool OrderBook::empty(Side s) const { return book(s).orders.empty(); }

std::size_t OrderBook::size(Side s) const { return book(s).orders.size(); }

const std::unordered_map<OrderRef, RestingOrder>& OrderBook::orders(Side s) const { return book(s).orders; }

void OrderBook::clear() {
    bids_ = {};
    asks_ = {};
}

bool OrderBook::anomaly(std::size_t AnomalyCounts::*counter, const std::string& what) {
    if (mode_ == Mode::Strict) throw BookError(fmt::format("security {}: {}", security_, what));
    ++(anomalies_.*counter);
    return false;
}

L1Record OrderBook::quote_record(Side s, Nanos ts) const {
    L1Record r;
    r.ts = ts;
    const auto b = best(s);
    if (s == Side::Buy) {
        r.type = EventType::Bid;
        if (b) {
            r.bid = b->price;
            r.bid_vol = b->qty;
        }
    } else {
        r.type = EventType::Ask;
        if (b) {
            r.ask = b->price;
            r.ask_vol = b->qty;
        }
    }
    return r;
}

std::optional<L1Record> OrderBook::apply(const MarketMessage& m) {
    if (m.security_id != security_) {
        anomaly(&AnomalyCounts::wrong_security, fmt::format("message for security {}", m.security_id.value_or(-1)));
        return std::nullopt;
    }
    const OrderRef ref = m.order_ref.value_or(0);
    switch (m.kind) {
        case MessageKind::OrderAdd: {
            if (*m.quantity <= 0) {
                anomaly(&AnomalyCounts::bad_quantity, fmt::format("add {} with quantity {}", ref, *m.quantity));
                return std::nullopt;
            }
            if (locate(ref)) {
                anomaly(&AnomalyCounts::duplicate_ref, fmt::format("duplicate order {}", ref));
                return std::nullopt;
            }
            const Side s = *m.side;
            const auto before = best(s);
            insert(s, ref, RestingOrder{*m.price, *m.quantity, m.event_ns, arrivals_++});
            if (best(s) != before) return quote_record(s, m.event_ns);
            return std::nullopt;
        }
        case MessageKind::OrderCancel: {
            const auto s = locate(ref);
            if (!s) {
                anomaly(&AnomalyCounts::unknown_ref, fmt::format("cancel of unknown order {}", ref));
                return std::nullopt;
            }
            const auto before = best(*s);
            const bool targeted = before && before->ref == ref;
            erase(*s, ref);
            if (targeted || best(*s) != before) return quote_record(*s, m.event_ns);
            return std::nullopt;
        }
        case MessageKind::OrderModify: {
            const auto s = locate(ref);
            if (!s) {
                anomaly(&AnomalyCounts::unknown_ref, fmt::format("modify of unknown order {}", ref));
                return std::nullopt;
            }
            if (*m.quantity <= 0) {
                anomaly(&AnomalyCounts::bad_quantity, fmt::format("modify {} to quantity {}", ref, *m.quantity));
                return std::nullopt;
            }
            const auto before = best(*s);
            const bool targeted = before && before->ref == ref;
            erase(*s, ref);
            insert(*s, ref, RestingOrder{*m.price, *m.quantity, m.event_ns, arrivals_++});
            if (targeted || best(*s) != before) return quote_record(*s, m.event_ns);
            return std::nullopt;
        }
        default:
            throw std::invalid_argument(fmt::format("OrderBook::apply: unsupported kind {}", feed::to_string(m.kind)));
    }
}

TradeUpdate OrderBook::apply_trade(const MarketMessage& m) {
    if (m.kind != MessageKind::Trade)
        throw std::invalid_argument("OrderBook::apply_trade: not a trade message");
    TradeUpdate out;
    if (m.security_id != security_) {
        anomaly(&AnomalyCounts::wrong_security, fmt::format("trade for security {}", m.security_id.value_or(-1)));
        return out;
    }
    const OrderRef ref = *m.order_ref;
    const auto s = locate(ref);
    if (!s) {
        anomaly(&AnomalyCounts::unknown_ref, fmt::format("trade against unknown order {}", ref));
        return out;
    }
    auto& resting = book(*s).orders.at(ref);
    if (*m.quantity <= 0) {
        anomaly(&AnomalyCounts::bad_quantity, fmt::format("trade of quantity {}", *m.quantity));
        return out;
    }
    if (*m.quantity > resting.qty) {
        anomaly(&AnomalyCounts::overfill,
                fmt::format("trade {} exceeds resting {} on order {}", *m.quantity, resting.qty, ref));
        return out;
    }
    L1Record t;
    t.ts = m.event_ns;
    t.type = EventType::Trade;
    t.trade = *m.price;
    t.trade_vol = *m.quantity;
    // Consuming the ask means a buyer initiated the trade.
    t.sign = *s == Side::Sell ? TradeSign::Buyer : TradeSign::Seller;
    out.trade = t;

    const auto before = best(*s);
    const bool targeted = before && before->ref == ref;
    if (resting.qty == *m.quantity) erase(*s, ref);
    else resting.qty -= *m.quantity;
    if (targeted || best(*s) != before) out.quote = quote_record(*s, m.event_ns);
    out.hit_side_empty = empty(*s);
    return out;
}

DepthSnapshot OrderBook::depth_snapshot(Nanos ts) const {
    DepthSnapshot snap;
    snap.ts = ts;
    std::map<std::int64_t, Quantity, std::greater<>> bids;
    std::map<std::int64_t, Quantity> asks;
    for (const auto& [ref, o] : bids_.orders) bids[o.price.raw] += o.qty;
    for (const auto& [ref, o] : asks_.orders) asks[o.price.raw] += o.qty;
    for (const auto& [p, q] : bids) snap.bids.push_back({Price{p}, q});
    for (const auto& [p, q] : asks) snap.asks.push_back({Price{p}, q});
    return snap;
}

std::string depth_json(const DepthSnapshot& s) {
    auto levels = [](const std::vector<Level>& v) {
        std::string out = "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ',';
            out += fmt::format("[{},{}]", format_price_zac(v[i].price), v[i].qty);
        }
        return out + "]";
    };
    return fmt::format(R"({{"timestamp":"{}","bids":{},"asks":{}}})", to_local_time(s.ts).iso(), levels(s.bids),
                       levels(s.asks));
}

ReplayResult replay(std::span<const MarketMessage> messages, SecurityId security, const ReplayOptions& opts) {
    ReplayResult out;
    OrderBook book(security, opts.mode);
    std::optional<std::int64_t> day;
    for (const auto& m : messages) {
        if (m.security_id != security) continue;
        if (opts.reset_daily) {
            const auto d = local_day(m.event_ns);
            if (day && *day != d) book.clear();
            day = d;
        }
        bool changed = false;
        switch (m.kind) {
            case MessageKind::OrderAdd:
            case MessageKind::OrderCancel:
            case MessageKind::OrderModify: {
                const auto before = book.anomalies().total();
                if (auto r = book.apply(m)) out.l1.push_back(*r);
                changed = book.anomalies().total() == before;
                break;
            }
            case MessageKind::Trade: {
                auto u = book.apply_trade(m);
                if (u.trade) {
                    out.l1.push_back(*u.trade);
                    out.trades.push_back({m.event_ns, *u.trade->sign, u.hit_side_empty});
                    changed = true;
                }
                if (u.quote) out.l1.push_back(*u.quote);
                break;
            }
            case MessageKind::TradeBust: break;
            default: break;
        }
        if (changed && opts.record_depth) out.depth.push_back(book.depth_snapshot(m.event_ns));
    }
    out.anomalies = book.anomalies();
    out.anomalies.busts = static_cast<std::size_t>(
        std::count_if(messages.begin(), messages.end(), [&](const MarketMessage& m) {
            return m.kind == MessageKind::TradeBust && m.security_id == security;
        }));
    return out;
}

std::optional<double> break_rate(std::span<const TradeOutcome> trades) {
    if (trades.empty()) return std::nullopt;
    const auto broken = std::count_if(trades.begin(), trades.end(), [](const TradeOutcome& t) { return t.hit_side_empty; });
    return static_cast<double>(broken) / static_cast<double>(trades.size());
}

}  // namespace mx::lob
