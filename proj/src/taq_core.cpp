#include "mx/taq_core.hpp"

#include <cmath>
#include <stdexcept>

#include "mx/time.hpp"

namespace mx::taq {
namespace {

struct SideState {
    std::optional<Price> price;
    std::optional<Quantity> vol;
};

struct BookState {
    SideState bid;
    SideState ask;

    void apply(const L1Record& r) {
        if (r.type == EventType::Bid) bid = {r.bid, r.bid_vol};
        else if (r.type == EventType::Ask) ask = {r.ask, r.ask_vol};
    }
    bool two_sided() const { return bid.price && ask.price; }
    std::optional<double> mid() const {
        if (!two_sided()) return std::nullopt;
        return 0.5 * (bid.price->zac() + ask.price->zac());
    }
    std::optional<double> micro(MicroWeighting w) const {
        if (!two_sided() || !bid.vol || !ask.vol) return std::nullopt;
        if (*bid.vol + *ask.vol <= 0) return std::nullopt;
        return microprice(bid.price->zac(), static_cast<double>(*bid.vol), ask.price->zac(),
                          static_cast<double>(*ask.vol), w);
    }
};

}  // namespace

double microprice(double bid, double bid_vol, double ask, double ask_vol, MicroWeighting w) {
    const double total = bid_vol + ask_vol;
    if (w == MicroWeighting::SideVolume) return ask_vol / total * ask + bid_vol / total * bid;
    return bid_vol / total * ask + ask_vol / total * bid;
}

QuoteSeries derive_quotes(std::span<const L1Record> l1, MicroWeighting w) {
    QuoteSeries out;
    BookState state;
    std::optional<std::int64_t> day;
    for (const auto& r : l1) {
        const auto d = local_day(r.ts);
        if (day && *day != d) state = {};
        day = d;
        if (r.type == EventType::Trade) continue;
        state.apply(r);
        QuotePoint q;
        q.ts = r.ts;
        if (state.bid.price) q.bid = state.bid.price->zac();
        if (state.ask.price) q.ask = state.ask.price->zac();
        q.bid_vol = state.bid.vol;
        q.ask_vol = state.ask.vol;
        q.mid = state.mid();
        q.micro = state.micro(w);
        out.push_back(q);
    }
    return out;
}

std::vector<L1Record> enrich(std::span<const L1Record> l1, MicroWeighting w) {
    std::vector<L1Record> out(l1.begin(), l1.end());
    BookState state;
    std::optional<std::int64_t> day;
    std::optional<Nanos> last_trade;
    for (auto& r : out) {
        const auto d = local_day(r.ts);
        if (day && *day != d) {
            state = {};
            last_trade.reset();
        }
        day = d;
        state.apply(r);
        r.mid = state.mid();
        r.micro = state.micro(w);
        r.interarrival.reset();
        if (r.type == EventType::Trade) {
            if (last_trade) r.interarrival = static_cast<double>(r.ts - *last_trade) / kNanosPerSecond;
            last_trade = r.ts;
        }
    }
    return out;
}

ReturnSeries tick_returns(std::span<const QuotePoint> series) {
    ReturnSeries out;
    for (std::size_t k = 1; k < series.size(); ++k) {
        const auto& a = series[k - 1];
        const auto& b = series[k];
        if (!a.micro || !b.micro || local_day(a.ts) != local_day(b.ts)) continue;
        out.push_back({b.ts, std::log(*b.micro) - std::log(*a.micro)});
    }
    return out;
}

ReturnSeries log_returns(std::span<const std::optional<double>> prices, std::span<const Nanos> ts) {
    if (!ts.empty() && ts.size() != prices.size()) throw std::invalid_argument("log_returns: size mismatch");
    ReturnSeries out;
    for (std::size_t k = 1; k < prices.size(); ++k) {
        if (!prices[k - 1] || !prices[k]) continue;
        if (!ts.empty() && local_day(ts[k - 1]) != local_day(ts[k])) continue;
        out.push_back({ts.empty() ? static_cast<Nanos>(k) : ts[k], std::log(*prices[k]) - std::log(*prices[k - 1])});
    }
    return out;
}

std::vector<OhlcBar> ohlc(std::span<const QuotePoint> series, int width_minutes, const Session& session) {
    if (width_minutes <= 0) throw std::invalid_argument("ohlc: bar width must be positive");
    const Nanos width = width_minutes * kNanosPerMinute;
    std::vector<OhlcBar> out;
    std::optional<std::int64_t> day;
    std::size_t day_begin = 0;
    auto open_day = [&](std::int64_t d) {
        day_begin = out.size();
        const Nanos midnight_utc = d * kNanosPerDay - kLocalOffset;
        for (Nanos t = session.open; t < session.close; t += width) {
            OhlcBar b;
            b.day = d;
            b.start = midnight_utc + t;
            b.end = midnight_utc + std::min(t + width, session.close);
            out.push_back(b);
        }
    };
    for (const auto& q : series) {
        const LocalTime lt = to_local_time(q.ts);
        if (!day || *day != lt.day()) {
            day = lt.day();
            open_day(*day);
        }
        if (!q.micro || !session.contains(lt.time_of_day())) continue;
        auto& b = out[day_begin + static_cast<std::size_t>((lt.time_of_day() - session.open) / width)];
        const double s = *q.micro;
        if (b.empty()) {
            b.open = b.high = b.low = b.close = s;
        } else {
            b.high = std::max(*b.high, s);
            b.low = std::min(*b.low, s);
            b.close = s;
        }
    }
    return out;
}

ReturnSeries bar_returns(std::span<const OhlcBar> bars) {
    ReturnSeries out;
    const OhlcBar* prev = nullptr;
    for (const auto& b : bars) {
        if (b.empty()) continue;
        if (prev != nullptr && prev->day == b.day) out.push_back({b.end, std::log(*b.close) - std::log(*prev->close)});
        prev = &b;
    }
    return out;
}

std::vector<double> interarrivals(std::span<const Nanos> trade_times) {
    std::vector<double> out;
    for (std::size_t k = 1; k < trade_times.size(); ++k) {
        if (local_day(trade_times[k - 1]) != local_day(trade_times[k])) continue;
        out.push_back(static_cast<double>(trade_times[k] - trade_times[k - 1]) / kNanosPerSecond);
    }
    return out;
}

std::vector<double> interarrivals(std::span<const L1Record> l1) {
    std::vector<Nanos> ts;
    for (const auto& r : l1)
        if (r.type == EventType::Trade) ts.push_back(r.ts);
    return interarrivals(ts);
}

std::optional<double> impact_increment(std::optional<double> mid_before, std::optional<double> mid_after) {
    if (!mid_before || !mid_after) return std::nullopt;
    return std::log(*mid_after) - std::log(*mid_before);
}

TradeScan scan_trades(std::span<const L1Record> l1) {
    TradeScan out;
    BookState state;
    std::optional<std::int64_t> day;
    for (std::size_t i = 0; i < l1.size(); ++i) {
        const auto& r = l1[i];
        const auto d = local_day(r.ts);
        if (day && *day != d) state = {};
        day = d;
        if (r.type != EventType::Trade) {
            state.apply(r);
            continue;
        }
        TradeObservation t;
        t.row = i;
        t.ts = r.ts;
        t.day = d;
        t.price = r.trade.value_or(Price{});
        t.volume = r.trade_vol.value_or(0);
        t.sign = r.sign;
        t.bid_before = state.bid.price;
        t.ask_before = state.ask.price;
        t.mid_before = state.mid();

        BookState after = state;
        for (std::size_t j = i + 1; j < l1.size(); ++j) {
            if (l1[j].type == EventType::Trade || local_day(l1[j].ts) != d) break;
            after.apply(l1[j]);
            break;
        }
        t.mid_after = after.mid();
        if (!t.mid_before) {
            ++out.skipped_no_mid;
        } else if (!t.mid_after) {
            t.broken_after = true;
            ++out.skipped_broken;
        } else {
            t.dp = impact_increment(t.mid_before, t.mid_after);
        }
        out.trades.push_back(t);
    }
    return out;
}

}  // namespace mx::taq
