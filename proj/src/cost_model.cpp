#include "mx/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace mx::cost {

FeeSchedule a2x_schedule() { return {"A2X", 0.4, 355.0, 0.29, 154.0, 0.2}; }
FeeSchedule jse_schedule() { return {"JSE", 0.48, 420.4, 0.36, 180.0, std::nullopt}; }

std::vector<FeeSchedule> parse_fee_config(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    const auto& list = j.is_object() ? j.at("schedules") : j;
    if (!list.is_array()) throw std::invalid_argument("fee config: expected an array of schedules");
    std::vector<FeeSchedule> out;
    for (const auto& e : list) {
        FeeSchedule s;
        s.exchange = e.at("exchange").get<std::string>();
        s.transaction_bps = e.at("transaction_bps").get<double>();
        s.transaction_ceiling_rand = e.at("transaction_ceiling_rand").get<double>();
        s.settlement_bps = e.at("settlement_bps").get<double>();
        s.settlement_ceiling_rand = e.at("settlement_ceiling_rand").get<double>();
        if (e.contains("passive_transaction_bps") && !e["passive_transaction_bps"].is_null())
            s.passive_transaction_bps = e["passive_transaction_bps"].get<double>();
        if (s.transaction_bps < 0 || s.settlement_bps < 0 || s.passive_transaction_bps.value_or(0) < 0)
            throw std::invalid_argument(fmt::format("fee config {}: negative rate", s.exchange));
        if (!(s.transaction_ceiling_rand > 0) || !(s.settlement_ceiling_rand > 0))
            throw std::invalid_argument(fmt::format("fee config {}: ceilings must be positive", s.exchange));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<FeeSchedule> load_fee_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open fee config {}", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_fee_config(ss.str());
}

const FeeSchedule& find_schedule(std::span<const FeeSchedule> schedules, std::string_view exchange) {
    for (const auto& s : schedules)
        if (s.exchange == exchange) return s;
    throw std::invalid_argument(fmt::format("no fee schedule for exchange '{}'", exchange));
}

double fee(double value_rand, const FeeSchedule& s, FeeRole role) {
    const double tbps = role == FeeRole::Passive ? s.passive_transaction_bps.value_or(s.transaction_bps)
                                                 : s.transaction_bps;
    return std::min(value_rand * tbps * 1e-4, s.transaction_ceiling_rand) +
           std::min(value_rand * s.settlement_bps * 1e-4, s.settlement_ceiling_rand);
}

double direct_cost(double value_rand, double volume, const FeeSchedule& s, FeeRole role) {
    if (!(volume > 0)) throw std::invalid_argument("direct_cost: volume must be positive");
    return fee(value_rand, s, role) / volume;
}

Slippage slippage(Price bid, Price ask) {
    return {std::abs(ask.rand() - bid.rand()) / 2.0, bid > ask};
}

std::optional<double> relative(double mid, double x, TradeSign side) {
    const double shifted = side == TradeSign::Buyer ? mid + x : mid - x;
    if (!(mid > 0) || !(shifted > 0)) return std::nullopt;
    return std::log(shifted) - std::log(mid);
}

std::optional<CostBreakdown> cost_components(const taq::TradeObservation& t, TradeSign side, double omega,
                                             const FeeSchedule& s, FeeRole role, CostStats* stats) {
    CostStats scratch;
    CostStats& st = stats != nullptr ? *stats : scratch;
    if (!t.bid_before || !t.ask_before || !t.mid_before || !t.mid_after) {
        ++st.broken_book;
        return std::nullopt;
    }
    CostBreakdown c;
    c.side = side;
    c.omega = omega;
    c.mid = *t.mid_before / 100.0;
    const auto sl = slippage(*t.bid_before, *t.ask_before);
    c.slippage = sl.rand;
    c.crossed = sl.crossed;
    c.impact = std::abs(*t.mid_after - *t.mid_before) / 100.0;
    c.direct = direct_cost(t.price.rand() * static_cast<double>(t.volume), static_cast<double>(t.volume), s, role);
    c.total = c.slippage + c.impact + c.direct;
    const auto ds = relative(c.mid, c.slippage, side);
    const auto ddc = relative(c.mid, c.direct, side);
    const auto dp = relative(c.mid, c.impact, side);
    const auto dc = relative(c.mid, c.total, side);
    if (!ds || !ddc || !dp || !dc) {
        ++st.undefined_log;
        return std::nullopt;
    }
    c.ds = *ds;
    c.ddc = *ddc;
    c.dp = *dp;
    c.dc = *dc;
    if (c.crossed) ++st.crossed;
    return c;
}

std::vector<CostBreakdown> security_costs(std::span<const taq::TradeObservation> trades,
                                          std::span<const std::optional<TradeSign>> signs, const FeeSchedule& s,
                                          FeeRole role, CostStats& stats) {
    if (!signs.empty() && signs.size() != trades.size()) throw std::invalid_argument("security_costs: sign count mismatch");
    std::vector<std::int64_t> days;
    std::vector<double> vols;
    for (const auto& t : trades) days.push_back(t.day), vols.push_back(static_cast<double>(t.volume));
    const auto omega = impact::normalize_volumes(days, vols);
    std::vector<CostBreakdown> out;
    for (std::size_t i = 0; i < trades.size(); ++i) {
        ++stats.trades;
        const auto side = signs.empty() ? trades[i].sign : signs[i];
        if (!side) {
            ++stats.no_side;
            continue;
        }
        if (auto c = cost_components(trades[i], *side, omega[i], s, role, &stats)) {
            out.push_back(*c);
            ++stats.kept;
        }
    }
    return out;
}

CostCurve cost_curve(std::span<const CostBreakdown> costs, TradeSign side, const impact::Bins& bins) {
    CostCurve c{side, std::vector<ComponentMeans>(bins.n)};
    for (const auto& x : costs) {
        if (x.side != side) continue;
        const auto k = bins.index(x.omega);
        if (!k) continue;
        auto& b = c.bins[*k];
        ++b.count;
        b.omega += x.omega;
        b.ds += x.ds;
        b.ddc += x.ddc;
        b.dp += x.dp;
        b.dc += x.dc;
    }
    for (auto& b : c.bins) {
        if (b.empty()) continue;
        const double n = static_cast<double>(b.count);
        b.omega /= n;
        b.ds /= n;
        b.ddc /= n;
        b.dp /= n;
        b.dc /= n;
    }
    return c;
}

std::string cost_curve_csv(std::span<const CostCurve> curves, const impact::Bins& bins) {
    std::string out = "Side,Bin,BinLo,BinHi,Count,Omega,Ds,Ddc,Dp,Dc\n";
    for (const auto& c : curves)
        for (std::size_t k = 0; k < c.bins.size(); ++k) {
            const auto& b = c.bins[k];
            if (b.empty()) {
                out += fmt::format("{},{},{},{},0,NaN,NaN,NaN,NaN,NaN\n", c.side == TradeSign::Buyer ? "BI" : "SI", k,
                                   bins.edges[k], bins.edges[k + 1]);
                continue;
            }
            out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", c.side == TradeSign::Buyer ? "BI" : "SI", k,
                               bins.edges[k], bins.edges[k + 1], b.count, b.omega, b.ds, b.ddc, b.dp, b.dc);
        }
    return out;
}

std::string_view to_string(Component c) {
    switch (c) {
    case Component::Dp: return "dp";
    case Component::Ds: return "ds";
    case Component::Ddc: return "ddc";
    case Component::Dc: return "dc";
    case Component::Omega: return "omega";
    }
    return "?";
}

double table_scale(Component c) { return c == Component::Omega ? 1e1 : 1e3; }

namespace {

double component(const CostBreakdown& x, Component c) {
    switch (c) {
    case Component::Dp: return x.dp;
    case Component::Ds: return x.ds;
    case Component::Ddc: return x.ddc;
    case Component::Dc: return x.dc;
    case Component::Omega: return x.omega;
    }
    return 0;
}

double population_sd(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = 0;
    for (double x : v) m += x;
    m /= n;
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / n);
}

}  // namespace

std::optional<double> VariabilityTable::at(std::size_t bin, Component c, std::size_t exchange, TradeSign side) const {
    const std::size_t ci = static_cast<std::size_t>(c);
    return cells[((bin * kComponents.size() + ci) * exchanges.size() + exchange) * 2 +
                 (side == TradeSign::Buyer ? 0 : 1)];
}

VariabilityTable variability_table(std::span<const ExchangeCosts> exchanges, const impact::Bins& bins) {
    VariabilityTable t;
    for (const auto& e : exchanges) t.exchanges.push_back(e.exchange);
    t.n_bins = bins.n;
    const std::size_t ne = exchanges.size();
    t.cells.assign(bins.n * kComponents.size() * ne * 2, std::nullopt);
    for (std::size_t ei = 0; ei < ne; ++ei) {
        // sum of per-security sds and number of contributing securities, per (bin, component, side)
        std::vector<double> sum(bins.n * kComponents.size() * 2, 0);
        std::vector<std::size_t> cnt_side(bins.n * 2, 0);
        for (const auto& sec : exchanges[ei].securities) {
            for (int s = 0; s < 2; ++s) {
                const TradeSign side = s == 0 ? TradeSign::Buyer : TradeSign::Seller;
                std::vector<std::vector<const CostBreakdown*>> per_bin(bins.n);
                for (const auto& x : sec)
                    if (x.side == side)
                        if (auto k = bins.index(x.omega)) per_bin[*k].push_back(&x);
                for (std::size_t k = 0; k < bins.n; ++k) {
                    if (per_bin[k].size() < 2) {
                        if (!per_bin[k].empty()) ++t.excluded;
                        continue;
                    }
                    ++cnt_side[k * 2 + s];
                    for (std::size_t ci = 0; ci < kComponents.size(); ++ci) {
                        std::vector<double> v;
                        for (const auto* x : per_bin[k]) v.push_back(component(*x, kComponents[ci]));
                        sum[(k * kComponents.size() + ci) * 2 + s] += population_sd(v);
                    }
                }
            }
        }
        for (std::size_t k = 0; k < bins.n; ++k)
            for (std::size_t ci = 0; ci < kComponents.size(); ++ci)
                for (int s = 0; s < 2; ++s) {
                    const auto n = cnt_side[k * 2 + s];
                    if (n == 0) continue;
                    t.cells[((k * kComponents.size() + ci) * ne + ei) * 2 + s] =
                        sum[(k * kComponents.size() + ci) * 2 + s] / static_cast<double>(n) *
                        table_scale(kComponents[ci]);
                }
    }
    return t;
}

std::string variability_csv(const VariabilityTable& t) {
    std::string out = "Bin";
    for (auto c : kComponents)
        for (const auto& e : t.exchanges)
            for (const char* s : {"BI", "SI"}) out += fmt::format(",{}_{}_{}", to_string(c), e, s);
    out += '\n';
    for (std::size_t k = 0; k < t.n_bins; ++k) {
        out += fmt::format("{}", k + 1);
        for (auto c : kComponents)
            for (std::size_t e = 0; e < t.exchanges.size(); ++e)
                for (auto side : {TradeSign::Buyer, TradeSign::Seller}) {
                    const auto v = t.at(k, c, e, side);
                    out += v ? fmt::format(",{:.2f}", *v) : std::string(",NaN");
                }
        out += '\n';
    }
    return out;
}

}  // namespace mx::cost
