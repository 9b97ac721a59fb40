#include "mx/synthetic_market.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mx/impact_master.hpp"
#include "mx/time.hpp"

namespace mx::synth {

using feed::MarketMessage;
using feed::MessageKind;

// --- configuration ---------------------------------------------------------

void validate(const ScenarioConfig& c) {
    auto fail = [](const std::string& what) { throw std::invalid_argument("scenario: " + what); };
    if (c.n_securities < 1) fail("n_securities must be at least 1");
    if (c.n_days < 1) fail("n_days must be at least 1");
    if (c.messages_per_security < 1) fail("messages_per_security must be positive");
    for (double r : {c.add_rate, c.cancel_rate, c.modify_rate, c.trade_rate})
        if (!(r >= 0)) fail("intensities must be non-negative");
    if (!(c.add_rate > 0)) fail("add_rate must be positive");
    if (!(c.sign_persistence >= 0 && c.sign_persistence <= 1)) fail("sign_persistence must lie in [0, 1]");
    if (!(c.tie_probability >= 0 && c.tie_probability < 1)) fail("tie_probability must lie in [0, 1)");
    if (c.tick_raw <= 0) fail("tick_raw must be positive");
    if (!(c.initial_price_zac > 0)) fail("initial_price_zac must be positive");
    if (c.min_qty < 1 || c.max_qty < c.min_qty) fail("need 1 <= min_qty <= max_qty");
    if (c.shallow && (c.shallow_max_orders < 1)) fail("shallow_max_orders must be at least 1");
    if (c.target_break_rate && !(*c.target_break_rate >= 0 && *c.target_break_rate <= 1))
        fail("target_break_rate must lie in [0, 1]");
    if (c.impact && !(c.impact->lambda > 0)) fail("impact lambda must be positive");
    if (c.session.close <= c.session.open) fail("session must not be empty");
    parse_iso(c.start_date + "T00:00:00");
}

ScenarioConfig parse_scenario(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    ScenarioConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key) && !j[key].is_null()) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("n_securities", c.n_securities);
    get("first_security", c.first_security);
    get("start_date", c.start_date);
    get("n_days", c.n_days);
    get("messages_per_security", c.messages_per_security);
    get("add_rate", c.add_rate);
    get("cancel_rate", c.cancel_rate);
    get("modify_rate", c.modify_rate);
    get("trade_rate", c.trade_rate);
    get("tie_probability", c.tie_probability);
    get("heartbeat_every", c.heartbeat_every);
    get("initial_price_zac", c.initial_price_zac);
    get("tick_raw", c.tick_raw);
    get("walk_sigma_ticks", c.walk_sigma_ticks);
    get("max_offset_ticks", c.max_offset_ticks);
    get("target_orders_per_side", c.target_orders_per_side);
    get("min_qty", c.min_qty);
    get("max_qty", c.max_qty);
    get("sweep_probability", c.sweep_probability);
    get("shallow", c.shallow);
    get("shallow_max_orders", c.shallow_max_orders);
    get("sign_persistence", c.sign_persistence);
    get("impact_trades_per_day", c.impact_trades_per_day);
    if (j.contains("target_break_rate") && !j["target_break_rate"].is_null())
        c.target_break_rate = j["target_break_rate"].get<double>();
    if (j.contains("session")) c.session = {parse_hhmm(j["session"].at("open").get<std::string>()),
                                            parse_hhmm(j["session"].at("close").get<std::string>())};
    if (j.contains("impact") && !j["impact"].is_null()) {
        ImpactLaw law;
        law.alpha = j["impact"].value("alpha", law.alpha);
        law.lambda = j["impact"].value("lambda", law.lambda);
        law.noise = j["impact"].value("noise", law.noise);
        c.impact = law;
    }
    validate(c);
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open scenario {}", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string scenario_json(const ScenarioConfig& c) {
    auto hhmm = [](Nanos t) { return fmt::format("{:02}:{:02}", t / kNanosPerMinute / 60, t / kNanosPerMinute % 60); };
    nlohmann::ordered_json j{
        {"seed", c.seed},
        {"n_securities", c.n_securities},
        {"first_security", c.first_security},
        {"start_date", c.start_date},
        {"n_days", c.n_days},
        {"session", {{"open", hhmm(c.session.open)}, {"close", hhmm(c.session.close)}}},
        {"messages_per_security", c.messages_per_security},
        {"add_rate", c.add_rate},
        {"cancel_rate", c.cancel_rate},
        {"modify_rate", c.modify_rate},
        {"trade_rate", c.trade_rate},
        {"tie_probability", c.tie_probability},
        {"heartbeat_every", c.heartbeat_every},
        {"initial_price_zac", c.initial_price_zac},
        {"tick_raw", c.tick_raw},
        {"walk_sigma_ticks", c.walk_sigma_ticks},
        {"max_offset_ticks", c.max_offset_ticks},
        {"target_orders_per_side", c.target_orders_per_side},
        {"min_qty", c.min_qty},
        {"max_qty", c.max_qty},
        {"sweep_probability", c.sweep_probability},
        {"shallow", c.shallow},
        {"shallow_max_orders", c.shallow_max_orders},
        {"target_break_rate", c.target_break_rate ? nlohmann::ordered_json(*c.target_break_rate) : nlohmann::ordered_json(nullptr)},
        {"sign_persistence", c.sign_persistence},
        {"impact_trades_per_day", c.impact_trades_per_day},
    };
    if (c.impact) j["impact"] = {{"alpha", c.impact->alpha}, {"lambda", c.impact->lambda}, {"noise", c.impact->noise}};
    else j["impact"] = nullptr;
    return j.dump(2) + "\n";
}

// --- oracle ------------------------------------------------------------------

namespace {

bool better(const OracleBook::Order& a, const OracleBook::Order& b) {
    if (a.price != b.price) return a.side == Side::Buy ? a.price > b.price : a.price < b.price;
    if (a.priority_ns != b.priority_ns) return a.priority_ns < b.priority_ns;
    return a.arrival < b.arrival;
}

bool same_best(const std::optional<OracleBook::Order>& a, const std::optional<OracleBook::Order>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return a->ref == b->ref && a->price == b->price && a->qty == b->qty;
}

}  // namespace

bool OracleBook::anomaly(std::size_t lob::AnomalyCounts::*counter) {
    if (mode_ == lob::Mode::Strict) throw lob::BookError(fmt::format("oracle: anomaly on security {}", security_));
    ++(anomalies_.*counter);
    return false;
}

std::optional<std::size_t> OracleBook::find(OrderRef ref) const {
    for (std::size_t i = 0; i < orders_.size(); ++i)
        if (orders_[i].ref == ref) return i;
    return std::nullopt;
}

std::optional<OracleBook::Order> OracleBook::best(Side s) const {
    std::optional<Order> b;
    for (const auto& o : orders_)
        if (o.side == s && (!b || better(o, *b))) b = o;
    return b;
}

std::size_t OracleBook::count(Side s) const {
    return static_cast<std::size_t>(std::count_if(orders_.begin(), orders_.end(), [&](const Order& o) { return o.side == s; }));
}

Quantity OracleBook::side_quantity(Side s) const {
    Quantity q = 0;
    for (const auto& o : orders_)
        if (o.side == s) q += o.qty;
    return q;
}

std::vector<OracleBook::Order> OracleBook::priority_order(Side s) const {
    std::vector<Order> v;
    for (const auto& o : orders_)
        if (o.side == s) v.push_back(o);
    std::sort(v.begin(), v.end(), better);
    return v;
}

std::optional<double> OracleBook::mid() const {
    const auto b = best(Side::Buy);
    const auto a = best(Side::Sell);
    if (!b || !a) return std::nullopt;
    return 0.5 * (b->price.zac() + a->price.zac());
}

L1Record OracleBook::quote(Side s, Nanos ts) const {
    L1Record r;
    r.ts = ts;
    r.type = s == Side::Buy ? EventType::Bid : EventType::Ask;
    if (const auto b = best(s)) {
        if (s == Side::Buy) r.bid = b->price, r.bid_vol = b->qty;
        else r.ask = b->price, r.ask_vol = b->qty;
    }
    return r;
}

bool OracleBook::apply(const MarketMessage& m, std::vector<L1Record>& out) {
    if (m.kind != MessageKind::OrderAdd && m.kind != MessageKind::OrderCancel && m.kind != MessageKind::OrderModify &&
        m.kind != MessageKind::Trade)
        return false;
    if (m.security_id != security_) return anomaly(&lob::AnomalyCounts::wrong_security);
    const OrderRef ref = m.order_ref.value_or(0);
    const auto at = find(ref);

    if (m.kind == MessageKind::OrderAdd) {
        if (*m.quantity <= 0) return anomaly(&lob::AnomalyCounts::bad_quantity);
        if (at) return anomaly(&lob::AnomalyCounts::duplicate_ref);
        const auto before = best(*m.side);
        orders_.push_back({ref, *m.side, *m.price, *m.quantity, m.event_ns, arrivals_++});
        if (!same_best(before, best(*m.side))) out.push_back(quote(*m.side, m.event_ns));
        return true;
    }
    if (!at) return anomaly(&lob::AnomalyCounts::unknown_ref);
    const Side s = orders_[*at].side;
    const auto before = best(s);
    const bool targeted = before && before->ref == ref;

    if (m.kind == MessageKind::OrderCancel) {
        orders_.erase(orders_.begin() + static_cast<std::ptrdiff_t>(*at));
    } else if (m.kind == MessageKind::OrderModify) {
        if (*m.quantity <= 0) return anomaly(&lob::AnomalyCounts::bad_quantity);
        auto& o = orders_[*at];
        o.price = *m.price;
        o.qty = *m.quantity;
        o.priority_ns = m.event_ns;
        o.arrival = arrivals_++;
    } else {
        if (*m.quantity <= 0) return anomaly(&lob::AnomalyCounts::bad_quantity);
        if (*m.quantity > orders_[*at].qty) return anomaly(&lob::AnomalyCounts::overfill);
        L1Record t;
        t.ts = m.event_ns;
        t.type = EventType::Trade;
        t.trade = *m.price;
        t.trade_vol = *m.quantity;
        t.sign = s == Side::Sell ? TradeSign::Buyer : TradeSign::Seller;
        out.push_back(t);
        orders_[*at].qty -= *m.quantity;
        if (orders_[*at].qty == 0) orders_.erase(orders_.begin() + static_cast<std::ptrdiff_t>(*at));
    }
    if (targeted || !same_best(before, best(s))) out.push_back(quote(s, m.event_ns));
    return true;
}

std::vector<L1Record> oracle_l1(std::span<const MarketMessage> messages, SecurityId security, lob::Mode mode,
                                lob::AnomalyCounts* anomalies) {
    std::vector<L1Record> out;
    OracleBook book(security, mode);
    std::optional<std::int64_t> day;
    for (const auto& m : messages) {
        if (m.security_id != security) continue;
        const auto d = local_day(m.event_ns);
        if (day && *day != d) book.clear();
        day = d;
        book.apply(m, out);
    }
    if (anomalies != nullptr) *anomalies = book.anomalies();
    return out;
}

// --- generator ---------------------------------------------------------------

std::vector<int> markov_signs(std::size_t n, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution repeat(p);
    std::bernoulli_distribution coin(0.5);
    std::vector<int> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0) out.push_back(coin(rng) ? 1 : -1);
        else out.push_back(repeat(rng) ? out.back() : -out.back());
    }
    return out;
}

namespace {

Side opposite(Side s) { return s == Side::Buy ? Side::Sell : Side::Buy; }

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

class SecurityGenerator {
public:
    SecurityGenerator(const ScenarioConfig& c, SecurityId sec, std::uint64_t stream)
        : c_(c), sec_(sec), rng_(seeded(c.seed, stream)),
          book_(sec, lob::Mode::Strict), ref_price_(static_cast<std::int64_t>(std::llround(c.initial_price_zac * Price::kScale))),
          next_ref_(sec * 1'000'000'000LL + 1), next_trade_(sec * 1'000'000'000LL + 1) {}

    void run(GroundTruth& truth, std::vector<MarketMessage>& out) {
        truth_ = &truth;
        out_ = &out;
        const Nanos first_day = parse_iso(c_.start_date + "T00:00:00") / kNanosPerDay;
        if (c_.impact) plan_impact(first_day);
        for (int d = 0; d < c_.n_days; ++d) {
            day_ = first_day + d;
            day_start_ = day_ * kNanosPerDay - kLocalOffset + c_.session.open;
            day_end_ = day_ * kNanosPerDay - kLocalOffset + c_.session.close;
            now_ = day_start_;
            first_event_ = true;
            book_.clear();
            if (d == 0) emit_definition();
            if (c_.impact) run_impact_day(d);
            else run_flow_day();
        }
        truth.l1[sec_];
        std::map<std::int64_t, double> value;
        for (const auto& t : truth.trades)
            if (t.security == sec_) value[local_day(t.ts)] += t.price.rand() * static_cast<double>(t.volume);
        double s = 0;
        for (const auto& [d, v] : value) s += v;
        truth.C[sec_] = value.empty() ? 0 : s / static_cast<double>(value.size());
        truth.break_rate[sec_] = trades_ == 0 ? std::nullopt : std::optional<double>(static_cast<double>(broken_) / static_cast<double>(trades_));
    }

private:
    double uniform() { return std::uniform_real_distribution<double>(0, 1)(rng_); }
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_); }

    void advance(Nanos mean_gap) {
        if (!first_event_ && uniform() < c_.tie_probability) return;
        first_event_ = false;
        const double gap = std::exponential_distribution<double>(1.0 / static_cast<double>(std::max<Nanos>(mean_gap, 1)))(rng_);
        now_ = std::min(now_ + 1 + static_cast<Nanos>(gap), day_end_ - 1);
    }

    MarketMessage base(MessageKind k) const {
        MarketMessage m;
        m.kind = k;
        m.msg_type = feed::canonical_msg_type(k);
        m.length = feed::canonical_length(k);
        m.name = std::string(feed::canonical_name(k));
        m.security_id = sec_;
        m.event_ns = now_;
        return m;
    }

    void emit(const MarketMessage& m) {
        auto& l1 = truth_->l1[sec_];
        const auto before = l1.size();
        const auto mid_before = book_.mid();
        book_.apply(m, l1);
        if (m.kind == MessageKind::Trade) {
            ++trades_;
            const auto& rec = l1[before];
            const Side hit = *rec.sign == TradeSign::Buyer ? Side::Sell : Side::Buy;
            if (book_.count(hit) == 0) ++broken_;
            TruthTrade t{sec_, m.event_ns, *rec.sign, *m.price, *m.quantity, mid_before, book_.mid(), pending_dp_, pending_omega_};
            truth_->trades.push_back(t);
        }
        out_->push_back(m);
        ++emitted_;
    }

    void emit_definition() {
        MarketMessage m = base(MessageKind::SecurityDefinition);
        m.event_ns = day_start_ - kNanosPerMinute;
        m.attributes = {{"symbol", fmt::format("SYN{}", sec_)}};
        out_->push_back(m);
    }

    void add(Side s, Price p, Quantity q) {
        MarketMessage m = base(MessageKind::OrderAdd);
        m.order_ref = next_ref_++;
        m.side = s;
        m.price = p;
        m.quantity = q;
        emit(m);
    }

    void cancel(OrderRef ref) {
        MarketMessage m = base(MessageKind::OrderCancel);
        m.order_ref = ref;
        emit(m);
    }

    void trade_against(const OracleBook::Order& o, Quantity q) {
        MarketMessage m = base(MessageKind::Trade);
        m.order_ref = o.ref;
        m.trade_ref = next_trade_++;
        m.price = o.price;
        m.quantity = q;
        emit(m);
    }

    Quantity draw_qty() { return uniform_int(c_.min_qty, c_.max_qty); }

    int next_sign() {
        if (last_sign_ == 0) last_sign_ = uniform() < 0.5 ? 1 : -1;
        else if (uniform() >= c_.sign_persistence) last_sign_ = -last_sign_;
        return last_sign_;
    }

    std::int64_t tick() const { return c_.tick_raw; }

    // Limit price on side s that never crosses the opposite best.
    Price place(Side s) {
        const int k = std::min<int>(c_.max_offset_ticks, static_cast<int>(std::geometric_distribution<int>(0.35)(rng_)));
        const auto own = book_.best(s);
        const auto opp = book_.best(opposite(s));
        std::int64_t p;
        if (own && uniform() < 0.25) p = own->price.raw;
        else if (s == Side::Buy) p = ref_price_ - k * tick();
        else p = ref_price_ + tick() + k * tick();
        if (opp) p = s == Side::Buy ? std::min(p, opp->price.raw - tick()) : std::max(p, opp->price.raw + tick());
        return Price{std::max(p, tick())};
    }

    bool side_full(Side s) const {
        return c_.shallow && static_cast<int>(book_.count(s)) >= c_.shallow_max_orders;
    }

    bool try_add() {
        Side s = uniform() < 0.5 ? Side::Buy : Side::Sell;
        const auto nb = book_.count(Side::Buy), na = book_.count(Side::Sell);
        if (nb == 0 && na > 0 && uniform() < 0.8) s = Side::Buy;
        if (na == 0 && nb > 0 && uniform() < 0.8) s = Side::Sell;
        if (side_full(s)) s = opposite(s);
        if (side_full(s)) return false;
        add(s, place(s), draw_qty());
        return true;
    }

    bool try_cancel() {
        const auto& v = book_.orders();
        if (v.empty()) return false;
        if (uniform() < 0.3) {
            const auto b = book_.best(uniform() < 0.5 ? Side::Buy : Side::Sell);
            if (b) {
                cancel(b->ref);
                return true;
            }
        }
        cancel(v[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))].ref);
        return true;
    }

    bool try_modify() {
        const auto& v = book_.orders();
        if (v.empty()) return false;
        const auto o = v[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))];
        MarketMessage m = base(MessageKind::OrderModify);
        m.order_ref = o.ref;
        m.quantity = draw_qty();
        std::int64_t p = o.price.raw;
        if (uniform() < 0.5) p += uniform_int(-3, 3) * tick();
        if (const auto opp = book_.best(opposite(o.side)))
            p = o.side == Side::Buy ? std::min(p, opp->price.raw - tick()) : std::max(p, opp->price.raw + tick());
        m.price = Price{std::max(p, tick())};
        emit(m);
        return true;
    }

    bool try_trade() {
        const int sign = next_sign();
        const Side hit = sign > 0 ? Side::Sell : Side::Buy;
        if (book_.count(hit) == 0) {
            if (side_full(hit)) return false;
            add(hit, place(hit), draw_qty());
            return true;
        }
        const auto queue = book_.priority_order(hit);
        const Quantity side_q = book_.side_quantity(hit);
        const Quantity best_q = queue.front().qty;
        Quantity v;
        if (c_.target_break_rate) {
            bool deplete = trades_ == 0 ? uniform() < *c_.target_break_rate
                                        : static_cast<double>(broken_) / static_cast<double>(trades_) < *c_.target_break_rate;
            if (side_q == 1) deplete = true;
            if (deplete) v = side_q;
            else if (uniform() < c_.sweep_probability && best_q < side_q) v = uniform_int(best_q, side_q - 1);
            else v = uniform_int(1, std::min(best_q, side_q - 1));
        } else if (uniform() < c_.sweep_probability && best_q < side_q) {
            v = uniform_int(best_q + 1, side_q);
        } else {
            v = uniform_int(1, best_q);
        }
        truth_->order_signs[sec_].push_back(sign);
        for (const auto& o : queue) {
            if (v == 0) break;
            const Quantity take = std::min(v, o.qty);
            trade_against(o, take);
            v -= take;
        }
        return true;
    }

    void walk() {
        const double z = std::normal_distribution<double>(0, c_.walk_sigma_ticks)(rng_);
        ref_price_ += static_cast<std::int64_t>(std::llround(z)) * tick();
        if (const auto m = book_.mid(); m && uniform() < 0.1)
            ref_price_ = static_cast<std::int64_t>(std::llround(*m * Price::kScale / static_cast<double>(tick()))) * tick();
        ref_price_ = std::max(ref_price_, 100 * tick());
    }

    void run_flow_day() {
        const std::size_t quota = std::max<std::size_t>(1, c_.messages_per_security / static_cast<std::size_t>(c_.n_days));
        const Nanos gap = (day_end_ - day_start_) / static_cast<Nanos>(quota + 1);
        const std::size_t stop = emitted_ + quota;
        while (emitted_ < stop) {
            advance(gap);
            walk();
            const double size = static_cast<double>(book_.orders().size());
            const double crowd = size / std::max(1.0, 2.0 * c_.target_orders_per_side);
            double w[4] = {c_.add_rate * (c_.shallow ? 1.0 : std::max(0.2, 1.5 - crowd)), c_.cancel_rate * crowd,
                           size > 0 ? c_.modify_rate : 0.0, size > 0 ? c_.trade_rate : 0.0};
            const double total = w[0] + w[1] + w[2] + w[3];
            double u = uniform() * total;
            int kind = 0;
            while (kind < 3 && u >= w[kind]) u -= w[kind++];
            bool done = false;
            switch (kind) {
            case 0: done = try_add(); break;
            case 1: done = try_cancel(); break;
            case 2: done = try_modify(); break;
            default: done = try_trade(); break;
            }
            if (!done && !try_cancel()) try_add();
        }
    }

    // Impact-law mode: volumes and target impacts are fixed up front so omega is exact.
    void plan_impact(Nanos first_day) {
        std::vector<std::int64_t> days;
        std::vector<double> vols;
        for (int d = 0; d < c_.n_days; ++d)
            for (std::size_t k = 0; k < c_.impact_trades_per_day; ++k) {
                days.push_back(first_day + d);
                vols.push_back(std::max(1.0, std::round(std::exp(std::log(1e4) * uniform()))));
            }
        plan_vol_ = vols;
        plan_omega_ = impact::normalize_volumes(days, vols);
        std::normal_distribution<double> z(0, 1);
        for (double w : plan_omega_) plan_dp_.push_back(std::pow(w, c_.impact->alpha) / c_.impact->lambda * std::exp(c_.impact->noise * z(rng_)));
        for (std::size_t i = 0; i < plan_vol_.size(); ++i) plan_sign_.push_back(next_sign());
    }

    void run_impact_day(int d) {
        const std::size_t n = c_.impact_trades_per_day;
        const Nanos gap = (day_end_ - day_start_) / static_cast<Nanos>(8 * n + 8);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = static_cast<std::size_t>(d) * n + k;
            const Side hit = plan_sign_[i] > 0 ? Side::Sell : Side::Buy;
            const Side other = opposite(hit);
            while (!book_.orders().empty()) {
                advance(gap);
                cancel(book_.orders().front().ref);
            }
            const std::int64_t spread = uniform_int(1, 4) * tick();
            const std::int64_t anchor = ref_price_;
            const std::int64_t other_p = other == Side::Buy ? anchor - spread / 2 : anchor + spread / 2;
            const std::int64_t near_p = other == Side::Buy ? other_p + spread : other_p - spread;
            const double m = 0.5 * static_cast<double>(other_p + near_p);
            const double dp = plan_dp_[i];
            std::int64_t far_p = hit == Side::Sell ? static_cast<std::int64_t>(std::llround(2 * m * std::exp(dp) - static_cast<double>(other_p)))
                                                   : static_cast<std::int64_t>(std::llround(2 * m * std::exp(-dp) - static_cast<double>(other_p)));
            far_p = hit == Side::Sell ? std::max(far_p, near_p + 1) : std::max<std::int64_t>(1, std::min(far_p, near_p - 1));
            const auto vol = static_cast<Quantity>(plan_vol_[i]);
            advance(gap);
            add(other, Price{other_p}, draw_qty());
            advance(gap);
            add(hit, Price{far_p}, 1'000'000);
            advance(gap);
            add(hit, Price{near_p}, vol);
            advance(gap);
            pending_dp_ = dp;
            pending_omega_ = plan_omega_[i];
            truth_->order_signs[sec_].push_back(plan_sign_[i]);
            trade_against(*book_.best(hit), vol);
            pending_dp_.reset();
            pending_omega_ = 0;
            ref_price_ = static_cast<std::int64_t>(std::llround(*book_.mid() * Price::kScale));
        }
    }

    const ScenarioConfig& c_;
    SecurityId sec_;
    std::mt19937_64 rng_;
    OracleBook book_;
    GroundTruth* truth_ = nullptr;
    std::vector<MarketMessage>* out_ = nullptr;
    std::int64_t ref_price_;
    OrderRef next_ref_;
    std::int64_t next_trade_;
    std::int64_t day_ = 0;
    Nanos day_start_ = 0;
    Nanos day_end_ = 0;
    Nanos now_ = 0;
    bool first_event_ = true;
    std::size_t emitted_ = 0;
    std::size_t trades_ = 0;
    std::size_t broken_ = 0;
    int last_sign_ = 0;
    std::optional<double> pending_dp_;
    double pending_omega_ = 0;
    std::vector<double> plan_vol_;
    std::vector<double> plan_omega_;
    std::vector<double> plan_dp_;
    std::vector<int> plan_sign_;
};

}  // namespace

Generated generate(const ScenarioConfig& config) {
    validate(config);
    Generated g;
    g.truth.law = config.impact;
    std::vector<MarketMessage> all;
    for (int s = 0; s < config.n_securities; ++s) {
        SecurityGenerator gen(config, config.first_security + s, static_cast<std::uint64_t>(s));
        gen.run(g.truth, all);
    }
    std::stable_sort(all.begin(), all.end(), [](const MarketMessage& a, const MarketMessage& b) { return a.event_ns < b.event_ns; });

    std::int64_t seq = 0;
    std::string& w = g.wire;
    auto write = [&](const MarketMessage& m) {
        const Nanos recv = m.event_ns + 1500 + (m.seq_no * 7919) % 20000;
        w += feed::encode_header(recv, 1);
        w += '\n';
        w += feed::encode_payload(m, 1);
        w += '\n';
    };
    for (auto& m : all) {
        m.seq_no = ++seq;
        write(m);
        g.messages.push_back(m);
        if (config.heartbeat_every > 0 && seq % static_cast<std::int64_t>(config.heartbeat_every) == 0) {
            auto hb = feed::make_heartbeat(++seq);
            hb.event_ns = m.event_ns;
            write(hb);
            ++g.heartbeats;
        }
    }
    return g;
}

}  // namespace mx::synth
