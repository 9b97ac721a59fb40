#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mx/cost_model.hpp"

using namespace mx;
using cost::Component;

namespace {

Price zac(double v) { return Price{static_cast<std::int64_t>(std::llround(v * Price::kScale))}; }

// Quote and mids in ZAC.
taq::TradeObservation obs(double bid, double ask, double price, Quantity vol, double mid_after) {
    taq::TradeObservation t;
    t.bid_before = zac(bid);
    t.ask_before = zac(ask);
    t.mid_before = (bid + ask) / 2;
    t.mid_after = mid_after;
    t.price = zac(price);
    t.volume = vol;
    t.dp = std::log(mid_after / *t.mid_before);
    return t;
}

cost::CostBreakdown with(TradeSign side, double omega, double dc) {
    cost::CostBreakdown c;
    c.side = side;
    c.omega = omega;
    c.dc = dc;
    return c;
}

}  // namespace

TEST_CASE("published fee schedules") {
    const auto a2x = cost::a2x_schedule();
    CHECK(cost::fee(100000, a2x) == doctest::Approx(6.90).epsilon(1e-12));
    CHECK(cost::direct_cost(100000, 100, a2x) == doctest::Approx(0.069).epsilon(1e-12));
    CHECK(cost::fee(1e12, a2x) == doctest::Approx(355 + 154));
    CHECK(cost::fee(100000, a2x, cost::FeeRole::Passive) == doctest::Approx(2 + 2.9));

    const auto jse = cost::jse_schedule();
    // Transaction ceiling binds at 420.4 / 0.000048 and settlement at 180 / 0.000036.
    const double xt = 420.4 / (0.48 * 1e-4);
    const double xs = 180 / (0.36 * 1e-4);
    CHECK(std::round(xt * 100) / 100 == 8758333.33);
    CHECK(xs == doctest::Approx(5e6));
    CHECK(cost::fee(xs, jse) == doctest::Approx(xs * 0.48e-4 + 180));
    CHECK(cost::fee(xt, jse) == doctest::Approx(420.4 + 180));
    CHECK(cost::fee(xt * 2, jse) == doctest::Approx(420.4 + 180));
    CHECK(cost::fee(xt * 0.99, jse) < 420.4 + 180);
    CHECK(cost::fee(1e-9, jse) < 1e-12);
}

TEST_CASE("fee is nondecreasing and fee/value nonincreasing") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lg(0, 9);
    for (const auto& s : {cost::a2x_schedule(), cost::jse_schedule()}) {
        for (int i = 0; i < 10000; ++i) {
            double x = std::pow(10.0, lg(rng)), y = std::pow(10.0, lg(rng));
            if (x > y) std::swap(x, y);
            CHECK(cost::fee(x, s) <= cost::fee(y, s));
            CHECK(cost::fee(y, s) / y <= cost::fee(x, s) / x * (1 + 1e-12));
        }
    }
    auto open = cost::jse_schedule();
    open.transaction_ceiling_rand = open.settlement_ceiling_rand = std::numeric_limits<double>::infinity();
    CHECK(cost::fee(2e9, open) / 2e9 == doctest::Approx(cost::fee(1e9, open) / 1e9).epsilon(1e-14));
    // Past a ceiling, doubling volume at a fixed price lowers the per-share cost.
    const auto jse = cost::jse_schedule();
    CHECK(cost::direct_cost(2e7, 2e5, jse) < cost::direct_cost(1e7, 1e5, jse));
}

TEST_CASE("fee config parsing") {
    const auto s = cost::parse_fee_config(
        R"({"schedules":[{"exchange":"X","transaction_bps":1,"transaction_ceiling_rand":10,)"
        R"("settlement_bps":2,"settlement_ceiling_rand":20}]})");
    REQUIRE(s.size() == 1);
    CHECK(cost::fee(1000, cost::find_schedule(s, "X")) == doctest::Approx(0.3));
    CHECK_THROWS(cost::find_schedule(s, "Y"));
    CHECK_THROWS(cost::parse_fee_config(R"([{"exchange":"X","transaction_bps":-1,"transaction_ceiling_rand":10,)"
                                        R"("settlement_bps":2,"settlement_ceiling_rand":20}])"));
    CHECK_THROWS(cost::parse_fee_config(R"([{"exchange":"X","transaction_bps":1,"transaction_ceiling_rand":0,)"
                                        R"("settlement_bps":2,"settlement_ceiling_rand":20}])"));
}

TEST_CASE("slippage") {
    CHECK(cost::slippage(zac(10000), zac(10200)).rand == doctest::Approx(1.0));
    CHECK(cost::slippage(zac(10000), zac(10000)).rand == 0);
    const auto crossed = cost::slippage(zac(10200), zac(10000));
    CHECK(crossed.rand == doctest::Approx(1.0));
    CHECK(crossed.crossed);
}

TEST_CASE("relative cost forms") {
    CHECK(*cost::relative(100, 1, TradeSign::Buyer) == doctest::Approx(std::log(1.01)).epsilon(1e-14));
    CHECK(*cost::relative(100, 1, TradeSign::Seller) == doctest::Approx(std::log(0.99)).epsilon(1e-14));
    CHECK_FALSE(cost::relative(100, 100, TradeSign::Seller));

    // Mid R100, half-spread R1, mid unchanged.
    const auto t = obs(9900, 10100, 10100, 10, 10000);
    const auto jse = cost::jse_schedule();
    const auto c = *cost::cost_components(t, TradeSign::Buyer, 1, jse);
    CHECK(c.ds == doctest::Approx(std::log(1.01)).epsilon(1e-14));
    CHECK(c.dp == 0);
    CHECK(c.dc == doctest::Approx(std::log((100 + 1 + c.direct) / 100)).epsilon(1e-14));
    CHECK(c.direct == doctest::Approx(cost::fee(1010, jse) / 10));

    const auto s = *cost::cost_components(t, TradeSign::Seller, 1, jse);
    CHECK(s.ds == doctest::Approx(std::log(0.99)).epsilon(1e-14));
    CHECK(s.slippage == c.slippage);
    CHECK(s.direct == c.direct);

    cost::CostStats st;
    auto broken = t;
    broken.mid_after.reset();
    CHECK_FALSE(cost::cost_components(broken, TradeSign::Buyer, 1, jse, cost::FeeRole::Aggressor, &st));
    CHECK(st.broken_book == 1);
    const auto huge = obs(1, 30000, 1, 1, 1);
    CHECK_FALSE(cost::cost_components(huge, TradeSign::Seller, 1, jse, cost::FeeRole::Aggressor, &st));
    CHECK(st.undefined_log == 1);
}

TEST_CASE("additivity and sign conventions on random trades") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> mid(1000, 50000), half(0, 50), move(-100, 100);
    std::uniform_int_distribution<Quantity> vol(1, 100000);
    const auto a2x = cost::a2x_schedule();
    for (int i = 0; i < 5000; ++i) {
        const double m = mid(rng), h = half(rng);
        const auto t = obs(m - h, m + h, m + h, vol(rng), m + move(rng));
        for (auto side : {TradeSign::Buyer, TradeSign::Seller}) {
            const auto c = cost::cost_components(t, side, 1, a2x);
            if (!c) continue;
            CHECK(c->total == c->slippage + c->impact + c->direct);
            const double sgn = side == TradeSign::Buyer ? 1 : -1;
            for (double d : {c->ds, c->ddc, c->dp, c->dc}) CHECK(sgn * d >= 0);
        }
    }
}

TEST_CASE("cost curves") {
    const auto bins = impact::calibration_bins();
    std::vector<cost::CostBreakdown> flat;
    for (int i = 0; i < 200; ++i) {
        auto c = with(TradeSign::Buyer, std::pow(10.0, -1 + 2.0 * i / 200), 0.002);
        c.ds = 0.001;
        flat.push_back(c);
    }
    const auto cc = cost::cost_curve(flat, TradeSign::Buyer, bins);
    for (const auto& b : cc.bins) {
        REQUIRE_FALSE(b.empty());
        CHECK(b.dc == doctest::Approx(0.002));
        CHECK(b.ds == doctest::Approx(0.001));
    }
    CHECK(cost::cost_curve(flat, TradeSign::Seller, bins).bins[0].empty());

    // Trade value rising through the JSE ceiling: per-share fee relative to the mid falls in every bin.
    const auto jse = cost::jse_schedule();
    std::vector<cost::CostBreakdown> ceiling;
    for (std::size_t k = 0; k < bins.n; ++k) {
        const double w = bins.center(k);
        const auto volume = static_cast<Quantity>(std::llround(w * 1e6));
        const auto t = obs(9999, 10001, 10001, volume, 10000);
        ceiling.push_back(*cost::cost_components(t, TradeSign::Buyer, w, jse));
    }
    const auto dc = cost::cost_curve(ceiling, TradeSign::Buyer, bins);
    std::size_t binding = 0;
    for (std::size_t k = 1; k < bins.n; ++k) {
        if (bins.center(k - 1) * 1e6 * 100 < 420.4 / 0.48e-4) {
            CHECK(dc.bins[k].ddc == doctest::Approx(dc.bins[k - 1].ddc).epsilon(1e-6));
            continue;
        }
        ++binding;
        CHECK(dc.bins[k].ddc < dc.bins[k - 1].ddc);
    }
    CHECK(binding > 5);

    const std::vector<cost::CostCurve> both = {cc};
    CHECK(cost::cost_curve_csv(both, bins).starts_with("Side,Bin,BinLo,BinHi,Count,Omega,Ds,Ddc,Dp,Dc\nBI,0,0.1,"));
}

TEST_CASE("variability table") {
    const auto bins = impact::calibration_bins();
    cost::ExchangeCosts jse{"JSE", {{with(TradeSign::Buyer, 1, 0.001), with(TradeSign::Buyer, 1, 0.003)}}};
    cost::ExchangeCosts a2x{"A2X", {{with(TradeSign::Seller, 1, 0.002), with(TradeSign::Seller, 1, 0.002)},
                                    {with(TradeSign::Seller, 2, 0.002)}}};
    const std::vector<cost::ExchangeCosts> ex = {jse, a2x};
    const auto t = cost::variability_table(ex, bins);
    const auto k = *bins.index(1);
    CHECK(*t.at(k, Component::Dc, 0, TradeSign::Buyer) == doctest::Approx(1.0));
    CHECK(*t.at(k, Component::Omega, 0, TradeSign::Buyer) == 0);
    CHECK(*t.at(k, Component::Dc, 1, TradeSign::Seller) == 0);
    CHECK_FALSE(t.at(k, Component::Dc, 0, TradeSign::Seller));
    CHECK(t.excluded == 1);

    const auto csv = cost::variability_csv(t);
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 21);
    const auto header = csv.substr(0, csv.find('\n'));
    std::size_t cols = 1;
    for (char c : header) cols += c == ',';
    CHECK(cols == 1 + 5 * 2 * 2);
    CHECK(header.starts_with("Bin,"));
    CHECK(csv.find("\n1,") != std::string::npos);
    CHECK(csv.find(",1.00,") != std::string::npos);
    CHECK(cost::table_scale(Component::Dp) == 1e3);
    CHECK(cost::table_scale(Component::Omega) == 1e1);
}
