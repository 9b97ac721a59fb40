#include <doctest.h>

#include <random>

#include "mx/classification.hpp"
#include "mx/synthetic_market.hpp"
#include "mx/taq_core.hpp"
#include "mx/time.hpp"

using namespace mx;
using classify::Rule;

namespace {

const Nanos kT0 = parse_iso("2019-01-02T08:00:00");

classify::TradeInput t(double price, std::optional<double> mid, std::optional<TradeSign> truth = std::nullopt,
                       Nanos ts = kT0) {
    classify::TradeInput x;
    x.ts = ts;
    x.price = Price{static_cast<std::int64_t>(price * Price::kScale)};
    x.volume = 1;
    x.mid_before = mid;
    x.truth = truth;
    return x;
}

std::vector<std::optional<TradeSign>> signs(std::span<const classify::SignedTrade> s) {
    std::vector<std::optional<TradeSign>> out;
    for (const auto& x : s) out.push_back(x.inferred);
    return out;
}

}  // namespace

TEST_CASE("trade above the mid is a buy under every rule") {
    const std::vector<classify::TradeInput> tr = {t(100, 100, {}, kT0), t(101, 100.5, {}, kT0 + 1)};
    for (auto r : classify::kAllRules) CHECK(classify::classify(tr, r)[1].inferred == TradeSign::Buyer);
}

TEST_CASE("tick rule needs a differing prior price, quote rule does not") {
    const std::vector<classify::TradeInput> tr = {t(100, 100, {}, kT0), t(100, 99.5, {}, kT0 + 1)};
    const auto tick = classify::classify(tr, Rule::Tick);
    CHECK_FALSE(tick[0].inferred);
    CHECK_FALSE(tick[1].inferred);
    const auto quote = classify::classify(tr, Rule::Quote);
    CHECK_FALSE(quote[0].inferred);
    CHECK(quote[1].inferred == TradeSign::Buyer);
}

TEST_CASE("Lee-Ready falls back to the tick test at the mid") {
    const std::vector<classify::TradeInput> tr = {t(99, 100, {}, kT0), t(100, 100, {}, kT0 + 1),
                                                  t(100, 100, {}, kT0 + 2), t(100, std::nullopt, {}, kT0 + 3)};
    const auto lr = classify::classify(tr, Rule::LeeReady);
    CHECK(lr[0].inferred == TradeSign::Seller);
    CHECK(lr[1].inferred == TradeSign::Buyer);
    // Zero tick: last differing price was lower.
    CHECK(lr[2].inferred == TradeSign::Buyer);
    CHECK(lr[3].inferred == TradeSign::Buyer);
    CHECK(lr[3].no_mid);
    CHECK_FALSE(classify::classify(tr, Rule::Quote)[3].inferred);
}

TEST_CASE("tick rule resets each day") {
    const std::vector<classify::TradeInput> tr = {t(100, {}, {}, kT0), t(101, {}, {}, kT0 + 1),
                                                  t(102, {}, {}, kT0 + kNanosPerDay)};
    const auto s = classify::tick_signs(tr);
    CHECK_FALSE(s[0]);
    CHECK(s[1] == TradeSign::Buyer);
    CHECK_FALSE(s[2]);
}

TEST_CASE("evaluation arithmetic") {
    std::vector<classify::SignedTrade> all(5);
    for (auto& x : all) x.inferred = x.truth = TradeSign::Buyer;
    CHECK(*classify::evaluate(all, Rule::Quote).accuracy == 1.0);

    std::vector<classify::SignedTrade> mixed(101);
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        mixed[i].truth = TradeSign::Seller;
        if (i < 99) mixed[i].inferred = TradeSign::Seller;
        else if (i == 99) mixed[i].inferred = TradeSign::Buyer;
    }
    const auto e = classify::evaluate(mixed, Rule::Tick);
    CHECK(e.n_trades == 101);
    CHECK(e.n_unclassified == 1);
    CHECK(e.n_correct == 99);
    CHECK(*e.accuracy == doctest::Approx(0.99));

    std::vector<classify::SignedTrade> none(2);
    none[0].truth = TradeSign::Buyer;
    CHECK_THROWS_AS(classify::evaluate(none, Rule::Quote), classify::NoGroundTruth);
}

TEST_CASE("report layout") {
    std::vector<classify::TradeInput> tr;
    for (int i = 0; i < 10; ++i) tr.push_back(t(100 + (i % 2 ? 1 : -1), 100, i % 2 ? TradeSign::Buyer : TradeSign::Seller, kT0 + i));
    const std::vector<classify::SecurityReport> reports = {classify::evaluate_all("NPN", tr)};
    const auto csv = classify::accuracy_table_csv(reports);
    CHECK(csv == "Security,QuoteRule,TickRule,LeeReadyRule\nNPN,100.00,100.00,100.00\n");
    CHECK(classify::detail_csv(reports).starts_with("Security,Rule,Trades,Unclassified,Correct,NoMid,Accuracy\n"));
}

TEST_CASE("dominance, translation invariance and exactness on crossing trades") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> tick(-3, 3);
    std::bernoulli_distribution no_mid(0.05);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<classify::TradeInput> tr;
        double mid = 1000;
        for (int i = 0; i < 400; ++i) {
            mid += tick(rng);
            const int off = tick(rng);
            const auto truth = off > 0 ? TradeSign::Buyer : TradeSign::Seller;
            tr.push_back(t(mid + off, no_mid(rng) ? std::optional<double>{} : mid, truth, kT0 + i * kNanosPerSecond));
        }
        const auto q = classify::classify(tr, Rule::Quote);
        const auto lr = classify::classify(tr, Rule::LeeReady);
        for (std::size_t i = 0; i < tr.size(); ++i) {
            if (q[i].inferred) {
                CHECK(lr[i].inferred == q[i].inferred);
                if (tr[i].price.zac() != *tr[i].mid_before) CHECK(q[i].inferred == tr[i].truth);
            }
        }
        auto shifted = tr;
        for (auto& x : shifted) x.price.raw += 37 * Price::kScale;
        CHECK(classify::tick_signs(shifted) == classify::tick_signs(tr));
        CHECK(signs(classify::classify(shifted, Rule::Tick)) == signs(classify::classify(tr, Rule::Tick)));
    }
}

TEST_CASE("synthetic feed: quote and Lee-Ready are exact") {
    synth::ScenarioConfig cfg;
    cfg.seed = 21;
    cfg.n_days = 2;
    cfg.messages_per_security = 5000;
    const auto g = synth::generate(cfg);
    const auto l1 = taq::enrich(g.truth.l1.begin()->second);
    const auto trades = classify::trades_from_l1(l1);
    REQUIRE(trades.size() > 100);
    const auto rep = classify::evaluate_all("S", trades);
    CHECK(*rep.rules[0].accuracy == 1.0);
    CHECK(*rep.rules[2].accuracy == 1.0);
    // First trade of each day has no tick reference.
    CHECK(rep.rules[1].n_unclassified >= 2);
}
