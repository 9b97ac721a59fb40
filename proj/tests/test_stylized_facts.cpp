#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mx/stylized_facts.hpp"
#include "mx/synthetic_market.hpp"
#include "mx/time.hpp"

using namespace mx;

namespace {

const Nanos kOpen = parse_iso("2019-01-02T07:00:00");  // 09:00 local

std::vector<double> naive_acf(const std::vector<double>& x, std::size_t L) {
    const double n = static_cast<double>(x.size());
    double mu = 0;
    for (double v : x) mu += v;
    mu /= n;
    double c0 = 0;
    for (double v : x) c0 += (v - mu) * (v - mu);
    std::vector<double> out;
    for (std::size_t l = 1; l <= L; ++l) {
        double c = 0;
        for (std::size_t i = 0; i + l < x.size(); ++i) c += (x[i] - mu) * (x[i + l] - mu);
        out.push_back(c / c0);
    }
    return out;
}

std::vector<double> powerlaw_sample(std::size_t n, double alpha, double x_min, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> x(n);
    for (auto& v : x) v = x_min * std::pow(1 - u(rng), -1 / (alpha - 1));
    return x;
}

L1Record trade_at(Nanos ts, double price, Quantity q) {
    L1Record r;
    r.ts = ts;
    r.type = EventType::Trade;
    r.trade = Price{static_cast<std::int64_t>(price * Price::kScale)};
    r.trade_vol = q;
    r.sign = TradeSign::Buyer;
    return r;
}

L1Record quote_at(Nanos ts, EventType t, double price) {
    L1Record r;
    r.ts = ts;
    r.type = t;
    const Price p{static_cast<std::int64_t>(price * Price::kScale)};
    if (t == EventType::Bid) r.bid = p, r.bid_vol = 10;
    else r.ask = p, r.ask_vol = 10;
    return r;
}

// One trade and one spread sample per bucket, identical every day.
std::vector<L1Record> uniform_day(std::int64_t day_offset) {
    std::vector<L1Record> l1;
    const Nanos base = kOpen + day_offset * kNanosPerDay;
    for (int b = 0; b < 47; ++b) {
        const Nanos t = base + b * 10 * kNanosPerMinute + kNanosPerMinute;
        l1.push_back(quote_at(t, EventType::Bid, 100));
        l1.push_back(quote_at(t, EventType::Ask, 102));
        l1.push_back(trade_at(t + 1, b % 2 ? 101 : 100, 10));
    }
    return l1;
}

}  // namespace

TEST_CASE("acf agrees with the double loop") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    for (std::size_t n : {50u, 1000u, 10000u}) {
        std::vector<double> x(n);
        double prev = 0;
        for (auto& v : x) v = prev = 0.6 * prev + z(rng);
        const std::size_t L = std::min<std::size_t>(n - 1, 1000);
        const auto a = facts::acf(x, L);
        const auto b = naive_acf(x, L);
        REQUIRE(a.rho.size() == L);
        double worst = 0;
        for (std::size_t l = 0; l < L; ++l) worst = std::max(worst, std::abs(a.rho[l] - b[l]));
        CHECK(worst < 1e-12);
        CHECK(a.band == doctest::Approx(1.96 / std::sqrt(static_cast<double>(n))));
        for (double r : a.rho) CHECK(std::abs(r) <= 1.0);
    }
}

TEST_CASE("alternating series and degenerate input") {
    std::vector<double> alt(1000);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? -1 : 1;
    const auto a = facts::acf(alt, 2);
    CHECK(a.rho[0] == doctest::Approx(-1.0 + 1.0 / 1000).epsilon(1e-12));
    CHECK(a.rho[1] == doctest::Approx(1.0 - 2.0 / 1000).epsilon(1e-12));

    std::vector<int> plus(100, 1);
    CHECK_THROWS_AS(facts::orderflow_acf(plus, 5), facts::DegenerateSeries);
    CHECK_THROWS(facts::acf(std::vector<double>{1, 2, 3}, 3));

    plus[50] = -1;
    const auto f = facts::orderflow_acf(plus, 1);
    std::vector<double> d(plus.begin(), plus.end());
    CHECK(f.rho[0] == doctest::Approx(naive_acf(d, 1)[0]).epsilon(1e-12));

    const auto csv = facts::acf_csv(a);
    CHECK(csv.starts_with("Lag,Log10Lag,ACF,Band\n1,0,"));
}

TEST_CASE("markov order flow decays as (2p-1)^l") {
    const auto s = synth::markov_signs(100000, 0.8, 3);
    const auto a = facts::orderflow_acf(s, 5);
    for (int l = 1; l <= 5; ++l) CHECK(std::abs(a.rho[l - 1] - std::pow(0.6, l)) < 0.02);
}

TEST_CASE("normal maximum likelihood") {
    const std::vector<double> c(7, 3.5);
    CHECK(facts::fit_normal(c).mean == 3.5);
    CHECK(facts::fit_normal(c).variance == 0);
    const std::vector<double> two = {0, 2};
    CHECK(facts::fit_normal(two).mean == 1);
    CHECK(facts::fit_normal(two).variance == 1);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(3, 2);
    std::vector<double> x(100000);
    for (auto& v : x) v = z(rng);
    const auto f = facts::fit_normal(x);
    CHECK(std::abs(f.mean - 3) < 0.02);
    CHECK(std::abs(f.variance - 4) < 0.06);
}

TEST_CASE("power-law closed forms") {
    const double e = std::exp(1.0);
    const std::vector<double> t1 = {e, e, e};
    CHECK(std::abs(facts::fit_powerlaw_tail(t1, 1).alpha - 2) < 1e-12);
    const std::vector<double> t2(4, e * e);
    CHECK(std::abs(facts::fit_powerlaw_tail(t2, 1).alpha - 1.5) < 1e-12);
    const std::vector<double> at_min(3, 2.0);
    CHECK_THROWS_AS(facts::fit_powerlaw_tail(at_min, 2), facts::DegenerateSeries);
    CHECK_THROWS(facts::fit_powerlaw_tail(t1, 0));
}

TEST_CASE("power-law recovery and tail symmetry") {
    const auto x = powerlaw_sample(100000, 2.5, 1, 7);
    const auto f = facts::fit_powerlaw_tail(x, 1);
    CHECK(std::abs(f.alpha - 2.5) < 0.02);
    CHECK(f.alpha > 1);

    std::mt19937_64 rng(9);
    std::student_t_distribution<double> st(3);
    std::vector<double> r(20000);
    for (auto& v : r) v = st(rng);
    std::vector<double> neg(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) neg[i] = -r[i];
    const auto lower = facts::fit_powerlaw(r, 5, facts::Tail::Lower);
    const auto upper = facts::fit_powerlaw(neg, 95, facts::Tail::Upper);
    CHECK(lower.alpha == upper.alpha);
    CHECK(lower.x_min == upper.x_min);
    CHECK(lower.n_tail == upper.n_tail);
    const auto up = facts::fit_powerlaw(r, 95, facts::Tail::Upper);
    CHECK(up.x_min == doctest::Approx(facts::percentile(r, 95)));
    CHECK(up.n_tail == facts::tail_values(r, up).size());
    // Student t with 3 dof has density tail exponent 4.
    CHECK(std::abs(up.alpha - 4) < 0.8);
}

TEST_CASE("percentile is type 7") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    CHECK(facts::percentile(x, 0) == 1);
    CHECK(facts::percentile(x, 100) == 5);
    CHECK(facts::percentile(x, 50) == 3);
    CHECK(facts::percentile(x, 10) == doctest::Approx(1.4));
}

TEST_CASE("qq and ccdf data") {
    const facts::NormalFit ref{0, 1};
    const std::vector<double> one = {0.3};
    const auto q1 = facts::qq_normal(one, ref);
    REQUIRE(q1.size() == 1);
    CHECK(q1[0].theoretical == doctest::Approx(0));

    // A sample placed exactly at the reference quantiles lies on the identity line.
    std::vector<double> exact;
    for (auto p : facts::qq_normal(std::vector<double>(99, 0.0), ref)) exact.push_back(p.theoretical);
    for (const auto& p : facts::qq_normal(exact, ref)) CHECK(p.empirical == doctest::Approx(p.theoretical));

    facts::PowerLawFit pl{facts::Tail::Upper, 1, 3, 0};
    const auto heavy = powerlaw_sample(20000, 2.0, 1, 4);
    const auto qq = facts::qq_powerlaw(heavy, pl);
    CHECK(qq.back().empirical > qq.back().theoretical);

    const auto sample = powerlaw_sample(5000, 2.5, 1, 5);
    const auto fit = facts::fit_powerlaw_tail(sample, 1);
    const auto cc = facts::ccdf(sample, fit);
    REQUIRE_FALSE(cc.empty());
    CHECK(cc.front().empirical == doctest::Approx(1));
    CHECK(cc.front().fitted == doctest::Approx(1).epsilon(1e-3));
    for (std::size_t i = 1; i < cc.size(); ++i) CHECK(cc[i].empirical <= cc[i - 1].empirical);
}

TEST_CASE("seasonality: one bucket holds everything") {
    std::vector<L1Record> l1 = {trade_at(kOpen + 35 * kNanosPerMinute, 100, 7),
                                trade_at(kOpen + 36 * kNanosPerMinute, 100, 3)};
    const std::vector<std::vector<L1Record>> streams = {l1};
    const auto c = facts::seasonality(streams, facts::SeasonKind::Volume);
    REQUIRE(c.values.size() == 47);
    for (std::size_t b = 0; b < 47; ++b) CHECK(c.values[b] == (b == 3 ? 1.0 : 0.0));
}

TEST_CASE("seasonality: flat under uniform activity, idempotent over identical days") {
    const std::vector<std::vector<L1Record>> one = {uniform_day(0)};
    auto two_days = uniform_day(0);
    const auto d2 = uniform_day(1);
    two_days.insert(two_days.end(), d2.begin(), d2.end());
    const std::vector<std::vector<L1Record>> two = {two_days};
    for (auto k : {facts::SeasonKind::Volume, facts::SeasonKind::Spread}) {
        const auto c = facts::seasonality(one, k);
        for (double v : c.values) CHECK(v == doctest::Approx(1.0 / 47).epsilon(1e-12));
        const auto c2 = facts::seasonality(two, k);
        CHECK(c2.days.size() == 2);
        for (std::size_t b = 0; b < 47; ++b) CHECK(std::abs(c2.values[b] - c.values[b]) < 1e-15);
    }
    const auto r1 = facts::seasonality(one, facts::SeasonKind::AbsReturn);
    const auto r2 = facts::seasonality(two, facts::SeasonKind::AbsReturn);
    for (std::size_t b = 0; b < 47; ++b) CHECK(std::abs(r1.values[b] - r2.values[b]) < 1e-15);
}

TEST_CASE("seasonality: daily shares sum to one on synthetic data") {
    synth::ScenarioConfig cfg;
    cfg.seed = 6;
    cfg.n_securities = 3;
    cfg.n_days = 3;
    cfg.messages_per_security = 6000;
    const auto g = synth::generate(cfg);
    std::vector<std::vector<L1Record>> streams;
    for (const auto& [sec, l1] : g.truth.l1) streams.push_back(l1);
    for (auto k : {facts::SeasonKind::Volume, facts::SeasonKind::AbsReturn, facts::SeasonKind::Spread}) {
        const auto c = facts::seasonality(streams, k);
        CHECK(c.days.size() == 3);
        for (const auto& day : c.daily) CHECK(std::abs(std::accumulate(day.begin(), day.end(), 0.0) - 1) < 1e-9);
    }
    std::vector<facts::SeasonalityCurve> curves = {facts::seasonality(streams, facts::SeasonKind::Volume)};
    CHECK(facts::seasonality_csv(curves).starts_with("Bucket,Start,volume\n0,09:00,"));
}
