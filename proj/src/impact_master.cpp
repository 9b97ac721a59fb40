#include "mx/impact_master.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_fit.h>
#include <gsl/gsl_multimin.h>
#include <nlohmann/json.hpp>

#include "mx/l1.hpp"
#include "mx/stylized_facts.hpp"

namespace mx::impact {

Bins Bins::log_spaced(double lo, double hi, std::size_t n) {
    if (!(lo > 0) || !(hi > lo) || n == 0) throw std::invalid_argument("Bins: need 0 < lo < hi and n > 0");
    Bins b{lo, hi, n, {}};
    const double a = std::log10(lo);
    const double step = (std::log10(hi) - a) / static_cast<double>(n);
    for (std::size_t k = 0; k <= n; ++k) b.edges.push_back(std::pow(10.0, a + step * static_cast<double>(k)));
    b.edges.front() = lo;
    b.edges.back() = hi;
    return b;
}

std::optional<std::size_t> Bins::index(double x) const {
    if (!(x >= lo && x <= hi)) return std::nullopt;
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    const auto k = static_cast<std::size_t>(it - edges.begin()) - 1;
    return std::min(k, n - 1);
}

std::vector<double> normalize_volumes(std::span<const std::int64_t> days, std::span<const double> volumes) {
    if (days.size() != volumes.size()) throw std::invalid_argument("normalize_volumes: size mismatch");
    std::map<std::int64_t, double> total;
    for (std::size_t i = 0; i < days.size(); ++i) total[days[i]] += volumes[i];
    for (const auto& [d, v] : total)
        if (!(v > 0)) throw std::invalid_argument(fmt::format("normalize_volumes: day {} has zero volume", d));
    const double scale = static_cast<double>(days.size()) / static_cast<double>(total.size());
    std::vector<double> out(days.size());
    for (std::size_t i = 0; i < days.size(); ++i) out[i] = volumes[i] / total[days[i]] * scale;
    return out;
}

std::vector<NormalizedTrade> normalized_trades(std::span<const taq::TradeObservation> trades,
                                               std::span<const std::optional<TradeSign>> signs) {
    if (!signs.empty() && signs.size() != trades.size())
        throw std::invalid_argument("normalized_trades: sign count mismatch");
    std::vector<std::int64_t> days;
    std::vector<double> vols;
    for (const auto& t : trades) {
        days.push_back(t.day);
        vols.push_back(static_cast<double>(t.volume));
    }
    const auto omega = normalize_volumes(days, vols);
    std::vector<NormalizedTrade> out;
    for (std::size_t i = 0; i < trades.size(); ++i) {
        const auto sign = signs.empty() ? trades[i].sign : signs[i];
        if (!trades[i].dp || !sign) continue;
        out.push_back({omega[i], *trades[i].dp, *sign, trades[i].day});
    }
    return out;
}

double average_daily_value(std::span<const taq::TradeObservation> trades) {
    std::map<std::int64_t, double> value;
    for (const auto& t : trades) value[t.day] += t.price.rand() * static_cast<double>(t.volume);
    if (value.empty()) return 0;
    double s = 0;
    for (const auto& [d, v] : value) s += v;
    return s / static_cast<double>(value.size());
}

namespace {

double side_dp(const NormalizedTrade& t) { return t.side == TradeSign::Seller ? std::abs(t.dp) : t.dp; }

struct Indexed {
    std::size_t bin;
    double omega;
    double dp;
};

std::vector<Indexed> index_side(std::span<const NormalizedTrade> trades, TradeSign side, const Bins& bins) {
    std::vector<Indexed> out;
    for (const auto& t : trades) {
        if (t.side != side) continue;
        if (auto k = bins.index(t.omega)) out.push_back({*k, t.omega, side_dp(t)});
    }
    return out;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

// Runs fn(r) for r in [0, n) over `jobs` threads; fn must only touch slot r.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (jobs == 1) {
        for (std::size_t r = 0; r < n; ++r) fn(r);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j)
        pool.emplace_back([&, j] {
            for (std::size_t r = j; r < n; r += jobs) fn(r);
        });
    for (auto& t : pool) t.join();
}

std::optional<Interval> envelope_of(std::vector<double> values, double level) {
    std::erase_if(values, [](double v) { return std::isnan(v); });
    if (values.empty()) return std::nullopt;
    const double tail = (1.0 - level) / 2.0 * 100.0;
    return Interval{facts::percentile(values, tail), facts::percentile(values, 100.0 - tail)};
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

SideCurve impact_curve(std::span<const NormalizedTrade> trades, TradeSign side, const Bins& bins) {
    SideCurve c{side, std::vector<BinStat>(bins.n)};
    for (const auto& t : index_side(trades, side, bins)) {
        auto& b = c.bins[t.bin];
        ++b.count;
        b.omega += t.omega;
        b.dp += t.dp;
    }
    for (auto& b : c.bins)
        if (b.count > 0) b.omega /= static_cast<double>(b.count), b.dp /= static_cast<double>(b.count);
    return c;
}

std::vector<std::optional<Interval>> bootstrap_envelope(std::span<const NormalizedTrade> trades, TradeSign side,
                                                        const Bins& bins, const BootstrapOptions& opts) {
    const auto pts = index_side(trades, side, bins);
    // Resampling draws from the whole side, including trades outside the bin range.
    std::vector<std::optional<std::size_t>> bin_of;
    std::vector<double> dp_of;
    for (const auto& t : trades) {
        if (t.side != side) continue;
        bin_of.push_back(bins.index(t.omega));
        dp_of.push_back(side_dp(t));
    }
    std::vector<std::optional<Interval>> out(bins.n);
    if (bin_of.empty()) return out;
    std::vector<std::vector<double>> means(bins.n, std::vector<double>(opts.n_boot, kNaN));
    parallel_for(opts.n_boot, opts.jobs, [&](std::size_t r) {
        auto rng = substream(opts.seed, r);
        std::uniform_int_distribution<std::size_t> pick(0, bin_of.size() - 1);
        std::vector<double> sum(bins.n, 0);
        std::vector<std::size_t> cnt(bins.n, 0);
        for (std::size_t i = 0; i < bin_of.size(); ++i) {
            const auto j = pick(rng);
            if (!bin_of[j]) continue;
            sum[*bin_of[j]] += dp_of[j];
            ++cnt[*bin_of[j]];
        }
        for (std::size_t k = 0; k < bins.n; ++k)
            if (cnt[k] > 0) means[k][r] = sum[k] / static_cast<double>(cnt[k]);
    });
    std::vector<bool> occupied(bins.n, false);
    for (const auto& p : pts) occupied[p.bin] = true;
    for (std::size_t k = 0; k < bins.n; ++k)
        if (occupied[k]) out[k] = envelope_of(std::move(means[k]), opts.level);
    return out;
}

SecurityCurve security_curve(std::string name, double C, const SideCurve& curve) {
    SecurityCurve s{std::move(name), C, {}};
    for (const auto& b : curve.bins)
        if (!b.empty()) s.points.push_back({b.omega, b.dp});
    return s;
}

double master_objective(std::span<const SecurityCurve> curves, double delta, double gamma, const Bins& bins,
                        std::size_t* bins_used) {
    std::vector<std::vector<std::pair<double, double>>> per_bin(bins.n);
    for (const auto& c : curves) {
        const double sx = std::pow(c.C, -delta);
        const double sy = std::pow(c.C, gamma);
        for (const auto& p : c.points)
            if (auto k = bins.index(p.omega)) per_bin[*k].push_back({p.omega * sx, p.dp * sy});
    }
    double total = 0;
    std::size_t used = 0;
    for (const auto& pts : per_bin) {
        if (pts.size() < 2) continue;
        const double n = static_cast<double>(pts.size());
        double mx = 0, my = 0, ymax = 0;
        for (const auto& [x, y] : pts) mx += x, my += y, ymax = std::max(ymax, std::abs(y));
        mx /= n;
        my /= n;
        if (!(mx > 0) || !(std::abs(my) > 1e-12 * ymax)) continue;
        double vx = 0, vy = 0;
        for (const auto& [x, y] : pts) vx += (x - mx) * (x - mx), vy += (y - my) * (y - my);
        total += vx / n / (mx * mx) + vy / n / (my * my);
        ++used;
    }
    if (bins_used != nullptr) *bins_used = used;
    return used == 0 ? kNaN : total / static_cast<double>(used);
}

namespace {

struct ObjectiveData {
    std::span<const SecurityCurve> curves;
    const Bins* bins;
};

double gsl_objective(const gsl_vector* v, void* params) {
    const auto* d = static_cast<const ObjectiveData*>(params);
    const double e = master_objective(d->curves, gsl_vector_get(v, 0), gsl_vector_get(v, 1), *d->bins);
    return std::isnan(e) ? std::numeric_limits<double>::max() : e;
}

}  // namespace

MasterFit calibrate_master(std::span<const SecurityCurve> curves, const Bins& bins, const CalibrationOptions& opts) {
    MasterFit fit;
    for (const auto& c : curves) fit.C.emplace_back(c.name, c.C);
    if (curves.size() < 2) {
        fit.degenerate = true;
        fit.reason = "fewer than two securities";
        return fit;
    }
    for (const auto& c : curves)
        if (!(c.C > 0)) throw std::invalid_argument(fmt::format("calibrate_master: non-positive C for {}", c.name));
    const auto [cmin, cmax] = std::minmax_element(curves.begin(), curves.end(),
                                                  [](const auto& a, const auto& b) { return a.C < b.C; });
    if (cmax->C - cmin->C <= 1e-12 * cmax->C) {
        fit.degenerate = true;
        fit.reason = "all securities share the same C; the objective does not depend on (delta, gamma)";
        return fit;
    }

    const auto steps = static_cast<std::size_t>(std::llround((opts.grid_hi - opts.grid_lo) / opts.grid_step));
    GridPoint best{0, 0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i <= steps; ++i) {
        for (std::size_t j = 0; j <= steps; ++j) {
            const double d = opts.grid_lo + opts.grid_step * static_cast<double>(i);
            const double g = opts.grid_lo + opts.grid_step * static_cast<double>(j);
            const double e = master_objective(curves, d, g, bins);
            if (opts.keep_grid) fit.grid.push_back({d, g, e});
            if (!std::isnan(e) && e < best.epsilon) best = {d, g, e};
        }
    }
    if (!std::isfinite(best.epsilon)) {
        fit.degenerate = true;
        fit.reason = "no calibration bin holds points from two securities";
        return fit;
    }
    fit.grid_best_epsilon = best.epsilon;

    ObjectiveData data{curves, &bins};
    gsl_multimin_function f{&gsl_objective, 2, &data};
    gsl_vector* x = gsl_vector_alloc(2);
    gsl_vector* step = gsl_vector_alloc(2);
    gsl_vector_set(x, 0, best.delta);
    gsl_vector_set(x, 1, best.gamma);
    gsl_vector_set_all(step, opts.grid_step);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
    gsl_multimin_fminimizer_set(s, &f, x, step);
    for (int iter = 0; iter < 5000; ++iter) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-10) == GSL_SUCCESS) break;
    }
    double d = best.delta, g = best.gamma, e = best.epsilon;
    if (s->fval <= e) {
        d = gsl_vector_get(s->x, 0);
        g = gsl_vector_get(s->x, 1);
        e = s->fval;
    }
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);

    fit.delta = d;
    fit.gamma = g;
    fit.epsilon = master_objective(curves, d, g, bins, &fit.bins_used);
    return fit;
}

std::string master_json(const MasterFit& fit, std::string_view side) {
    nlohmann::ordered_json j;
    j["side"] = side;
    j["degenerate"] = fit.degenerate;
    if (fit.degenerate) j["reason"] = fit.reason;
    j["delta"] = fit.delta ? nlohmann::ordered_json(*fit.delta) : nlohmann::ordered_json(nullptr);
    j["gamma"] = fit.gamma ? nlohmann::ordered_json(*fit.gamma) : nlohmann::ordered_json(nullptr);
    j["epsilon"] = fit.epsilon ? nlohmann::ordered_json(*fit.epsilon) : nlohmann::ordered_json(nullptr);
    j["bins_used"] = fit.bins_used;
    auto& c = j["C"] = nlohmann::ordered_json::object();
    for (const auto& [name, v] : fit.C) c[name] = v;
    if (fit.delta && fit.gamma) j["caption"] = fmt::format("delta = {:.6g}, gamma = {:.6f}", *fit.delta, *fit.gamma);
    return j.dump(2) + "\n";
}

LiquidityFit fit_liquidity_exponent(const SideCurve& curve, double lo, double hi) {
    std::vector<double> lx, ly;
    LiquidityFit out;
    for (const auto& b : curve.bins) {
        if (b.empty() || b.omega < lo || b.omega > hi) continue;
        if (!(b.dp > 0)) {
            ++out.bins_excluded;
            continue;
        }
        lx.push_back(std::log(b.omega));
        ly.push_back(std::log(b.dp));
    }
    if (lx.size() < 3) throw std::invalid_argument("fit_liquidity_exponent: fewer than three usable bins");
    double c0, c1, cov00, cov01, cov11, sumsq;
    gsl_fit_linear(lx.data(), 1, ly.data(), 1, lx.size(), &c0, &c1, &cov00, &cov01, &cov11, &sumsq);
    out.alpha = c1;
    out.lambda = std::exp(-c0);
    out.bins_used = lx.size();
    return out;
}

namespace {

// Per-bin average of rescaled curves across securities; NaN where no security has data.
std::vector<std::pair<double, double>> averaged(const std::vector<SideCurve>& curves,
                                                std::span<const SecurityTrades> secs, double delta, double gamma,
                                                std::vector<std::size_t>* count = nullptr) {
    const std::size_t nb = curves.front().bins.size();
    std::vector<std::pair<double, double>> out(nb, {0.0, 0.0});
    std::vector<std::size_t> n(nb, 0);
    for (std::size_t s = 0; s < curves.size(); ++s) {
        const double sx = std::pow(secs[s].C, -delta);
        const double sy = std::pow(secs[s].C, gamma);
        for (std::size_t k = 0; k < nb; ++k) {
            const auto& b = curves[s].bins[k];
            if (b.empty()) continue;
            out[k].first += b.omega * sx;
            out[k].second += b.dp * sy;
            ++n[k];
        }
    }
    for (std::size_t k = 0; k < nb; ++k) {
        if (n[k] == 0) out[k] = {kNaN, kNaN};
        else out[k].first /= static_cast<double>(n[k]), out[k].second /= static_cast<double>(n[k]);
    }
    if (count != nullptr) *count = n;
    return out;
}

}  // namespace

std::vector<MasterPoint> master_curve(std::span<const SecurityTrades> securities, TradeSign side, double delta,
                                      double gamma, const Bins& bins, const BootstrapOptions& opts) {
    std::vector<MasterPoint> out;
    if (securities.empty()) return out;
    std::vector<SideCurve> curves;
    for (const auto& s : securities) curves.push_back(impact_curve(s.trades, side, bins));
    std::vector<std::size_t> count;
    const auto base = averaged(curves, securities, delta, gamma, &count);

    std::vector<std::vector<NormalizedTrade>> pools;
    for (const auto& s : securities) {
        auto& p = pools.emplace_back();
        for (const auto& t : s.trades)
            if (t.side == side) p.push_back(t);
    }
    std::vector<std::vector<double>> ys(bins.n, std::vector<double>(opts.n_boot, kNaN));
    parallel_for(opts.n_boot, opts.jobs, [&](std::size_t r) {
        std::vector<SideCurve> boot;
        for (std::size_t s = 0; s < pools.size(); ++s) {
            std::vector<NormalizedTrade> sample;
            if (!pools[s].empty()) {
                auto rng = substream(opts.seed, r, s + 1);
                std::uniform_int_distribution<std::size_t> pick(0, pools[s].size() - 1);
                sample.reserve(pools[s].size());
                for (std::size_t i = 0; i < pools[s].size(); ++i) sample.push_back(pools[s][pick(rng)]);
            }
            boot.push_back(impact_curve(sample, side, bins));
        }
        const auto avg = averaged(boot, securities, delta, gamma);
        for (std::size_t k = 0; k < bins.n; ++k) ys[k][r] = avg[k].second;
    });
    for (std::size_t k = 0; k < bins.n; ++k) {
        if (count[k] == 0) continue;
        out.push_back({k, base[k].first, base[k].second, count[k], envelope_of(std::move(ys[k]), opts.level)});
    }
    return out;
}

std::string curve_csv(const SideCurve& curve, const Bins& bins, std::span<const std::optional<Interval>> envelope) {
    std::string out = "Bin,BinLo,BinHi,Count,Omega,Dp,EnvLo,EnvHi\n";
    for (std::size_t k = 0; k < curve.bins.size(); ++k) {
        const auto& b = curve.bins[k];
        std::optional<double> om, dp, lo, hi;
        if (!b.empty()) om = b.omega, dp = b.dp;
        if (k < envelope.size() && envelope[k]) lo = envelope[k]->lo, hi = envelope[k]->hi;
        out += fmt::format("{},{},{},{},{},{},{},{}\n", k, bins.edges[k], bins.edges[k + 1], b.count, format_number(om),
                           format_number(dp), format_number(lo), format_number(hi));
    }
    return out;
}

std::string master_curve_csv(std::span<const MasterPoint> points, const Bins& bins) {
    std::string out = "Bin,BinLo,BinHi,Securities,X,Y,EnvLo,EnvHi\n";
    for (const auto& p : points) {
        std::optional<double> lo, hi;
        if (p.envelope) lo = p.envelope->lo, hi = p.envelope->hi;
        out += fmt::format("{},{},{},{},{},{},{},{}\n", p.bin, bins.edges[p.bin], bins.edges[p.bin + 1], p.securities,
                           p.x, p.y, format_number(lo), format_number(hi));
    }
    return out;
}

}  // namespace mx::impact
