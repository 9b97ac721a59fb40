#include "mx/stylized_facts.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "mx/time.hpp"

namespace mx::facts {

AcfResult acf(std::span<const double> x, std::size_t max_lag) {
    const std::size_t n = x.size();
    if (n <= max_lag) throw std::invalid_argument(fmt::format("acf: need more than {} points, got {}", max_lag, n));
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    std::vector<double> c(n);
    for (std::size_t t = 0; t < n; ++t) c[t] = x[t] - mean;
    double c0 = 0;
    for (double v : c) c0 += v * v;
    if (c0 == 0) throw DegenerateSeries("acf: constant series");
    AcfResult out;
    out.n = n;
    out.band = 1.96 / std::sqrt(static_cast<double>(n));
    out.rho.resize(max_lag);
    for (std::size_t l = 1; l <= max_lag; ++l) {
        double s = 0;
        for (std::size_t t = 0; t + l < n; ++t) s += c[t] * c[t + l];
        out.rho[l - 1] = s / c0;
    }
    return out;
}

AcfResult orderflow_acf(std::span<const int> signs, std::size_t max_lag) {
    std::vector<double> x(signs.begin(), signs.end());
    for (double v : x)
        if (v != 1.0 && v != -1.0) throw std::invalid_argument("orderflow_acf: signs must be +1 or -1");
    return acf(x, max_lag);
}

std::string acf_csv(const AcfResult& a) {
    std::string out = "Lag,Log10Lag,ACF,Band\n";
    for (std::size_t l = 1; l <= a.rho.size(); ++l)
        out += fmt::format("{},{},{},{}\n", l, std::log10(static_cast<double>(l)), a.rho[l - 1], a.band);
    return out;
}

NormalFit fit_normal(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("fit_normal: empty sample");
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, ss / n};
}

double percentile(std::span<const double> x, double p) {
    if (x.empty()) throw std::invalid_argument("percentile: empty sample");
    if (p < 0 || p > 100) throw std::invalid_argument("percentile: p outside [0, 100]");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double h = (static_cast<double>(s.size()) - 1) * p / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

PowerLawFit fit_powerlaw_tail(std::span<const double> tail, double x_min) {
    if (tail.empty()) throw std::invalid_argument("fit_powerlaw: empty tail");
    if (!(x_min > 0)) throw std::invalid_argument("fit_powerlaw: x_min must be positive");
    double s = 0;
    for (double v : tail) {
        if (v < x_min) throw std::invalid_argument("fit_powerlaw: tail value below x_min");
        s += std::log(v / x_min);
    }
    if (s == 0) throw DegenerateSeries("fit_powerlaw: every tail value equals x_min");
    PowerLawFit f;
    f.x_min = x_min;
    f.n_tail = tail.size();
    f.alpha = 1.0 + static_cast<double>(tail.size()) / s;
    return f;
}

std::vector<double> tail_values(std::span<const double> x, const PowerLawFit& fit) {
    std::vector<double> t;
    for (double v : x) {
        const double o = fit.tail == Tail::Upper ? v : -v;
        if (o >= fit.x_min) t.push_back(o);
    }
    return t;
}

PowerLawFit fit_powerlaw(std::span<const double> x, double pct, Tail tail) {
    std::vector<double> o(x.begin(), x.end());
    if (tail == Tail::Lower) {
        for (double& v : o) v = -v;
        pct = 100.0 - pct;
    }
    PowerLawFit probe;
    probe.x_min = percentile(o, pct);
    auto t = tail_values(o, probe);
    auto f = fit_powerlaw_tail(t, probe.x_min);
    f.tail = tail;
    return f;
}

std::vector<CcdfPoint> ccdf(std::span<const double> x, const PowerLawFit& fit) {
    auto t = tail_values(x, fit);
    std::sort(t.begin(), t.end());
    std::vector<CcdfPoint> out;
    const double n = static_cast<double>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i > 0 && t[i] == t[i - 1]) continue;
        out.push_back({t[i], (n - static_cast<double>(i)) / n, std::pow(t[i] / fit.x_min, 1.0 - fit.alpha)});
    }
    return out;
}

namespace {

std::vector<QqPoint> qq(std::span<const double> sample, auto quantile) {
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    std::vector<QqPoint> out;
    const double n = static_cast<double>(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back({quantile((static_cast<double>(i) + 0.5) / n), s[i]});
    return out;
}

}  // namespace

std::vector<QqPoint> qq_normal(std::span<const double> sample, const NormalFit& ref) {
    if (!(ref.variance > 0)) throw std::invalid_argument("qq_normal: reference variance must be positive");
    const boost::math::normal_distribution<double> dist(ref.mean, std::sqrt(ref.variance));
    return qq(sample, [&](double p) { return boost::math::quantile(dist, p); });
}

std::vector<QqPoint> qq_powerlaw(std::span<const double> sample, const PowerLawFit& ref) {
    return qq(sample, [&](double p) { return ref.x_min * std::pow(1.0 - p, -1.0 / (ref.alpha - 1.0)); });
}

std::string_view to_string(SeasonKind k) {
    switch (k) {
    case SeasonKind::Volume: return "volume";
    case SeasonKind::AbsReturn: return "absret";
    case SeasonKind::Spread: return "spread";
    }
    return "?";
}

namespace {

struct DayBuckets {
    std::vector<double> sum;
    std::vector<double> weight;
};

}  // namespace

SeasonalityCurve seasonality(std::span<const std::vector<L1Record>> streams, SeasonKind kind,
                             const taq::Session& session, int bucket_minutes) {
    if (bucket_minutes <= 0) throw std::invalid_argument("seasonality: bucket width must be positive");
    const Nanos width = bucket_minutes * kNanosPerMinute;
    const auto nb = static_cast<std::size_t>((session.close - session.open + width - 1) / width);

    SeasonalityCurve out;
    out.kind = kind;
    out.bucket_minutes = bucket_minutes;

    // day -> per-bucket numerator and denominator accumulated across securities
    std::map<std::int64_t, DayBuckets> acc;
    auto slot = [&](Nanos ts) -> std::optional<std::pair<std::int64_t, std::size_t>> {
        const auto lt = to_local_time(ts);
        if (!session.contains(lt.time_of_day())) return std::nullopt;
        return std::pair{lt.day(), static_cast<std::size_t>((lt.time_of_day() - session.open) / width)};
    };
    auto day_of = [&](std::int64_t d) -> DayBuckets& {
        auto [it, fresh] = acc.try_emplace(d);
        if (fresh) it->second = {std::vector<double>(nb), std::vector<double>(nb)};
        return it->second;
    };

    for (const auto& l1 : streams) {
        if (kind == SeasonKind::Volume) {
            std::map<std::int64_t, std::pair<std::vector<double>, std::vector<double>>> mine;  // volume, count
            for (const auto& r : l1) {
                if (r.type != EventType::Trade) continue;
                const auto s = slot(r.ts);
                if (!s) continue;
                auto& [vol, cnt] = mine[s->first];
                if (vol.empty()) vol.assign(nb, 0), cnt.assign(nb, 0);
                vol[s->second] += static_cast<double>(r.trade_vol.value_or(0));
                cnt[s->second] += 1;
            }
            for (auto& [d, vc] : mine) {
                const double total = std::accumulate(vc.first.begin(), vc.first.end(), 0.0);
                auto& day = day_of(d);
                if (total <= 0) continue;
                for (std::size_t b = 0; b < nb; ++b) {
                    day.sum[b] += vc.second[b] * vc.first[b] / total;
                    day.weight[b] += vc.second[b];
                }
            }
        } else if (kind == SeasonKind::AbsReturn) {
            std::optional<std::pair<std::int64_t, double>> prev;
            for (const auto& r : l1) {
                if (r.type != EventType::Trade || !r.trade) continue;
                const auto s = slot(r.ts);
                if (!s) continue;
                const double p = r.trade->zac();
                if (prev && prev->first == s->first && prev->second > 0 && p > 0) {
                    auto& day = day_of(s->first);
                    day.sum[s->second] += std::abs(std::log(p) - std::log(prev->second));
                    day.weight[s->second] = 1;
                } else {
                    day_of(s->first);
                }
                prev = std::pair{s->first, p};
            }
        } else {
            for (const auto& q : taq::derive_quotes(l1)) {
                const auto s = slot(q.ts);
                if (!s) continue;
                auto& day = day_of(s->first);
                if (!q.bid || !q.ask) continue;
                day.sum[s->second] += std::abs(*q.ask - *q.bid);
                day.weight[s->second] += 1;
            }
        }
    }

    out.values.assign(nb, 0);
    for (auto& [d, day] : acc) {
        std::vector<double> v(nb, 0);
        for (std::size_t b = 0; b < nb; ++b) {
            if (kind == SeasonKind::AbsReturn) v[b] = day.sum[b];
            else if (day.weight[b] > 0) v[b] = day.sum[b] / day.weight[b];
        }
        const double total = std::accumulate(v.begin(), v.end(), 0.0);
        if (!(total > 0)) {
            ++out.days_skipped;
            continue;
        }
        for (double& x : v) x /= total;
        out.days.push_back(d);
        out.daily.push_back(std::move(v));
    }
    if (!out.daily.empty()) {
        for (const auto& v : out.daily)
            for (std::size_t b = 0; b < nb; ++b) out.values[b] += v[b];
        for (double& x : out.values) x /= static_cast<double>(out.daily.size());
    }
    return out;
}

std::string seasonality_csv(std::span<const SeasonalityCurve> curves, const taq::Session& session) {
    std::string out = "Bucket,Start";
    for (const auto& c : curves) out += fmt::format(",{}", to_string(c.kind));
    out += '\n';
    if (curves.empty()) return out;
    const int w = curves.front().bucket_minutes;
    for (std::size_t b = 0; b < curves.front().values.size(); ++b) {
        const auto start = session.open / kNanosPerMinute + static_cast<Nanos>(b) * w;
        out += fmt::format("{},{:02}:{:02}", b, start / 60, start % 60);
        for (const auto& c : curves) out += fmt::format(",{}", b < c.values.size() ? c.values[b] : 0.0);
        out += '\n';
    }
    return out;
}

}  // namespace mx::facts
