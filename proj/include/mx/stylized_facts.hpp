#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mx/l1.hpp"
#include "mx/taq_core.hpp"

namespace mx::facts {

class DegenerateSeries : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct AcfResult {
    std::vector<double> rho;  // rho[l-1] is lag l
    double band = 0;          // half-width of the white-noise band
    std::size_t n = 0;
    std::size_t max_lag() const { return rho.size(); }
};

/// Biased sample autocorrelation at lags 1..max_lag, band +-1.96/sqrt(n).
AcfResult acf(std::span<const double> x, std::size_t max_lag);
AcfResult orderflow_acf(std::span<const int> signs, std::size_t max_lag);
std::string acf_csv(const AcfResult& a);  // Lag,Log10Lag,ACF,Band

struct NormalFit {
    double mean = 0;
    double variance = 0;  // 1/n
};
NormalFit fit_normal(std::span<const double> x);

enum class Tail { Upper, Lower };

struct PowerLawFit {
    Tail tail = Tail::Upper;
    double x_min = 0;  // in the orientation of the tail (negated for Lower)
    double alpha = 0;
    std::size_t n_tail = 0;
};

/// alpha = 1 + n / sum ln(x/x_min) over the given tail values, all >= x_min > 0.
PowerLawFit fit_powerlaw_tail(std::span<const double> tail, double x_min);

/// Upper tail: x_min is the `percentile` quantile of x and the tail is x >= x_min.
/// Lower tail: the upper-tail fit of -x at 100 - percentile.
PowerLawFit fit_powerlaw(std::span<const double> x, double percentile, Tail tail);

/// Linear interpolation between order statistics (type 7), p in [0, 100].
double percentile(std::span<const double> x, double p);

struct CcdfPoint {
    double x = 0;
    double empirical = 0;  // fraction of the tail >= x
    double fitted = 0;     // (x/x_min)^(1-alpha)
};
std::vector<CcdfPoint> ccdf(std::span<const double> x, const PowerLawFit& fit);

struct QqPoint {
    double theoretical = 0;
    double empirical = 0;
};
std::vector<QqPoint> qq_normal(std::span<const double> sample, const NormalFit& ref);
std::vector<QqPoint> qq_powerlaw(std::span<const double> sample, const PowerLawFit& ref);

/// Values of x oriented for the tail (negated for Lower) that lie at or beyond x_min.
std::vector<double> tail_values(std::span<const double> x, const PowerLawFit& fit);

enum class SeasonKind { Volume, AbsReturn, Spread };
std::string_view to_string(SeasonKind k);

struct SeasonalityCurve {
    SeasonKind kind = SeasonKind::Volume;
    int bucket_minutes = 10;
    std::vector<double> values;               // cross-day average per bucket
    std::vector<std::int64_t> days;           // local days that were used
    std::vector<std::vector<double>> daily;   // per-day normalized buckets
    std::size_t days_skipped = 0;
};

/// Each element of `streams` is one security's L1 stream (any number of days).
SeasonalityCurve seasonality(std::span<const std::vector<L1Record>> streams, SeasonKind kind,
                             const taq::Session& session = {}, int bucket_minutes = 10);
std::string seasonality_csv(std::span<const SeasonalityCurve> curves, const taq::Session& session = {});

}  // namespace mx::facts
