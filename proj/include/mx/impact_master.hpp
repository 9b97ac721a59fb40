#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mx/taq_core.hpp"

namespace mx::impact {

/// Log-spaced bins over [lo, hi]; each bin is half-open except the last.
struct Bins {
    double lo = 1e-3;
    double hi = 1e1;
    std::size_t n = 20;
    std::vector<double> edges;

    static Bins log_spaced(double lo, double hi, std::size_t n);
    std::optional<std::size_t> index(double x) const;
    double center(std::size_t k) const { return std::sqrt(edges[k] * edges[k + 1]); }
};

inline Bins impact_bins() { return Bins::log_spaced(1e-3, 1e1, 20); }
inline Bins calibration_bins() { return Bins::log_spaced(1e-1, 1e1, 20); }

struct NormalizedTrade {
    double omega = 0;
    double dp = 0;  // signed log mid change
    TradeSign side = TradeSign::Buyer;
    std::int64_t day = 0;
};

/// omega_ij = v_ij / sum_k v_kj * (sum_j T_j / N); T_j trades on day j, N days.
/// Throws std::invalid_argument on a day with zero total volume.
std::vector<double> normalize_volumes(std::span<const std::int64_t> days, std::span<const double> volumes);

/// Normalizes over every trade, then keeps those that have an impact and a sign.
/// `signs`, when non-empty, replaces the recorded signs (inferred sides).
std::vector<NormalizedTrade> normalized_trades(std::span<const taq::TradeObservation> trades,
                                               std::span<const std::optional<TradeSign>> signs = {});

/// Average over days of sum(price * volume), in Rand.
double average_daily_value(std::span<const taq::TradeObservation> trades);

struct BinStat {
    std::size_t count = 0;
    double omega = 0;  // mean
    double dp = 0;     // mean; magnitudes for seller-initiated curves
    bool empty() const { return count == 0; }
};

struct SideCurve {
    TradeSign side = TradeSign::Buyer;
    std::vector<BinStat> bins;
};

SideCurve impact_curve(std::span<const NormalizedTrade> trades, TradeSign side, const Bins& bins);

struct Interval {
    double lo = 0;
    double hi = 0;
    bool operator==(const Interval&) const = default;
};

struct BootstrapOptions {
    std::size_t n_boot = 1000;
    double level = 0.95;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

/// Percentile envelope of the per-bin mean impact over resamples of the side's
/// trades. Replicate r draws from its own generator seeded by (seed, r).
std::vector<std::optional<Interval>> bootstrap_envelope(std::span<const NormalizedTrade> trades, TradeSign side,
                                                        const Bins& bins, const BootstrapOptions& opts = {});

struct CurvePoint {
    double omega = 0;
    double dp = 0;
};

struct SecurityCurve {
    std::string name;
    double C = 0;
    std::vector<CurvePoint> points;  // non-empty bins of the security's curve
};

SecurityCurve security_curve(std::string name, double C, const SideCurve& curve);

/// Average over calibration bins of (sigma_x/mu_x)^2 + (sigma_y/mu_y)^2 where x = w/C^delta
/// and y = dp*C^gamma. Points are binned by their unscaled w; a bin needs two points.
/// Returns NaN if no bin qualifies.
double master_objective(std::span<const SecurityCurve> curves, double delta, double gamma, const Bins& bins,
                        std::size_t* bins_used = nullptr);

struct GridPoint {
    double delta = 0;
    double gamma = 0;
    double epsilon = 0;
};

struct CalibrationOptions {
    double grid_lo = -2;
    double grid_hi = 2;
    double grid_step = 0.05;
    bool keep_grid = false;
};

struct MasterFit {
    bool degenerate = false;
    std::string reason;
    std::optional<double> delta;
    std::optional<double> gamma;
    std::optional<double> epsilon;
    double grid_best_epsilon = 0;
    std::size_t bins_used = 0;
    std::vector<std::pair<std::string, double>> C;
    std::vector<GridPoint> grid;
};

/// Coarse grid then Nelder-Mead from the best grid point. Equal C (or fewer than two
/// securities) is reported as degenerate without a fit.
MasterFit calibrate_master(std::span<const SecurityCurve> curves, const Bins& bins = calibration_bins(),
                           const CalibrationOptions& opts = {});

std::string master_json(const MasterFit& fit, std::string_view side);

struct LiquidityFit {
    double alpha = 0;
    double lambda = 0;
    std::size_t bins_used = 0;
    std::size_t bins_excluded = 0;  // non-positive impact in range
};

/// Least squares of log dp* on log w* over bins with w* in [lo, hi]:
/// slope alpha, intercept -log lambda. Needs three usable bins.
LiquidityFit fit_liquidity_exponent(const SideCurve& curve, double lo = 1e-1, double hi = 1e1);

struct SecurityTrades {
    std::string name;
    double C = 0;
    std::vector<NormalizedTrade> trades;
};

struct MasterPoint {
    std::size_t bin = 0;
    double x = 0;  // mean rescaled volume across securities
    double y = 0;  // mean rescaled impact across securities
    std::size_t securities = 0;
    std::optional<Interval> envelope;  // of y
};

/// Rescaled curves averaged across securities per bin, with an envelope from
/// bootstrapping each security's trades.
std::vector<MasterPoint> master_curve(std::span<const SecurityTrades> securities, TradeSign side, double delta,
                                      double gamma, const Bins& bins, const BootstrapOptions& opts = {});

std::string curve_csv(const SideCurve& curve, const Bins& bins,
                      std::span<const std::optional<Interval>> envelope = {});
std::string master_curve_csv(std::span<const MasterPoint> points, const Bins& bins);

}  // namespace mx::impact
