#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mx/impact_master.hpp"
#include "mx/taq_core.hpp"

namespace mx::cost {

/// Rates in basis points (1 bps = 1e-4 of value), ceilings in Rand per trade, VAT excluded.
struct FeeSchedule {
    std::string exchange;
    double transaction_bps = 0;
    double transaction_ceiling_rand = 0;
    double settlement_bps = 0;
    double settlement_ceiling_rand = 0;
    std::optional<double> passive_transaction_bps;
};

FeeSchedule a2x_schedule();
FeeSchedule jse_schedule();

/// Reads `[{exchange, transaction_bps, ...}, ...]` or `{"schedules": [...]}`.
std::vector<FeeSchedule> parse_fee_config(const std::string& json_text);
std::vector<FeeSchedule> load_fee_config(const std::string& path);
const FeeSchedule& find_schedule(std::span<const FeeSchedule> schedules, std::string_view exchange);

enum class FeeRole { Aggressor, Passive };

/// f(x) = min(x*bps_t, ceil_t) + min(x*bps_s, ceil_s) for a transaction value x in Rand.
double fee(double value_rand, const FeeSchedule& s, FeeRole role = FeeRole::Aggressor);
/// f(value)/volume, Rand per share.
double direct_cost(double value_rand, double volume, const FeeSchedule& s, FeeRole role = FeeRole::Aggressor);

struct Slippage {
    double rand = 0;
    bool crossed = false;
};
/// Half the quoted spread in Rand; a crossed quote uses |a-b|/2 and is flagged.
Slippage slippage(Price bid, Price ask);

struct CostBreakdown {
    TradeSign side = TradeSign::Buyer;
    double omega = 0;
    double mid = 0;  // Rand, pre-trade
    double slippage = 0;
    double impact = 0;
    double direct = 0;
    double total = 0;
    double ds = 0;
    double ddc = 0;
    double dp = 0;
    double dc = 0;
    bool crossed = false;
};

/// log(m + X) - log m for buyer-initiated, log(m - X) - log m for seller-initiated.
std::optional<double> relative(double mid, double x, TradeSign side);

struct CostStats {
    std::size_t trades = 0;
    std::size_t kept = 0;
    std::size_t no_side = 0;
    std::size_t broken_book = 0;    // no two-sided quote before, or none after
    std::size_t undefined_log = 0;  // seller-initiated cost at or above the mid
    std::size_t crossed = 0;
};

std::optional<CostBreakdown> cost_components(const taq::TradeObservation& t, TradeSign side, double omega,
                                             const FeeSchedule& s, FeeRole role = FeeRole::Aggressor,
                                             CostStats* stats = nullptr);

/// Costs for every trade of a security; `signs` overrides the recorded signs when non-empty.
std::vector<CostBreakdown> security_costs(std::span<const taq::TradeObservation> trades,
                                          std::span<const std::optional<TradeSign>> signs, const FeeSchedule& s,
                                          FeeRole role, CostStats& stats);

struct ComponentMeans {
    std::size_t count = 0;
    double omega = 0;
    double ds = 0;
    double ddc = 0;
    double dp = 0;
    double dc = 0;
    bool empty() const { return count == 0; }
};

struct CostCurve {
    TradeSign side = TradeSign::Buyer;
    std::vector<ComponentMeans> bins;
};

CostCurve cost_curve(std::span<const CostBreakdown> costs, TradeSign side,
                     const impact::Bins& bins = impact::calibration_bins());
std::string cost_curve_csv(std::span<const CostCurve> curves, const impact::Bins& bins);

enum class Component { Dp, Ds, Ddc, Dc, Omega };
inline constexpr std::array<Component, 5> kComponents{Component::Dp, Component::Ds, Component::Ddc, Component::Dc,
                                                      Component::Omega};
std::string_view to_string(Component c);
/// 1e3 for the log cost forms, 1e1 for omega.
double table_scale(Component c);

struct ExchangeCosts {
    std::string exchange;
    std::vector<std::vector<CostBreakdown>> securities;
};

struct VariabilityTable {
    std::vector<std::string> exchanges;
    std::size_t n_bins = 0;
    // cells[((bin * 5 + component) * n_exchanges + exchange) * 2 + side], side 0 = BI, 1 = SI; scaled
    std::vector<std::optional<double>> cells;
    std::size_t excluded = 0;  // (security, bin, side) groups with fewer than two trades

    std::optional<double> at(std::size_t bin, Component c, std::size_t exchange, TradeSign side) const;
};

/// Population standard deviation per security, bin and side, averaged over each exchange's securities.
VariabilityTable variability_table(std::span<const ExchangeCosts> exchanges,
                                   const impact::Bins& bins = impact::calibration_bins());
std::string variability_csv(const VariabilityTable& t);

}  // namespace mx::cost
