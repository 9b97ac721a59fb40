#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mx/l1.hpp"

namespace mx::taq {

/// Microprice weighting. `SideVolume` weights each price by its own side's volume,
/// S = va/(va+vb)*a + vb/(va+vb)*b; `Imbalance` is the conventional swap.
enum class MicroWeighting { SideVolume, Imbalance };

double microprice(double bid, double bid_vol, double ask, double ask_vol, MicroWeighting w = MicroWeighting::SideVolume);

/// Top-of-book state after one quote event (prices in ZAC).
struct QuotePoint {
    Nanos ts = 0;
    std::optional<double> bid;
    std::optional<double> ask;
    std::optional<Quantity> bid_vol;
    std::optional<Quantity> ask_vol;
    std::optional<double> mid;
    std::optional<double> micro;
};

using QuoteSeries = std::vector<QuotePoint>;

/// One point per BID/ASK row. The opposite side is the latest prior value of that
/// side within the same local day, absent if it was absent.
QuoteSeries derive_quotes(std::span<const L1Record> l1, MicroWeighting w = MicroWeighting::SideVolume);

/// Copy of `l1` with MicroPrice/MidPrice on every row (trade rows see the pre-trade
/// book) and InterArrivals on trade rows.
std::vector<L1Record> enrich(std::span<const L1Record> l1, MicroWeighting w = MicroWeighting::SideVolume);

struct ReturnPoint {
    Nanos ts = 0;  // time of the later price
    double r = 0;
};

using ReturnSeries = std::vector<ReturnPoint>;

/// Log-differences of consecutive defined microprices within a day; a pair with
/// either endpoint undefined is dropped, never bridged.
ReturnSeries tick_returns(std::span<const QuotePoint> series);

/// Same over a plain price path (undefined entries break the chain).
ReturnSeries log_returns(std::span<const std::optional<double>> prices, std::span<const Nanos> ts = {});

struct Session {
    Nanos open = 9 * 60 * kNanosPerMinute;          // since local midnight
    Nanos close = (16 * 60 + 50) * kNanosPerMinute;

    bool contains(Nanos time_of_day) const { return time_of_day >= open && time_of_day < close; }
};

struct OhlcBar {
    std::int64_t day = 0;  // local calendar day
    Nanos start = 0;       // UTC ns of the bar start
    Nanos end = 0;
    std::optional<double> open;
    std::optional<double> high;
    std::optional<double> low;
    std::optional<double> close;

    bool empty() const { return !open.has_value(); }
    bool up() const { return !empty() && *close >= *open; }
};

/// Microprice bars aligned to the session open; the last bar truncates at the close.
/// Every slot is emitted for each day that has at least one quote point.
std::vector<OhlcBar> ohlc(std::span<const QuotePoint> series, int width_minutes, const Session& session = {});

/// Close-to-close log returns of consecutive non-empty bars within a day.
ReturnSeries bar_returns(std::span<const OhlcBar> bars);

/// Trade inter-arrival times in seconds, never across local days.
std::vector<double> interarrivals(std::span<const Nanos> trade_times);
std::vector<double> interarrivals(std::span<const L1Record> l1);

/// log(after) - log(before); absent if either mid is absent.
std::optional<double> impact_increment(std::optional<double> mid_before, std::optional<double> mid_after);

/// Everything downstream analytics need about one trade.
struct TradeObservation {
    std::size_t row = 0;
    Nanos ts = 0;
    std::int64_t day = 0;
    Price price;
    Quantity volume = 0;
    std::optional<TradeSign> sign;       // as recorded in the L1 stream
    std::optional<Price> bid_before;
    std::optional<Price> ask_before;
    std::optional<double> mid_before;    // ZAC
    std::optional<double> mid_after;     // ZAC
    std::optional<double> dp;            // absent when skipped
    bool broken_after = false;
};

struct TradeScan {
    std::vector<TradeObservation> trades;
    std::size_t skipped_broken = 0;   // post-trade book had an empty side
    std::size_t skipped_no_mid = 0;   // no pre-trade mid
};

/// Walks the L1 stream: the pre-trade state is the book in effect at the trade row;
/// the post-trade mid is taken after the first quote update that follows the trade
/// before any later trade on the same day (unchanged if there is none).
TradeScan scan_trades(std::span<const L1Record> l1);

}  // namespace mx::taq
