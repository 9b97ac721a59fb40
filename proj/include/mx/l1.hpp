#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mx/types.hpp"

namespace mx {

enum class EventType : std::uint8_t { Bid, Ask, Trade };

std::string_view to_string(EventType t);

/// One row of the top-of-book TAQ stream. Quote rows carry only the side that
/// changed; an absent price on that side means the side is empty.
struct L1Record {
    Nanos ts = 0;  // UTC ns
    EventType type = EventType::Bid;
    std::optional<Price> bid;
    std::optional<Quantity> bid_vol;
    std::optional<Price> ask;
    std::optional<Quantity> ask_vol;
    std::optional<Price> trade;
    std::optional<Quantity> trade_vol;
    std::optional<TradeSign> sign;
    std::optional<double> micro;  // ZAC
    std::optional<double> mid;    // ZAC
    std::optional<double> interarrival;  // seconds since previous trade, same day

    bool operator==(const L1Record&) const = default;
};

extern const std::string_view kL1Header;

/// Exact decimal rendering of a fixed-point price in ZAC ("25074", "279258.84").
std::string format_price_zac(Price p);

/// Parses a decimal ZAC amount exactly into fixed point; at most 5 fractional digits
/// are significant, further digits must be zero. `scale` multiplies the value first
/// (100 for Rand inputs). Throws std::invalid_argument.
Price parse_price_decimal(std::string_view text, std::int64_t scale = 1);

/// Shortest round-trip rendering, "NaN" when absent.
std::string format_number(std::optional<double> v);

std::string l1_csv_row(const L1Record& r);
L1Record parse_l1_row(std::string_view row);

void write_l1_csv(std::ostream& os, const std::vector<L1Record>& records);
std::string l1_csv(const std::vector<L1Record>& records);

/// Reads an L1 CSV (lines starting with '#' are skipped). Throws std::runtime_error.
std::vector<L1Record> read_l1_csv(std::istream& is);
std::vector<L1Record> read_l1_file(const std::string& path);

}  // namespace mx
