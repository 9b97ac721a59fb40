#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string_view>

namespace mx {

/// Nanoseconds since the Unix epoch (UTC).
using Nanos = std::int64_t;
using Quantity = std::int64_t;
using OrderRef = std::int64_t;
using SecurityId = std::int64_t;

inline constexpr Nanos kNanosPerSecond = 1'000'000'000;
inline constexpr Nanos kNanosPerMinute = 60 * kNanosPerSecond;
inline constexpr Nanos kNanosPerDay = 86'400 * kNanosPerSecond;

/// Fixed-point price in ZAC * 10^5, the feed's native unit.
struct Price {
    static constexpr std::int64_t kScale = 100'000;

    std::int64_t raw = 0;

    constexpr double zac() const { return static_cast<double>(raw) / kScale; }
    constexpr double rand() const { return zac() / 100.0; }

    static constexpr Price from_zac(std::int64_t zac) { return Price{zac * kScale}; }

    friend constexpr auto operator<=>(Price, Price) = default;
};

enum class Side : std::uint8_t { Buy, Sell };

constexpr std::string_view to_string(Side s) { return s == Side::Buy ? "BUY" : "SELL"; }

/// Trade initiator. +1 buyer-initiated, -1 seller-initiated.
enum class TradeSign : std::int8_t { Seller = -1, Buyer = 1 };

constexpr int as_int(TradeSign s) { return static_cast<int>(s); }

/// Which side a trade of the given sign consumes liquidity from.
constexpr Side hit_side(TradeSign s) { return s == TradeSign::Buyer ? Side::Sell : Side::Buy; }

}  // namespace mx
