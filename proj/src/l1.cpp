#include "mx/l1.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "mx/time.hpp"

namespace mx {
namespace {

std::vector<std::string_view> split_csv(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

bool is_nan(std::string_view s) { return s.empty() || s == "NaN" || s == "nan" || s == "-"; }

std::optional<double> opt_double(std::string_view s) {
    if (is_nan(s)) return std::nullopt;
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw std::invalid_argument(fmt::format("not a number: '{}'", s));
    return v;
}

std::optional<Quantity> opt_qty(std::string_view s) {
    auto v = opt_double(s);
    if (!v) return std::nullopt;
    const double r = std::round(*v);
    if (std::abs(r - *v) > 1e-9) throw std::invalid_argument(fmt::format("non-integral volume '{}'", s));
    return static_cast<Quantity>(r);
}

std::optional<Price> opt_price(std::string_view s) {
    if (is_nan(s)) return std::nullopt;
    return parse_price_decimal(s);
}

std::string price_cell(const std::optional<Price>& p) { return p ? format_price_zac(*p) : "NaN"; }

std::string qty_cell(const std::optional<Quantity>& q) { return q ? fmt::format("{}", *q) : "NaN"; }

}  // namespace

std::string_view to_string(EventType t) {
    switch (t) {
        case EventType::Bid: return "BID";
        case EventType::Ask: return "ASK";
        case EventType::Trade: return "TRADE";
    }
    return "?";
}

const std::string_view kL1Header =
    "TimeStamp,EventType,Bid,BidVol,Ask,AskVol,Trade,TradeVol,TradeSign,MicroPrice,MidPrice,InterArrivals";

std::string format_price_zac(Price p) {
    const bool neg = p.raw < 0;
    const auto mag = static_cast<std::uint64_t>(neg ? -p.raw : p.raw);
    std::string out = fmt::format("{}{}", neg ? "-" : "", mag / Price::kScale);
    auto frac = mag % Price::kScale;
    if (frac != 0) {
        std::string digits = fmt::format("{:05}", frac);
        while (digits.back() == '0') digits.pop_back();
        out += '.';
        out += digits;
    }
    return out;
}

Price parse_price_decimal(std::string_view s, std::int64_t scale) {
    if (s.empty()) throw std::invalid_argument("empty price");
    bool neg = false;
    if (s.front() == '-' || s.front() == '+') {
        neg = s.front() == '-';
        s.remove_prefix(1);
    }
    const auto dot = s.find('.');
    const std::string_view int_part = s.substr(0, dot);
    std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    std::int64_t whole = 0;
    if (!int_part.empty()) {
        auto [p, ec] = std::from_chars(int_part.data(), int_part.data() + int_part.size(), whole);
        if (ec != std::errc{} || p != int_part.data() + int_part.size())
            throw std::invalid_argument(fmt::format("bad price '{}'", s));
    } else if (frac_part.empty()) {
        throw std::invalid_argument(fmt::format("bad price '{}'", s));
    }
    // Fractional digits in units of 10^-5 of the (pre-scale) amount; keep extra
    // precision so that Rand inputs (scale 100) stay exact.
    constexpr int kDigits = 7;
    std::int64_t frac = 0;
    int n = 0;
    for (char c : frac_part) {
        if (c < '0' || c > '9') throw std::invalid_argument(fmt::format("bad price '{}'", s));
        if (n < kDigits) {
            frac = frac * 10 + (c - '0');
            ++n;
        } else if (c != '0') {
            throw std::invalid_argument(fmt::format("price '{}' has too many decimals", s));
        }
    }
    for (; n < kDigits; ++n) frac *= 10;
    // value * 10^7 * scale, then divide by 100 to land on ZAC * 10^5.
    const std::int64_t scaled = (whole * 10'000'000 + frac) * scale;
    if (scaled % 100 != 0) throw std::invalid_argument(fmt::format("price '{}' below fixed-point resolution", s));
    const std::int64_t raw = scaled / 100;
    return Price{neg ? -raw : raw};
}

std::string format_number(std::optional<double> v) {
    if (!v || std::isnan(*v)) return "NaN";
    return fmt::format("{}", *v);
}

std::string l1_csv_row(const L1Record& r) {
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}", to_local_time(r.ts).iso(), to_string(r.type),
                       price_cell(r.bid), qty_cell(r.bid_vol), price_cell(r.ask), qty_cell(r.ask_vol),
                       price_cell(r.trade), qty_cell(r.trade_vol),
                       r.sign ? fmt::format("{}", as_int(*r.sign)) : std::string("NaN"), format_number(r.micro),
                       format_number(r.mid), format_number(r.interarrival));
}

L1Record parse_l1_row(std::string_view row) {
    while (!row.empty() && (row.back() == '\r' || row.back() == '\n')) row.remove_suffix(1);
    const auto f = split_csv(row);
    if (f.size() != 12) throw std::invalid_argument(fmt::format("L1 row: expected 12 columns, got {}", f.size()));
    L1Record r;
    r.ts = parse_iso(f[0]) - kLocalOffset;
    if (f[1] == "BID") r.type = EventType::Bid;
    else if (f[1] == "ASK") r.type = EventType::Ask;
    else if (f[1] == "TRADE") r.type = EventType::Trade;
    else throw std::invalid_argument(fmt::format("L1 row: bad event type '{}'", f[1]));
    r.bid = opt_price(f[2]);
    r.bid_vol = opt_qty(f[3]);
    r.ask = opt_price(f[4]);
    r.ask_vol = opt_qty(f[5]);
    r.trade = opt_price(f[6]);
    r.trade_vol = opt_qty(f[7]);
    if (f[8] == "1" || f[8] == "+1") r.sign = TradeSign::Buyer;
    else if (f[8] == "-1") r.sign = TradeSign::Seller;
    else if (!is_nan(f[8])) throw std::invalid_argument(fmt::format("L1 row: bad trade sign '{}'", f[8]));
    r.micro = opt_double(f[9]);
    r.mid = opt_double(f[10]);
    r.interarrival = opt_double(f[11]);
    return r;
}

void write_l1_csv(std::ostream& os, const std::vector<L1Record>& records) {
    os << kL1Header << '\n';
    for (const auto& r : records) os << l1_csv_row(r) << '\n';
}

std::string l1_csv(const std::vector<L1Record>& records) {
    std::ostringstream os;
    write_l1_csv(os, records);
    return os.str();
}

std::vector<L1Record> read_l1_csv(std::istream& is) {
    std::vector<L1Record> out;
    std::string line;
    std::size_t n = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++n;
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            std::string_view h = line;
            if (!h.empty() && h.back() == '\r') h.remove_suffix(1);
            if (h != kL1Header) throw std::runtime_error(fmt::format("line {}: unexpected L1 header", n));
            header = true;
            continue;
        }
        try {
            out.push_back(parse_l1_row(line));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(fmt::format("line {}: {}", n, e.what()));
        }
    }
    if (!header) throw std::runtime_error("L1 input has no header");
    return out;
}

std::vector<L1Record> read_l1_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
    return read_l1_csv(in);
}

}  // namespace mx
