#include "mx/vendor_ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <algorithm>

#include <fmt/format.h>

#include "mx/feed_parser.hpp"
#include "mx/time.hpp"

namespace mx::vendor {

const std::string_view kVendorHeader = "times,type,value,size,condcode";

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

Quantity parse_size(std::string_view s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v) || v < 0)
        throw RowError(fmt::format("bad size '{}'", s));
    const double r = std::round(v);
    if (std::abs(r - v) > 1e-9) throw RowError(fmt::format("fractional size '{}'", s));
    return static_cast<Quantity>(r);
}

}  // namespace

VendorRow parse_row(std::string_view line, const IngestOptions& opts) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (cells.size() < 4 || cells.size() > 5) throw RowError(fmt::format("expected 5 columns: '{}'", line));
    VendorRow row;
    try {
        row.ts = parse_iso(cells[0]) - opts.file_utc_offset;
    } catch (const std::invalid_argument& e) {
        throw RowError(e.what());
    }
    if (cells[1] == "BID") row.type = RowType::Bid;
    else if (cells[1] == "ASK") row.type = RowType::Ask;
    else if (cells[1] == "TRADE") row.type = RowType::Trade;
    else throw RowError(fmt::format("bad type '{}'", cells[1]));
    try {
        row.value = parse_price_decimal(cells[2], opts.unit == PriceUnit::Rand ? 100 : 1);
    } catch (const std::invalid_argument& e) {
        throw RowError(e.what());
    }
    row.size = parse_size(cells[3]);
    if (cells.size() == 5 && cells[4] != "-") row.condcode = std::string(cells[4]);
    if (row.type == RowType::Trade && row.condcode.empty()) throw RowError("trade without condcode");
    if (row.type != RowType::Trade && !row.condcode.empty()) throw RowError("quote with condcode");
    return row;
}

IngestResult ingest_vendor(std::span<const VendorRow> rows, const IngestOptions& opts) {
    IngestResult out;
    std::vector<L1Record> raw;
    for (const auto& row : rows) {
        ++out.stats.rows;
        if (!opts.session.contains(to_local_time(row.ts).time_of_day())) {
            ++out.stats.outside_session;
            continue;
        }
        L1Record r;
        r.ts = row.ts;
        switch (row.type) {
        case RowType::Bid:
            r.type = EventType::Bid;
            if (row.size > 0) r.bid = row.value, r.bid_vol = row.size;
            break;
        case RowType::Ask:
            r.type = EventType::Ask;
            if (row.size > 0) r.ask = row.value, r.ask_vol = row.size;
            break;
        case RowType::Trade:
            if (std::find(opts.keep_codes.begin(), opts.keep_codes.end(), row.condcode) == opts.keep_codes.end()) {
                ++out.stats.dropped_condcode;
                continue;
            }
            r.type = EventType::Trade;
            r.trade = row.value;
            r.trade_vol = row.size;
            break;
        }
        raw.push_back(r);
    }
    out.stats.kept = raw.size();
    out.l1 = taq::enrich(raw, opts.weighting);
    return out;
}

IngestResult ingest_vendor_csv(std::istream& is, const IngestOptions& opts) {
    std::vector<VendorRow> rows;
    IngestStats bad;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (t.starts_with("times")) continue;
        try {
            rows.push_back(parse_row(t, opts));
        } catch (const RowError& e) {
            if (opts.strict) throw RowError(fmt::format("line {}: {}", lineno, e.what()));
            ++bad.anomalies;
            if (bad.anomaly_samples.size() < 10) bad.anomaly_samples.push_back(fmt::format("line {}: {}", lineno, e.what()));
        }
    }
    auto out = ingest_vendor(rows, opts);
    out.stats.rows += bad.anomalies;
    out.stats.anomalies = bad.anomalies;
    out.stats.anomaly_samples = std::move(bad.anomaly_samples);
    return out;
}

IngestResult ingest_vendor_file(const std::string& path, const IngestOptions& opts) {
    std::string text;
    feed::for_each_line(path, [&](std::string_view l) {
        text.append(l);
        text.push_back('\n');
    });
    std::istringstream is(text);
    return ingest_vendor_csv(is, opts);
}

SequencingReport verify_trade_quote_sequencing(std::span<const L1Record> records) {
    SequencingReport rep;
    std::optional<Price> bid;
    std::optional<Price> ask;
    std::optional<std::int64_t> day;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const auto d = local_day(r.ts);
        if (day && *day != d) bid.reset(), ask.reset();
        day = d;
        if (r.type == EventType::Bid) {
            bid = r.bid;
            continue;
        }
        if (r.type == EventType::Ask) {
            ask = r.ask;
            continue;
        }
        ++rep.trades;
        std::optional<EventType> hit;
        if (r.sign) hit = *r.sign == TradeSign::Buyer ? EventType::Ask : EventType::Bid;
        else if (ask && r.trade == ask) hit = EventType::Ask;
        else if (bid && r.trade == bid) hit = EventType::Bid;
        if (i + 1 < records.size()) {
            const auto& next = records[i + 1];
            const bool quote = next.type != EventType::Trade;
            if (quote && (!hit || next.type == *hit)) ++rep.followed;
        }
    }
    if (rep.trades > 0) rep.fraction = static_cast<double>(rep.followed) / static_cast<double>(rep.trades);
    return rep;
}

}  // namespace mx::vendor
