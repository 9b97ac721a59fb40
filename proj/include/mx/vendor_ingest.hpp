#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mx/l1.hpp"
#include "mx/taq_core.hpp"
#include "mx/time.hpp"

namespace mx::vendor {

enum class RowType { Bid, Ask, Trade };

struct VendorRow {
    Nanos ts = 0;  // UTC ns
    RowType type = RowType::Bid;
    Price value;
    Quantity size = 0;
    std::string condcode;  // empty for quotes
};

enum class PriceUnit { Zac, Rand };

struct IngestOptions {
    taq::Session session;
    std::vector<std::string> keep_codes{"AT"};
    PriceUnit unit = PriceUnit::Zac;
    Nanos file_utc_offset = kLocalOffset;  // offset of the file's wall clock from UTC
    bool strict = false;
    taq::MicroWeighting weighting = taq::MicroWeighting::SideVolume;
};

struct IngestStats {
    std::size_t rows = 0;
    std::size_t kept = 0;
    std::size_t outside_session = 0;
    std::size_t dropped_condcode = 0;
    std::size_t anomalies = 0;
    std::vector<std::string> anomaly_samples;
};

struct IngestResult {
    std::vector<L1Record> l1;
    IngestStats stats;
};

class RowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

extern const std::string_view kVendorHeader;

/// Parses `times,type,value,size,condcode`. A condcode of "-" counts as empty.
VendorRow parse_row(std::string_view line, const IngestOptions& opts = {});

/// Filters to the continuous session and the kept trade codes, then enriches.
IngestResult ingest_vendor(std::span<const VendorRow> rows, const IngestOptions& opts = {});
IngestResult ingest_vendor_csv(std::istream& is, const IngestOptions& opts = {});
IngestResult ingest_vendor_file(const std::string& path, const IngestOptions& opts = {});

struct SequencingReport {
    std::size_t trades = 0;
    std::size_t followed = 0;
    std::optional<double> fraction;  // absent without trades
};

/// Share of trades whose next row is a quote update on the side the trade hit.
/// The hit side comes from the sign when known, otherwise from which pre-trade best
/// equals the trade price; when neither applies any quote row counts.
SequencingReport verify_trade_quote_sequencing(std::span<const L1Record> records);

}  // namespace mx::vendor
