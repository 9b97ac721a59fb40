#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mx/types.hpp"

namespace mx::feed {

enum class MessageKind : std::uint8_t {
    OrderAdd,
    OrderCancel,
    OrderModify,
    Trade,
    TradeBust,
    TickTable,
    SecurityDefinition,
    SecurityStatus,
    Unknown,
};

std::string_view to_string(MessageKind k);

/// Header/payload pair exactly as read from the feed file.
struct RawRecord {
    Nanos recv_ns = 0;
    std::string human_ts;
    std::int64_t feed_id = 0;
    std::int64_t lead_int = 0;  // prefix of the payload line, meaning unknown; kept verbatim
    std::string payload;
    std::size_t line = 0;       // 1-based line number of the header

    bool operator==(const RawRecord&) const = default;
};

/// Decoded feed event. Field presence follows the per-kind matrix:
///
///   kind         order_ref trade_ref price quantity side
///   OrderAdd         x                  x      x      x
///   OrderCancel      x
///   OrderModify      x                  x      x
///   Trade            x         x        x      x
///   TradeBust                  x        x      x
///
/// Admin kinds (tick table, security definition/status) and unknown kinds keep
/// their body fields in `attributes`.
struct MarketMessage {
    MessageKind kind = MessageKind::Unknown;
    int msg_type = 0;
    std::int64_t seq_no = 0;
    std::int64_t length = 0;  // MdHeader.length, retained unvalidated
    std::string name;         // e.g. "MdOrderAdd"
    std::optional<SecurityId> security_id;
    std::optional<OrderRef> order_ref;
    std::optional<std::int64_t> trade_ref;
    std::optional<Price> price;
    std::optional<Quantity> quantity;
    std::optional<Side> side;
    Nanos event_ns = 0;
    std::vector<std::pair<std::string, std::string>> attributes;

    bool is_book_event() const {
        return kind == MessageKind::OrderAdd || kind == MessageKind::OrderCancel ||
               kind == MessageKind::OrderModify;
    }
    bool is_admin() const {
        return kind == MessageKind::TickTable || kind == MessageKind::SecurityDefinition ||
               kind == MessageKind::SecurityStatus;
    }

    bool operator==(const MarketMessage&) const = default;
};

/// Malformed record pair. `line` is the 1-based line of the pair's header.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

enum class ParseMode { Strict, Lenient };

struct ParseStats {
    std::size_t pairs = 0;
    std::size_t parsed = 0;
    std::size_t heartbeats = 0;
    std::size_t unknown = 0;
    std::size_t errors = 0;
    std::vector<std::string> error_samples;  // first few messages, lenient mode

    bool balanced() const { return parsed + heartbeats + unknown + errors == pairs; }
};

struct ParsedRecord {
    RawRecord raw;
    MarketMessage msg;
};

/// Result of decoding one pair.
enum class Decoded { Message, Heartbeat, Unknown };

/// Decodes the header line. Throws ParseError.
RawRecord parse_header(std::string_view header, std::size_t line);

/// Decodes a payload line into `msg`, filling `lead_int`. Throws ParseError.
Decoded parse_payload(std::string_view payload, std::size_t line, std::int64_t& lead_int,
                      MarketMessage& msg);

/// Incremental line-oriented parser; call feed() for each physical line, then finish().
/// Unknown kinds (msgType 10-15, unrecognised names) are delivered with kind=Unknown so
/// callers may log them; they are not counted as parsed.
class StreamParser {
public:
    using Sink = std::function<void(ParsedRecord&&)>;

    StreamParser(ParseMode mode, Sink sink);

    void feed(std::string_view line);
    void finish();

    const ParseStats& stats() const { return stats_; }

private:
    void handle_pair(std::string_view payload);
    void record_error(const ParseError& e);

    ParseMode mode_;
    Sink sink_;
    ParseStats stats_;
    std::size_t line_no_ = 0;
    std::size_t header_line_ = 0;
    std::string header_;
    bool have_header_ = false;
};

struct ParseOutput {
    std::vector<ParsedRecord> records;  // excludes heartbeats; includes Unknown kinds
    ParseStats stats;
};

ParseOutput parse_stream(std::istream& in, ParseMode mode);
ParseOutput parse_lines(const std::vector<std::string>& lines, ParseMode mode);

/// Reads a plain or gzip-compressed file line by line. Throws std::runtime_error
/// if the file cannot be opened.
void for_each_line(const std::string& path, const std::function<void(std::string_view)>& fn);

ParseOutput parse_file(const std::string& path, ParseMode mode);

// --- encoding -------------------------------------------------------------

/// Header line "<recv_ns> (<UTC iso, microseconds>) <feed_id>".
std::string encode_header(Nanos recv_ns, std::int64_t feed_id);

/// Payload line "<lead_int> <Name>:{MdHeader:{...},<Body>:{...}}".
std::string encode_payload(const MarketMessage& msg, std::int64_t lead_int);

/// Canonical message name for a kind ("MdOrderAdd", ...).
std::string_view canonical_name(MessageKind k);

/// msgType of a kind (2..9); Unknown has none.
int canonical_msg_type(MessageKind k);

/// Conventional MdHeader.length for a kind.
std::int64_t canonical_length(MessageKind k);

MarketMessage make_heartbeat(std::int64_t seq_no);

// --- message table --------------------------------------------------------

/// Header of the one-message-per-line tabular dump.
extern const std::string_view kMessageTableHeader;

std::string table_row(const RawRecord& raw, const MarketMessage& msg);

/// Parses one row of the message table back into a record (payload is re-encoded).
ParsedRecord parse_table_row(std::string_view row, std::size_t line);

// --- partitioning ---------------------------------------------------------

struct Partition {
    std::map<SecurityId, std::vector<MarketMessage>> by_security;
    std::vector<MarketMessage> admin;  // msgType 7-9, all securities
};

/// Splits a feed-ordered stream per security. Unknown kinds are dropped (they are
/// already counted by the parser).
Partition partition_by_security(const std::vector<MarketMessage>& messages);
Partition partition_by_security(const std::vector<ParsedRecord>& records);

}  // namespace mx::feed
