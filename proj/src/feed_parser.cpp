#include "mx/feed_parser.hpp"

#include <charconv>
#include <istream>
#include <memory>

#include <fmt/format.h>
#include <zlib.h>

#include "mx/time.hpp"

namespace mx::feed {
namespace {

constexpr std::size_t kMaxErrorSamples = 16;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

template <typename T>
T to_int(std::string_view s, std::size_t line, std::string_view field) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        throw ParseError(line, fmt::format("field '{}': not an integer: '{}'", field, s));
    return v;
}

struct Member {
    std::string_view key;
    std::string_view value;  // nested objects keep their braces
    bool object = false;
};

// Parses "{k:v,...}" at the front of s and advances s past the closing brace.
std::vector<Member> parse_object(std::string_view& s, std::size_t line) {
    if (s.empty() || s.front() != '{') throw ParseError(line, "expected '{'");
    s.remove_prefix(1);
    std::vector<Member> out;
    if (!s.empty() && s.front() == '}') {
        s.remove_prefix(1);
        return out;
    }
    while (true) {
        const auto colon = s.find(':');
        if (colon == std::string_view::npos) throw ParseError(line, "missing ':' in object");
        Member m;
        m.key = trim(s.substr(0, colon));
        if (m.key.empty() || m.key.find_first_of("{},") != std::string_view::npos)
            throw ParseError(line, "malformed key");
        s.remove_prefix(colon + 1);
        if (!s.empty() && s.front() == '{') {
            int depth = 0;
            std::size_t i = 0;
            for (; i < s.size(); ++i) {
                if (s[i] == '{') ++depth;
                else if (s[i] == '}' && --depth == 0) break;
            }
            if (i == s.size()) throw ParseError(line, "unbalanced braces");
            m.value = s.substr(0, i + 1);
            m.object = true;
            s.remove_prefix(i + 1);
        } else {
            const auto end = s.find_first_of(",}");
            if (end == std::string_view::npos) throw ParseError(line, "unterminated object");
            m.value = trim(s.substr(0, end));
            if (m.value.find('{') != std::string_view::npos) throw ParseError(line, "stray '{'");
            s.remove_prefix(end);
        }
        out.push_back(m);
        if (s.empty()) throw ParseError(line, "unterminated object");
        if (s.front() == ',') {
            s.remove_prefix(1);
            continue;
        }
        if (s.front() == '}') {
            s.remove_prefix(1);
            return out;
        }
        throw ParseError(line, "expected ',' or '}'");
    }
}

std::vector<Member> parse_nested(std::string_view text, std::size_t line) {
    auto members = parse_object(text, line);
    if (!trim(text).empty()) throw ParseError(line, "trailing characters after object");
    return members;
}

struct KindInfo {
    std::string_view name;
    std::string_view body;
    int msg_type;
    MessageKind kind;
    std::int64_t length;
};

constexpr KindInfo kKinds[] = {
    {"MdOrderAdd", "OrderAdd", 2, MessageKind::OrderAdd, 33},
    {"MdOrderCancel", "OrderCancel", 3, MessageKind::OrderCancel, 20},
    {"MdOrderModify", "OrderModify", 4, MessageKind::OrderModify, 32},
    {"MdTrade", "Trade", 5, MessageKind::Trade, 40},
    {"MdTradeBust", "TradeBust", 6, MessageKind::TradeBust, 36},
    {"MdTickTable", "TickTable", 7, MessageKind::TickTable, 0},
    {"MdSecurityDefinition", "SecurityDefinition", 8, MessageKind::SecurityDefinition, 0},
    {"MdSecurityStatus", "SecurityStatus", 9, MessageKind::SecurityStatus, 0},
};

const KindInfo* by_name(std::string_view name) {
    for (const auto& k : kKinds)
        if (k.name == name) return &k;
    return nullptr;
}

const KindInfo& by_kind(MessageKind kind) {
    for (const auto& k : kKinds)
        if (k.kind == kind) return k;
    throw std::invalid_argument("no wire layout for kind Unknown");
}

enum Field : unsigned {
    kSecurity = 1u << 0,
    kOrder = 1u << 1,
    kTrade = 1u << 2,
    kPrice = 1u << 3,
    kQuantity = 1u << 4,
    kSide = 1u << 5,
    kTimestamp = 1u << 6,
};

unsigned required_fields(MessageKind k) {
    switch (k) {
        case MessageKind::OrderAdd: return kSecurity | kOrder | kPrice | kQuantity | kSide | kTimestamp;
        case MessageKind::OrderCancel: return kSecurity | kOrder | kTimestamp;
        case MessageKind::OrderModify: return kSecurity | kOrder | kPrice | kQuantity | kTimestamp;
        case MessageKind::Trade: return kSecurity | kOrder | kTrade | kPrice | kQuantity | kTimestamp;
        case MessageKind::TradeBust: return kSecurity | kTrade | kPrice | kQuantity | kTimestamp;
        default: return 0;
    }
}

void decode_body(const std::vector<Member>& body, std::size_t line, MarketMessage& msg) {
    const bool bag = msg.is_admin() || msg.kind == MessageKind::Unknown;
    unsigned seen = 0;
    for (const auto& m : body) {
        if (m.key == "securityId") {
            msg.security_id = to_int<SecurityId>(m.value, line, m.key);
            seen |= kSecurity;
        } else if (m.key == "timestamp") {
            msg.event_ns = to_int<Nanos>(m.value, line, m.key);
            if (msg.event_ns < 0) throw ParseError(line, "negative timestamp");
            seen |= kTimestamp;
        } else if (bag) {
            msg.attributes.emplace_back(std::string(m.key), std::string(m.value));
        } else if (m.key == "orderId") {
            msg.order_ref = to_int<OrderRef>(m.value, line, m.key);
            seen |= kOrder;
        } else if (m.key == "tradeId") {
            msg.trade_ref = to_int<std::int64_t>(m.value, line, m.key);
            seen |= kTrade;
        } else if (m.key == "limitPrice" || m.key == "price") {
            const auto raw = to_int<std::int64_t>(m.value, line, m.key);
            if (raw < 0) throw ParseError(line, "negative price");
            msg.price = Price{raw};
            seen |= kPrice;
        } else if (m.key == "quantity") {
            msg.quantity = to_int<Quantity>(m.value, line, m.key);
            if (*msg.quantity < 0) throw ParseError(line, "negative quantity");
            seen |= kQuantity;
        } else if (m.key == "side") {
            if (m.value == "BUY") msg.side = Side::Buy;
            else if (m.value == "SELL") msg.side = Side::Sell;
            else throw ParseError(line, fmt::format("bad side '{}'", m.value));
            seen |= kSide;
        }
        // other fields (e.g. tradeType) are not part of the model
    }
    const unsigned need = required_fields(msg.kind);
    if ((seen & need) != need)
        throw ParseError(line, fmt::format("{}: missing required field(s)", msg.name));
    // Drop fields the kind does not carry so equality is field-for-field.
    if (msg.kind == MessageKind::OrderCancel) {
        msg.price.reset();
        msg.quantity.reset();
        msg.side.reset();
        msg.trade_ref.reset();
    } else if (msg.kind == MessageKind::OrderModify) {
        msg.side.reset();
        msg.trade_ref.reset();
    } else if (msg.kind == MessageKind::Trade) {
        msg.side.reset();
    } else if (msg.kind == MessageKind::TradeBust) {
        msg.order_ref.reset();
        msg.side.reset();
    } else if (msg.kind == MessageKind::OrderAdd) {
        msg.trade_ref.reset();
    }
}


template <typename T>
std::string cell(const std::optional<T>& v) {
    return v ? fmt::format("{}", *v) : std::string{};
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

template <typename T>
std::optional<T> opt_int(std::string_view s, std::size_t line, std::string_view field) {
    if (s.empty()) return std::nullopt;
    return to_int<T>(s, line, field);
}

}  // namespace

std::string_view to_string(MessageKind k) {
    switch (k) {
        case MessageKind::OrderAdd: return "OrderAdd";
        case MessageKind::OrderCancel: return "OrderCancel";
        case MessageKind::OrderModify: return "OrderModify";
        case MessageKind::Trade: return "Trade";
        case MessageKind::TradeBust: return "TradeBust";
        case MessageKind::TickTable: return "TickTable";
        case MessageKind::SecurityDefinition: return "SecurityDefinition";
        case MessageKind::SecurityStatus: return "SecurityStatus";
        case MessageKind::Unknown: return "Unknown";
    }
    return "Unknown";
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("line {}: {}", line, what)), line_(line) {}

RawRecord parse_header(std::string_view header, std::size_t line) {
    header = trim(header);
    RawRecord r;
    r.line = line;
    const auto open = header.find(" (");
    const auto close = header.rfind(") ");
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        throw ParseError(line, "malformed header line");
    r.recv_ns = to_int<Nanos>(trim(header.substr(0, open)), line, "recv_ns");
    if (r.recv_ns < 0) throw ParseError(line, "negative receive time");
    r.human_ts = std::string(header.substr(open + 2, close - open - 2));
    r.feed_id = to_int<std::int64_t>(trim(header.substr(close + 2)), line, "feed_id");
    return r;
}

Decoded parse_payload(std::string_view payload, std::size_t line, std::int64_t& lead_int,
                      MarketMessage& msg) {
    payload = trim(payload);
    const auto space = payload.find(' ');
    if (space == std::string_view::npos) throw ParseError(line, "payload missing lead integer");
    lead_int = to_int<std::int64_t>(payload.substr(0, space), line, "lead_int");
    std::string_view rest = trim(payload.substr(space + 1));
    const auto colon = rest.find(":{");
    if (colon == std::string_view::npos) throw ParseError(line, "payload missing ':{'");
    msg = MarketMessage{};
    msg.name = std::string(rest.substr(0, colon));
    rest.remove_prefix(colon + 1);
    const auto top = parse_nested(rest, line);

    const Member* header = nullptr;
    const Member* body = nullptr;
    for (const auto& m : top) {
        if (!m.object) throw ParseError(line, fmt::format("scalar '{}' at top level", m.key));
        if (m.key == "MdHeader") header = &m;
        else if (body == nullptr) body = &m;
        else throw ParseError(line, "more than one message body");
    }
    if (header == nullptr) throw ParseError(line, "missing MdHeader");
    bool have_type = false;
    bool have_seq = false;
    for (const auto& m : parse_nested(header->value, line)) {
        if (m.key == "msgType") {
            msg.msg_type = to_int<int>(m.value, line, m.key);
            have_type = true;
        } else if (m.key == "length") {
            msg.length = to_int<std::int64_t>(m.value, line, m.key);
        } else if (m.key == "seqNo") {
            msg.seq_no = to_int<std::int64_t>(m.value, line, m.key);
            have_seq = true;
        }
    }
    if (!have_type || !have_seq) throw ParseError(line, "MdHeader missing msgType or seqNo");
    if (msg.msg_type < 1 || msg.msg_type > 15)
        throw ParseError(line, fmt::format("msgType {} outside 1..15", msg.msg_type));
    if (msg.msg_type == 1) return Decoded::Heartbeat;

    const KindInfo* info = by_name(msg.name);
    if (msg.msg_type >= 10 || info == nullptr) {
        msg.kind = MessageKind::Unknown;
        if (body != nullptr) {
            // Best effort; unknown bodies may not follow our grammar.
            try {
                decode_body(parse_nested(body->value, line), line, msg);
            } catch (const ParseError&) {
                msg.attributes.clear();
            }
        }
        return Decoded::Unknown;
    }
    if (info->msg_type != msg.msg_type)
        throw ParseError(line, fmt::format("{} carries msgType {}", msg.name, msg.msg_type));
    msg.kind = info->kind;
    if (body == nullptr) {
        if (required_fields(msg.kind) != 0) throw ParseError(line, "missing message body");
        return Decoded::Message;
    }
    decode_body(parse_nested(body->value, line), line, msg);
    return Decoded::Message;
}

StreamParser::StreamParser(ParseMode mode, Sink sink) : mode_(mode), sink_(std::move(sink)) {}

void StreamParser::feed(std::string_view line) {
    ++line_no_;
    if (trim(line).empty()) return;
    if (!have_header_) {
        header_.assign(line);
        header_line_ = line_no_;
        have_header_ = true;
        return;
    }
    have_header_ = false;
    handle_pair(line);
}

void StreamParser::finish() {
    if (have_header_) {
        have_header_ = false;
        ++stats_.pairs;
        record_error(ParseError(header_line_, "incomplete record: header without payload"));
    }
}

void StreamParser::record_error(const ParseError& e) {
    if (mode_ == ParseMode::Strict) throw e;
    ++stats_.errors;
    if (stats_.error_samples.size() < kMaxErrorSamples) stats_.error_samples.emplace_back(e.what());
}

void StreamParser::handle_pair(std::string_view payload) {
    ++stats_.pairs;
    ParsedRecord rec;
    try {
        rec.raw = parse_header(header_, header_line_);
        switch (parse_payload(payload, header_line_, rec.raw.lead_int, rec.msg)) {
            case Decoded::Heartbeat: ++stats_.heartbeats; return;
            case Decoded::Unknown: ++stats_.unknown; break;
            case Decoded::Message: ++stats_.parsed; break;
        }
    } catch (const ParseError& e) {
        record_error(e);
        return;
    }
    rec.raw.payload = std::string(trim(payload));
    sink_(std::move(rec));
}

ParseOutput parse_lines(const std::vector<std::string>& lines, ParseMode mode) {
    ParseOutput out;
    StreamParser p(mode, [&](ParsedRecord&& r) { out.records.push_back(std::move(r)); });
    for (const auto& l : lines) p.feed(l);
    p.finish();
    out.stats = p.stats();
    return out;
}

ParseOutput parse_stream(std::istream& in, ParseMode mode) {
    ParseOutput out;
    StreamParser p(mode, [&](ParsedRecord&& r) { out.records.push_back(std::move(r)); });
    std::string line;
    while (std::getline(in, line)) p.feed(line);
    p.finish();
    out.stats = p.stats();
    return out;
}

void for_each_line(const std::string& path, const std::function<void(std::string_view)>& fn) {
    std::unique_ptr<gzFile_s, decltype(&gzclose)> f(gzopen(path.c_str(), "rb"), &gzclose);
    if (!f) throw std::runtime_error(fmt::format("cannot open '{}'", path));
    gzbuffer(f.get(), 1 << 17);
    std::string line;
    char buf[1 << 16];
    while (gzgets(f.get(), buf, sizeof buf) != nullptr) {
        std::string_view chunk(buf);
        line.append(chunk);
        if (!line.empty() && line.back() == '\n') {
            line.pop_back();
            fn(line);
            line.clear();
        }
    }
    int err = 0;
    const char* msg = gzerror(f.get(), &err);
    if (err != Z_OK && err != Z_STREAM_END)
        throw std::runtime_error(fmt::format("read error in '{}': {}", path, msg));
    if (!line.empty()) fn(line);
}

ParseOutput parse_file(const std::string& path, ParseMode mode) {
    ParseOutput out;
    StreamParser p(mode, [&](ParsedRecord&& r) { out.records.push_back(std::move(r)); });
    for_each_line(path, [&](std::string_view l) { p.feed(l); });
    p.finish();
    out.stats = p.stats();
    return out;
}

std::string encode_header(Nanos recv_ns, std::int64_t feed_id) {
    return fmt::format("{} ({}) {}", recv_ns, format_iso(recv_ns, 6), feed_id);
}

std::string_view canonical_name(MessageKind k) { return by_kind(k).name; }
int canonical_msg_type(MessageKind k) { return by_kind(k).msg_type; }
std::int64_t canonical_length(MessageKind k) { return by_kind(k).length; }

MarketMessage make_heartbeat(std::int64_t seq_no) {
    MarketMessage m;
    m.kind = MessageKind::Unknown;
    m.msg_type = 1;
    m.seq_no = seq_no;
    m.name = "MdHeartbeat";
    return m;
}

std::string encode_payload(const MarketMessage& msg, std::int64_t lead_int) {
    const std::string_view name = msg.name.empty() ? canonical_name(msg.kind) : msg.name;
    std::string out = fmt::format("{} {}:{{MdHeader:{{msgType:{},length:{},seqNo:{}}}", lead_int, name,
                                  msg.msg_type, msg.length, msg.seq_no);
    if (msg.msg_type == 1) return out + "}";

    auto need = [&](const auto& opt, std::string_view what) -> decltype(auto) {
        if (!opt) throw std::invalid_argument(fmt::format("encode {}: missing {}", name, what));
        return *opt;
    };
    std::string body;
    switch (msg.kind) {
        case MessageKind::OrderAdd:
            body = fmt::format("securityId:{},side:{},quantity:{},limitPrice:{},orderId:{},timestamp:{}",
                               need(msg.security_id, "securityId"), to_string(need(msg.side, "side")),
                               need(msg.quantity, "quantity"), need(msg.price, "price").raw,
                               need(msg.order_ref, "orderId"), msg.event_ns);
            break;
        case MessageKind::OrderCancel:
            body = fmt::format("securityId:{},orderId:{},timestamp:{}", need(msg.security_id, "securityId"),
                               need(msg.order_ref, "orderId"), msg.event_ns);
            break;
        case MessageKind::OrderModify:
            body = fmt::format("securityId:{},quantity:{},price:{},orderId:{},timestamp:{}",
                               need(msg.security_id, "securityId"), need(msg.quantity, "quantity"),
                               need(msg.price, "price").raw, need(msg.order_ref, "orderId"), msg.event_ns);
            break;
        case MessageKind::Trade:
            body = fmt::format("securityId:{},orderId:{},tradeId:{},price:{},quantity:{},timestamp:{}",
                               need(msg.security_id, "securityId"), need(msg.order_ref, "orderId"),
                               need(msg.trade_ref, "tradeId"), need(msg.price, "price").raw,
                               need(msg.quantity, "quantity"), msg.event_ns);
            break;
        case MessageKind::TradeBust:
            body = fmt::format("securityId:{},tradeId:{},price:{},quantity:{},timestamp:{}",
                               need(msg.security_id, "securityId"), need(msg.trade_ref, "tradeId"),
                               need(msg.price, "price").raw, need(msg.quantity, "quantity"), msg.event_ns);
            break;
        default: {
            std::vector<std::string> parts;
            if (msg.security_id) parts.push_back(fmt::format("securityId:{}", *msg.security_id));
            for (const auto& [k, v] : msg.attributes) parts.push_back(fmt::format("{}:{}", k, v));
            if (msg.event_ns != 0) parts.push_back(fmt::format("timestamp:{}", msg.event_ns));
            body = fmt::format("{}", fmt::join(parts, ","));
            break;
        }
    }
    std::string_view body_name = name;
    if (body_name.substr(0, 2) == "Md") body_name.remove_prefix(2);
    return fmt::format("{},{}:{{{}}}}}", out, body_name, body);
}

const std::string_view kMessageTableHeader =
    "LocalTime,RecvNs,FeedId,LeadInt,SeqNo,MsgType,Length,Kind,Name,SecurityId,OrderRef,TradeRef,"
    "Price,Quantity,Side,EventNs,Attrs";

std::string table_row(const RawRecord& raw, const MarketMessage& msg) {
    std::vector<std::string> attrs;
    for (const auto& [k, v] : msg.attributes) attrs.push_back(fmt::format("{}={}", k, v));
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", to_local_time(msg.event_ns).iso(),
                       raw.recv_ns, raw.feed_id, raw.lead_int, msg.seq_no, msg.msg_type, msg.length,
                       to_string(msg.kind), msg.name, cell(msg.security_id), cell(msg.order_ref),
                       cell(msg.trade_ref), msg.price ? fmt::format("{}", msg.price->raw) : std::string{},
                       cell(msg.quantity), msg.side ? std::string(to_string(*msg.side)) : std::string{},
                       msg.event_ns, fmt::join(attrs, ";"));
}

ParsedRecord parse_table_row(std::string_view row, std::size_t line) {
    const auto f = split(trim(row), ',');
    if (f.size() != 17) throw ParseError(line, fmt::format("message table: expected 17 columns, got {}", f.size()));
    ParsedRecord r;
    r.raw.line = line;
    r.raw.recv_ns = to_int<Nanos>(f[1], line, "RecvNs");
    r.raw.feed_id = to_int<std::int64_t>(f[2], line, "FeedId");
    r.raw.lead_int = to_int<std::int64_t>(f[3], line, "LeadInt");
    r.raw.human_ts = format_iso(r.raw.recv_ns, 6);
    auto& m = r.msg;
    m.seq_no = to_int<std::int64_t>(f[4], line, "SeqNo");
    m.msg_type = to_int<int>(f[5], line, "MsgType");
    m.length = to_int<std::int64_t>(f[6], line, "Length");
    m.name = std::string(f[8]);
    bool known = false;
    for (auto k : {MessageKind::OrderAdd, MessageKind::OrderCancel, MessageKind::OrderModify, MessageKind::Trade,
                   MessageKind::TradeBust, MessageKind::TickTable, MessageKind::SecurityDefinition,
                   MessageKind::SecurityStatus, MessageKind::Unknown}) {
        if (to_string(k) == f[7]) {
            m.kind = k;
            known = true;
        }
    }
    if (!known) throw ParseError(line, fmt::format("message table: unknown kind '{}'", f[7]));
    m.security_id = opt_int<SecurityId>(f[9], line, "SecurityId");
    m.order_ref = opt_int<OrderRef>(f[10], line, "OrderRef");
    m.trade_ref = opt_int<std::int64_t>(f[11], line, "TradeRef");
    if (auto p = opt_int<std::int64_t>(f[12], line, "Price")) m.price = Price{*p};
    m.quantity = opt_int<Quantity>(f[13], line, "Quantity");
    if (f[14] == "BUY") m.side = Side::Buy;
    else if (f[14] == "SELL") m.side = Side::Sell;
    else if (!f[14].empty()) throw ParseError(line, "message table: bad side");
    m.event_ns = to_int<Nanos>(f[15], line, "EventNs");
    if (!f[16].empty()) {
        for (auto kv : split(f[16], ';')) {
            const auto eq = kv.find('=');
            if (eq == std::string_view::npos) throw ParseError(line, "message table: bad attribute");
            m.attributes.emplace_back(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
        }
    }
    if (m.kind != MessageKind::Unknown) {
        const unsigned need = required_fields(m.kind);
        const unsigned have = (m.security_id ? kSecurity : 0u) | (m.order_ref ? kOrder : 0u) |
                              (m.trade_ref ? kTrade : 0u) | (m.price ? kPrice : 0u) |
                              (m.quantity ? kQuantity : 0u) | (m.side ? kSide : 0u) | kTimestamp;
        if ((have & need) != need) throw ParseError(line, "message table: missing required field(s)");
        r.raw.payload = encode_payload(m, r.raw.lead_int);
    }
    return r;
}

Partition partition_by_security(const std::vector<MarketMessage>& messages) {
    Partition p;
    for (const auto& m : messages) {
        if (m.is_admin()) {
            p.admin.push_back(m);
        } else if (m.kind != MessageKind::Unknown && m.security_id) {
            p.by_security[*m.security_id].push_back(m);
        }
    }
    return p;
}

Partition partition_by_security(const std::vector<ParsedRecord>& records) {
    Partition p;
    for (const auto& r : records) {
        const auto& m = r.msg;
        if (m.is_admin()) {
            p.admin.push_back(m);
        } else if (m.kind != MessageKind::Unknown && m.security_id) {
            p.by_security[*m.security_id].push_back(m);
        }
    }
    return p;
}

}  // namespace mx::feed
