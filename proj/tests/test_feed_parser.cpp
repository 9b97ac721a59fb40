#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

#include "mx/feed_parser.hpp"
#include "mx/time.hpp"

using namespace mx;
using feed::MessageKind;

namespace {

const std::vector<std::string> kSnippet = {
    "1583827086138193000 (2020-03-10T07:58:06.138193) 1",
    "32000 MdOrderCancel:{MdHeader:{msgType:3,length:20,seqNo:204774},OrderCancel:{securityId:24,orderId:92564,timestamp:1583827086138161000}}",
    "1583827086138422000 (2020-03-10T07:58:06.138422) 1",
    "35000 MdOrderModify:{MdHeader:{msgType:4,length:32,seqNo:204775},OrderModify:{securityId:24,quantity:240,price:2497000000,orderId:28123,timestamp:1583827086138387000}}",
    "1583827086155788000 (2020-03-10T07:58:06.155788) 1",
    "34000 MdOrderModify:{MdHeader:{msgType:4,length:32,seqNo:204776},OrderModify:{securityId:24,quantity:240,price:2512500000,orderId:28110,timestamp:1583827086155754000}}",
    "1583827086179468000 (2020-03-10T07:58:06.179468) 1",
    "33000 MdOrderAdd:{MdHeader:{msgType:2,length:33,seqNo:204777},OrderAdd:{securityId:24,side:SELL,quantity:191,limitPrice:2507400000,orderId:92575,timestamp:1583827086179435000}}",
    "1583827086181382000 (2020-03-10T07:58:06.181382) 1",
    "39000 MdOrderCancel:{MdHeader:{msgType:3,length:20,seqNo:204778},OrderCancel:{securityId:24,orderId:92567,timestamp:1583827086181343000}}",
    "1583827086290870000 (2020-03-10T07:58:06.290870) 1",
    "46000 MdOrderAdd:{MdHeader:{msgType:2,length:33,seqNo:204779},OrderAdd:{securityId:21,side:SELL,quantity:203,limitPrice:1481700000,orderId:92576,timestamp:1583827086290824000}}",
};

feed::MarketMessage random_message(std::mt19937_64& rng, MessageKind kind, std::int64_t seq) {
    std::uniform_int_distribution<std::int64_t> big(0, std::numeric_limits<std::int64_t>::max());
    std::uniform_int_distribution<std::int64_t> small(1, 1'000'000);
    feed::MarketMessage m;
    m.kind = kind;
    m.msg_type = feed::canonical_msg_type(kind);
    m.length = feed::canonical_length(kind);
    m.name = std::string(feed::canonical_name(kind));
    m.seq_no = seq;
    m.security_id = small(rng);
    m.event_ns = big(rng);
    switch (kind) {
        case MessageKind::OrderAdd:
            m.side = rng() % 2 ? Side::Buy : Side::Sell;
            [[fallthrough]];
        case MessageKind::OrderModify:
            m.price = Price{big(rng)};
            m.quantity = small(rng);
            m.order_ref = big(rng);
            break;
        case MessageKind::OrderCancel: m.order_ref = big(rng); break;
        case MessageKind::Trade:
            m.order_ref = big(rng);
            m.trade_ref = big(rng);
            m.price = Price{big(rng)};
            m.quantity = small(rng);
            break;
        case MessageKind::TradeBust:
            m.trade_ref = big(rng);
            m.price = Price{big(rng)};
            m.quantity = small(rng);
            break;
        default: break;
    }
    return m;
}

std::vector<std::string> wire(const feed::MarketMessage& m, Nanos recv = 1583827086179468000, std::int64_t lead = 33000) {
    return {feed::encode_header(recv, 1), feed::encode_payload(m, lead)};
}

}  // namespace

TEST_CASE("order add from the feed snippet") {
    const std::vector<std::string> lines(kSnippet.begin() + 6, kSnippet.begin() + 8);
    const auto out = feed::parse_lines(lines, feed::ParseMode::Strict);
    REQUIRE(out.records.size() == 1);
    const auto& r = out.records[0];
    CHECK(r.raw.recv_ns == 1583827086179468000);
    CHECK(r.raw.human_ts == "2020-03-10T07:58:06.179468");
    CHECK(r.raw.feed_id == 1);
    CHECK(r.raw.lead_int == 33000);
    const auto& m = r.msg;
    CHECK(m.kind == MessageKind::OrderAdd);
    CHECK(m.seq_no == 204777);
    CHECK(m.length == 33);
    CHECK(m.security_id == 24);
    CHECK(m.side == Side::Sell);
    CHECK(m.quantity == 191);
    CHECK(m.price->raw == 2507400000);
    CHECK(m.price->zac() == doctest::Approx(25074));
    CHECK(m.order_ref == 92575);
    CHECK(m.event_ns == 1583827086179435000);
}

TEST_CASE("snippet re-encodes byte for byte") {
    const auto out = feed::parse_lines(kSnippet, feed::ParseMode::Strict);
    REQUIRE(out.records.size() == 6);
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        const auto& r = out.records[i];
        CHECK(feed::encode_header(r.raw.recv_ns, r.raw.feed_id) == kSnippet[2 * i]);
        CHECK(feed::encode_payload(r.msg, r.raw.lead_int) == kSnippet[2 * i + 1]);
    }
}

TEST_CASE("heartbeats are counted, not emitted") {
    std::mt19937_64 rng(1);
    auto lines = wire(feed::make_heartbeat(5));
    const auto more = wire(random_message(rng, MessageKind::OrderCancel, 6));
    lines.insert(lines.end(), more.begin(), more.end());
    const auto out = feed::parse_lines(lines, feed::ParseMode::Strict);
    CHECK(out.stats.heartbeats == 1);
    CHECK(out.stats.parsed == 1);
    CHECK(out.records.size() == 1);
    CHECK(out.stats.balanced());
}

TEST_CASE("unknown message types are reported and skipped over") {
    std::vector<std::string> lines = {
        "1583827086138193000 (2020-03-10T07:58:06.138193) 1",
        "40000 MdSnapshotThing:{MdHeader:{msgType:12,length:10,seqNo:7},SnapshotThing:{securityId:24,foo:1}}",
        kSnippet[6],
        kSnippet[7],
    };
    const auto out = feed::parse_lines(lines, feed::ParseMode::Strict);
    CHECK(out.stats.unknown == 1);
    CHECK(out.stats.parsed == 1);
    REQUIRE(out.records.size() == 2);
    CHECK(out.records[0].msg.kind == MessageKind::Unknown);
    CHECK(out.records[1].msg.seq_no == 204777);
}

TEST_CASE("malformed pairs: strict throws with the line, lenient counts") {
    std::vector<std::string> lines = {kSnippet[0], "32000 MdOrderCancel:{MdHeader:{msgType:3,length:20},OrderCancel:{}}",
                                      kSnippet[6], kSnippet[7]};
    try {
        feed::parse_lines(lines, feed::ParseMode::Strict);
        FAIL("expected a parse error");
    } catch (const feed::ParseError& e) {
        CHECK(e.line() == 1);
    }
    const auto out = feed::parse_lines(lines, feed::ParseMode::Lenient);
    CHECK(out.stats.errors == 1);
    CHECK(out.stats.parsed == 1);
    CHECK(out.stats.balanced());
}

TEST_CASE("admin messages keep their fields in the attribute bag") {
    std::vector<std::string> lines = {
        kSnippet[0],
        "1000 MdSecurityStatus:{MdHeader:{msgType:9,length:0,seqNo:3},SecurityStatus:{securityId:21,status:OPEN,timestamp:5}}"};
    const auto out = feed::parse_lines(lines, feed::ParseMode::Strict);
    REQUIRE(out.records.size() == 1);
    const auto& m = out.records[0].msg;
    CHECK(m.kind == MessageKind::SecurityStatus);
    CHECK(m.is_admin());
    CHECK(m.security_id == 21);
    CHECK(m.event_ns == 5);
    REQUIRE(m.attributes.size() == 1);
    CHECK(m.attributes[0] == std::pair<std::string, std::string>{"status", "OPEN"});
}

TEST_CASE("local time is fixed UTC+2") {
    CHECK(to_local_time(0).iso() == "1970-01-01T02:00:00.000000000");
    CHECK(to_local_time(1583827086138193000).iso() == "2020-03-10T09:58:06.138193000");
    const auto a = to_local_time(1583827086138193000);
    const auto b = to_local_time(1583827086138193001);
    CHECK(b.local_ns - a.local_ns == 1);
    CHECK(a.iso() != b.iso());
    CHECK(local_day(22 * 3600 * kNanosPerSecond - 1) == 0);
    CHECK(local_day(22 * 3600 * kNanosPerSecond) == 1);
}

TEST_CASE("partition keeps per-security order") {
    const auto out = feed::parse_lines(kSnippet, feed::ParseMode::Strict);
    const auto part = feed::partition_by_security(out.records);
    REQUIRE(part.by_security.size() == 2);
    CHECK(part.by_security.at(21).size() == 1);
    const auto& s24 = part.by_security.at(24);
    REQUIRE(s24.size() == 5);
    for (std::size_t i = 1; i < s24.size(); ++i) CHECK(s24[i - 1].seq_no < s24[i].seq_no);

    CHECK(feed::partition_by_security(std::vector<feed::MarketMessage>{}).by_security.empty());

    std::vector<feed::MarketMessage> one;
    for (const auto& r : out.records)
        if (r.msg.security_id == 24) one.push_back(r.msg);
    auto admin = one.front();
    admin.kind = MessageKind::SecurityDefinition;
    one.insert(one.begin() + 2, admin);
    const auto p1 = feed::partition_by_security(one);
    REQUIRE(p1.by_security.size() == 1);
    CHECK(p1.admin.size() == 1);
    CHECK(p1.by_security.at(24) == s24);
}

TEST_CASE("round trip for every book and trade kind") {
    std::mt19937_64 rng(42);
    std::int64_t seq = 1;
    for (int rep = 0; rep < 200; ++rep) {
        for (auto k : {MessageKind::OrderAdd, MessageKind::OrderCancel, MessageKind::OrderModify, MessageKind::Trade,
                       MessageKind::TradeBust}) {
            const auto m = random_message(rng, k, seq++);
            const auto out = feed::parse_lines(wire(m), feed::ParseMode::Strict);
            REQUIRE(out.records.size() == 1);
            CHECK(out.records[0].msg == m);
            CHECK(out.records[0].raw.lead_int == 33000);
        }
    }
}

TEST_CASE("prices survive encoding exactly over the full range") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::int64_t> big(0, std::numeric_limits<std::int64_t>::max());
    std::vector<std::int64_t> raws = {0, 1, std::numeric_limits<std::int64_t>::max()};
    for (int i = 0; i < 2000; ++i) raws.push_back(big(rng));
    for (auto raw : raws) {
        auto m = random_message(rng, MessageKind::OrderAdd, 1);
        m.price = Price{raw};
        const auto out = feed::parse_lines(wire(m), feed::ParseMode::Strict);
        REQUIRE(out.records.size() == 1);
        CHECK(out.records[0].msg.price->raw == raw);
    }
}

TEST_CASE("counting identity over a noisy stream") {
    std::mt19937_64 rng(5);
    std::vector<std::string> lines;
    std::size_t pairs = 0;
    for (int i = 0; i < 300; ++i) {
        const auto pick = rng() % 4;
        std::vector<std::string> pair;
        if (pick == 0) pair = wire(feed::make_heartbeat(i));
        else if (pick == 1) pair = {kSnippet[0], "1 MdFoo:{MdHeader:{msgType:14,length:1,seqNo:1},Foo:{x:1}}"};
        else if (pick == 2) pair = {kSnippet[0], "garbage"};
        else pair = wire(random_message(rng, MessageKind::OrderCancel, i));
        lines.insert(lines.end(), pair.begin(), pair.end());
        ++pairs;
    }
    const auto out = feed::parse_lines(lines, feed::ParseMode::Lenient);
    CHECK(out.stats.pairs == pairs);
    CHECK(out.stats.balanced());
}

TEST_CASE("message table round trip") {
    const auto out = feed::parse_lines(kSnippet, feed::ParseMode::Strict);
    for (const auto& r : out.records) {
        const auto row = feed::table_row(r.raw, r.msg);
        const auto back = feed::parse_table_row(row, 2);
        CHECK(back.msg == r.msg);
        CHECK(back.raw.payload == r.raw.payload);
        CHECK(back.raw.recv_ns == r.raw.recv_ns);
    }
    CHECK(feed::table_row(out.records[3].raw, out.records[3].msg).starts_with("2020-03-10T09:58:06.179435000,"));
}

TEST_CASE("stream parser matches line-vector parser") {
    std::string text;
    for (const auto& l : kSnippet) text += l + "\n";
    std::istringstream in(text);
    const auto a = feed::parse_stream(in, feed::ParseMode::Strict);
    const auto b = feed::parse_lines(kSnippet, feed::ParseMode::Strict);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].msg == b.records[i].msg);
}
