#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "mx/classification.hpp"
#include "mx/cost_model.hpp"
#include "mx/feed_parser.hpp"
#include "mx/impact_master.hpp"
#include "mx/l1.hpp"
#include "mx/lob_engine.hpp"
#include "mx/stylized_facts.hpp"
#include "mx/synthetic_market.hpp"
#include "mx/taq_core.hpp"
#include "mx/time.hpp"
#include "mx/vendor_ingest.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mx;

namespace {

constexpr std::string_view kVersion = "0.1.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint32_t crc_update(std::uint32_t crc, std::string_view s) {
    return static_cast<std::uint32_t>(::crc32(crc, reinterpret_cast<const Bytef*>(s.data()),
                                              static_cast<uInt>(s.size())));
}

std::string hex(std::uint32_t v) { return fmt::format("{:08x}", v); }

// Arguments that only affect where or how fast outputs are produced.
std::vector<std::string> identity_args(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& a = args[i];
        if (a == "--out" || a == "--jobs" || a == "-j" || a == "-o" || a == "--output") {
            ++i;
            continue;
        }
        if (a.starts_with("--out=") || a.starts_with("--jobs=") || a.starts_with("--output=")) continue;
        out.push_back(a);
    }
    return out;
}

/// Output directory plus its manifest.
class Run {
public:
    Run(std::string command, std::vector<std::string> args) : command_(std::move(command)), args_(std::move(args)) {}

    void set_out(std::optional<fs::path> dir) { dir_ = std::move(dir); }
    bool has_out() const { return dir_.has_value(); }

    void input(const std::string& path, std::uint32_t crc) { inputs_.push_back({path, hex(crc)}); }
    void config(const std::string& path, std::uint32_t crc) { configs_.push_back({path, hex(crc)}); }
    void seed(std::uint64_t s) { seed_ = s; }
    void note(const std::string& key, json value) { notes_[key] = std::move(value); }

    const std::string& id() {
        if (id_.empty()) {
            json j;
            j["command"] = command_;
            j["args"] = identity_args(args_);
            j["inputs"] = inputs_;
            j["configs"] = configs_;
            j["seed"] = seed_ ? json(*seed_) : json(nullptr);
            j["version"] = kVersion;
            id_ = hex(crc_update(0, j.dump()));
        }
        return id_;
    }

    void csv(const std::string& name, std::string_view body) {
        write(name, fmt::format("# manifest {}\n{}", id(), body));
    }

    void raw(const std::string& name, std::string_view body) { write(name, body); }

    void finish() {
        if (!dir_) return;
        fs::create_directories(*dir_);
        json m;
        m["command"] = command_;
        m["args"] = args_;
        m["run_id"] = id();
        m["version"] = kVersion;
        m["seed"] = seed_ ? json(*seed_) : json(nullptr);
        json in = json::array();
        for (const auto& [p, c] : inputs_) in.push_back({{"path", p}, {"crc32", c}});
        m["inputs"] = in;
        json cf = json::array();
        for (const auto& [p, c] : configs_) cf.push_back({{"path", p}, {"crc32", c}});
        m["configs"] = cf;
        json outs = json::object();
        for (const auto& [name, crc] : outputs_) outs[name] = crc;
        m["outputs"] = outs;
        m["report"] = notes_;
        std::ofstream f(*dir_ / "manifest.json", std::ios::binary);
        f << m.dump(2) << '\n';
        if (!f) throw std::runtime_error(fmt::format("cannot write manifest in {}", dir_->string()));
    }

private:
    void write(const std::string& name, std::string_view body) {
        if (!dir_) return;
        fs::create_directories(*dir_);
        std::ofstream f(*dir_ / name, std::ios::binary);
        f.write(body.data(), static_cast<std::streamsize>(body.size()));
        if (!f) throw std::runtime_error(fmt::format("cannot write {}", (*dir_ / name).string()));
        std::lock_guard lock(mu_);
        outputs_[name] = hex(crc_update(0, body));
    }

    std::string command_;
    std::vector<std::string> args_;
    std::optional<fs::path> dir_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::pair<std::string, std::string>> configs_;
    std::optional<std::uint64_t> seed_;
    json notes_ = json::object();
    std::map<std::string, std::string> outputs_;
    std::string id_;
    std::mutex mu_;
};

template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(jobs, n); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

void require_exists(const std::vector<std::string>& paths) {
    for (const auto& p : paths)
        if (p != "-" && !fs::exists(p)) throw UsageError(fmt::format("input not found: {}", p));
}

/// Reads a plain or gzip file (or stdin for "-") line by line, tracking a checksum.
std::uint32_t read_lines(const std::string& path, const std::function<void(std::string_view)>& fn) {
    std::uint32_t crc = 0;
    auto step = [&](std::string_view l) {
        crc = crc_update(crc, l);
        crc = crc_update(crc, "\n");
        fn(l);
    };
    if (path == "-") {
        std::string line;
        while (std::getline(std::cin, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            step(line);
        }
    } else {
        feed::for_each_line(path, step);
    }
    return crc;
}

std::string slurp(const std::string& path, std::uint32_t& crc) {
    std::string text;
    crc = read_lines(path, [&](std::string_view l) {
        text.append(l);
        text.push_back('\n');
    });
    return text;
}

std::string name_of(const std::string& path) {
    fs::path p(path);
    if (p.extension() == ".gz") p = p.stem();
    std::string s = p.stem().string();
    if (s.starts_with("l1_")) s.erase(0, 3);
    return s;
}

taq::Session parse_session(const std::string& text) {
    const auto dash = text.find('-');
    if (dash == std::string::npos) throw UsageError(fmt::format("--session expects HH:MM-HH:MM, got '{}'", text));
    try {
        taq::Session s{parse_hhmm(text.substr(0, dash)), parse_hhmm(text.substr(dash + 1))};
        if (s.close <= s.open) throw UsageError("--session: close must follow open");
        return s;
    } catch (const std::invalid_argument& e) {
        throw UsageError(fmt::format("--session: {}", e.what()));
    }
}

taq::MicroWeighting parse_weighting(const std::string& s) {
    return s == "imbalance" ? taq::MicroWeighting::Imbalance : taq::MicroWeighting::SideVolume;
}

std::vector<TradeSign> sides_of(const std::string& s) {
    if (s == "bi") return {TradeSign::Buyer};
    if (s == "si") return {TradeSign::Seller};
    return {TradeSign::Buyer, TradeSign::Seller};
}

std::string_view side_tag(TradeSign s) { return s == TradeSign::Buyer ? "bi" : "si"; }

std::string num(std::optional<double> v) { return format_number(v); }

std::optional<std::string> config_dir() {
    if (const char* d = std::getenv("MX_CONFIG_DIR"); d && *d) return std::string(d);
    return std::nullopt;
}

// --- message input -------------------------------------------------------

struct MessageInput {
    std::vector<feed::ParsedRecord> records;
    feed::ParseStats stats;
    bool table = false;
    std::uint32_t crc = 0;
};

/// Wire format or the message table, detected from the first non-blank line.
MessageInput read_messages(const std::string& path, feed::ParseMode mode) {
    MessageInput in;
    std::optional<feed::StreamParser> parser;
    bool decided = false;
    std::size_t line = 0;
    in.crc = read_lines(path, [&](std::string_view l) {
        ++line;
        if (!decided) {
            if (l.find_first_not_of(" \t") == std::string_view::npos) return;
            decided = true;
            if (l == feed::kMessageTableHeader) {
                in.table = true;
                return;
            }
            parser.emplace(mode, [&](feed::ParsedRecord&& r) { in.records.push_back(std::move(r)); });
        }
        if (!in.table) {
            parser->feed(l);
            return;
        }
        if (l.empty() || l.front() == '#') return;
        ++in.stats.pairs;
        try {
            auto r = feed::parse_table_row(l, line);
            if (r.msg.kind == feed::MessageKind::Unknown) ++in.stats.unknown;
            else ++in.stats.parsed;
            in.records.push_back(std::move(r));
        } catch (const feed::ParseError& e) {
            if (mode == feed::ParseMode::Strict) throw;
            ++in.stats.errors;
            if (in.stats.error_samples.size() < 10) in.stats.error_samples.emplace_back(e.what());
        }
    });
    if (parser) {
        parser->finish();
        in.stats = parser->stats();
    }
    return in;
}

json stats_json(const feed::ParseStats& s) {
    return json{{"pairs", s.pairs},         {"parsed", s.parsed}, {"heartbeats", s.heartbeats},
                {"unknown", s.unknown},     {"errors", s.errors}, {"error_samples", s.error_samples}};
}

json anomaly_json(const lob::AnomalyCounts& a) {
    return json{{"unknown_ref", a.unknown_ref},   {"duplicate_ref", a.duplicate_ref},
                {"overfill", a.overfill},         {"bad_quantity", a.bad_quantity},
                {"wrong_security", a.wrong_security}, {"busts", a.busts}};
}

std::string message_table(const std::vector<feed::ParsedRecord>& records) {
    std::string out(feed::kMessageTableHeader);
    out.push_back('\n');
    for (const auto& r : records) {
        out += feed::table_row(r.raw, r.msg);
        out.push_back('\n');
    }
    return out;
}

// --- L1 input --------------------------------------------------------------

struct Series {
    std::string name;
    std::string exchange;
    std::string path;
    std::vector<L1Record> l1;
};

/// Accepts "path" or "EXCHANGE:path".
std::pair<std::string, std::string> split_exchange(const std::string& arg, const std::string& fallback) {
    const auto colon = arg.find(':');
    if (colon != std::string::npos && colon > 0 && arg.find('/') > colon && !fs::exists(arg))
        return {arg.substr(0, colon), arg.substr(colon + 1)};
    return {fallback, arg};
}

std::vector<Series> load_series(const std::vector<std::string>& args, Run& run, taq::MicroWeighting w,
                                const std::string& default_exchange = "") {
    std::vector<Series> out;
    std::vector<std::string> paths;
    for (const auto& a : args) {
        auto [exch, path] = split_exchange(a, default_exchange);
        out.push_back({name_of(path), exch, path, {}});
        paths.push_back(path);
    }
    require_exists(paths);
    for (auto& s : out) {
        std::uint32_t crc = 0;
        std::istringstream is(slurp(s.path, crc));
        run.input(s.path, crc);
        try {
            s.l1 = taq::enrich(read_l1_csv(is), w);
        } catch (const std::exception& e) {
            throw std::runtime_error(fmt::format("{}: {}", s.path, e.what()));
        }
    }
    return out;
}

/// Recorded signs, or Lee-Ready inferred ones aligned with scan_trades order.
std::vector<std::optional<TradeSign>> trade_signs(const std::vector<L1Record>& l1, bool infer) {
    if (!infer) return {};
    const auto inputs = classify::trades_from_l1(l1);
    const auto signed_trades = classify::classify(inputs, classify::Rule::LeeReady);
    std::vector<std::optional<TradeSign>> out;
    out.reserve(signed_trades.size());
    for (const auto& t : signed_trades) out.push_back(t.inferred);
    return out;
}

// --- subcommands -----------------------------------------------------------

struct Common {
    std::string out = "mx_out";
    unsigned jobs = 1;
    std::string micro = "volume";
};

int cmd_gen(Run& run, const std::optional<std::string>& scenario, const std::map<std::string, double>& overrides,
            std::optional<std::uint64_t> seed, bool shallow, const std::string& output,
            const std::optional<std::string>& truth_dir) {
    synth::ScenarioConfig cfg;
    if (scenario) {
        require_exists({*scenario});
        std::uint32_t crc = 0;
        const auto text = slurp(*scenario, crc);
        run.config(*scenario, crc);
        try {
            cfg = synth::parse_scenario(text);
        } catch (const std::exception& e) {
            throw UsageError(fmt::format("{}: {}", *scenario, e.what()));
        }
    }
    if (seed) cfg.seed = *seed;
    if (shallow) cfg.shallow = true;
    for (const auto& [k, v] : overrides) {
        if (k == "securities") cfg.n_securities = static_cast<int>(v);
        else if (k == "days") cfg.n_days = static_cast<int>(v);
        else if (k == "messages") cfg.messages_per_security = static_cast<std::size_t>(v);
        else if (k == "break-rate") cfg.target_break_rate = v;
        else if (k == "persistence") cfg.sign_persistence = v;
        else if (k == "heartbeat-every") cfg.heartbeat_every = static_cast<std::size_t>(v);
        else if (k == "impact-alpha" || k == "impact-lambda" || k == "impact-noise") {
            if (!cfg.impact) cfg.impact = synth::ImpactLaw{};
            if (k == "impact-alpha") cfg.impact->alpha = v;
            else if (k == "impact-lambda") cfg.impact->lambda = v;
            else cfg.impact->noise = v;
        }
    }
    try {
        synth::validate(cfg);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    run.seed(cfg.seed);
    const auto g = synth::generate(cfg);
    if (output == "-") {
        std::cout << g.wire;
        std::cout.flush();
    } else {
        std::ofstream f(output, std::ios::binary);
        f << g.wire;
        if (!f) throw std::runtime_error(fmt::format("cannot write {}", output));
    }
    if (truth_dir) {
        run.set_out(fs::path(*truth_dir));
        run.raw("scenario.json", synth::scenario_json(cfg) + "\n");
        for (const auto& [sec, l1] : g.truth.l1) run.csv(fmt::format("truth_l1_{}.csv", sec), l1_csv(taq::enrich(l1)));
        std::string trades = "Security,TimeStamp,Sign,Price,Volume,MidBefore,MidAfter,TargetDp,Omega\n";
        for (const auto& t : g.truth.trades)
            trades += fmt::format("{},{},{},{},{},{},{},{},{}\n", t.security, to_local_time(t.ts).iso(),
                                  as_int(t.sign), format_price_zac(t.price), t.volume, num(t.mid_before),
                                  num(t.mid_after), num(t.target_dp), format_number(t.omega));
        run.csv("truth_trades.csv", trades);
        json summary;
        json c = json::object(), br = json::object();
        for (const auto& [sec, v] : g.truth.C) c[std::to_string(sec)] = v;
        for (const auto& [sec, v] : g.truth.break_rate) br[std::to_string(sec)] = v ? json(*v) : json(nullptr);
        summary["C"] = c;
        summary["break_rate"] = br;
        summary["heartbeats"] = g.heartbeats;
        summary["messages"] = g.messages.size();
        if (g.truth.law)
            summary["law"] = {{"alpha", g.truth.law->alpha}, {"lambda", g.truth.law->lambda},
                              {"noise", g.truth.law->noise}};
        run.raw("truth_summary.json", summary.dump(2) + "\n");
        run.finish();
    }
    return 0;
}

int cmd_parse(Run& run, const std::string& input, bool strict, const std::optional<std::string>& dump,
              const std::optional<std::string>& out) {
    require_exists({input});
    auto in = read_messages(input, strict ? feed::ParseMode::Strict : feed::ParseMode::Lenient);
    run.input(input, in.crc);
    const auto table = message_table(in.records);
    if (dump) {
        std::ofstream f(*dump, std::ios::binary);
        f << table;
        if (!f) throw std::runtime_error(fmt::format("cannot write {}", *dump));
    } else {
        std::cout << table;
        std::cout.flush();
    }
    const auto& s = in.stats;
    std::cerr << fmt::format("parse: pairs {} parsed {} heartbeats {} unknown {} errors {}\n", s.pairs, s.parsed,
                             s.heartbeats, s.unknown, s.errors);
    if (out) {
        run.set_out(fs::path(*out));
        run.note("parse", stats_json(s));
        run.finish();
    }
    return 0;
}

int cmd_build_lob(Run& run, const Common& c, const std::string& input, bool strict, bool depth,
                  std::optional<bool> passthrough) {
    require_exists({input});
    const auto mode = strict ? feed::ParseMode::Strict : feed::ParseMode::Lenient;
    auto in = read_messages(input, mode);
    run.input(input, in.crc);
    run.set_out(fs::path(c.out));
    const auto part = feed::partition_by_security(in.records);
    std::vector<std::pair<SecurityId, const std::vector<feed::MarketMessage>*>> secs;
    for (const auto& [id, msgs] : part.by_security) secs.emplace_back(id, &msgs);
    std::vector<lob::ReplayResult> results(secs.size());
    const auto w = parse_weighting(c.micro);
    parallel_for(secs.size(), c.jobs, [&](std::size_t i) {
        lob::ReplayOptions opts;
        opts.mode = strict ? lob::Mode::Strict : lob::Mode::Lenient;
        opts.record_depth = depth;
        results[i] = lob::replay(*secs[i].second, secs[i].first, opts);
        run.csv(fmt::format("l1_{}.csv", secs[i].first), l1_csv(taq::enrich(results[i].l1, w)));
        if (depth) {
            std::string jl;
            for (const auto& d : results[i].depth) jl += lob::depth_json(d) + "\n";
            run.raw(fmt::format("depth_{}.jsonl", secs[i].first), jl);
        }
    });
    std::string breaks = "Security,Trades,Broken,BreakRate\n";
    json anomalies = json::object();
    for (std::size_t i = 0; i < secs.size(); ++i) {
        const auto& tr = results[i].trades;
        const auto broken = std::count_if(tr.begin(), tr.end(), [](const auto& t) { return t.hit_side_empty; });
        breaks += fmt::format("{},{},{},{}\n", secs[i].first, tr.size(), broken, num(lob::break_rate(tr)));
        anomalies[std::to_string(secs[i].first)] = anomaly_json(results[i].anomalies);
    }
    run.csv("break_rate.csv", breaks);
    run.note("parse", stats_json(in.stats));
    run.note("book_anomalies", anomalies);
    run.note("admin_messages", part.admin.size());
    run.finish();
    if (passthrough.value_or(!::isatty(STDOUT_FILENO))) {
        std::cout << message_table(in.records);
        std::cout.flush();
    }
    return 0;
}

struct VerifyLine {
    std::string label;
    bool pass = false;
    std::size_t records = 0;
    std::string detail;
};

VerifyLine verify_security(const std::string& label, std::span<const feed::MarketMessage> msgs, SecurityId sec) {
    VerifyLine v{label, false, 0, {}};
    const auto engine = l1_csv(taq::enrich(lob::replay(msgs, sec).l1));
    const auto oracle = l1_csv(taq::enrich(synth::oracle_l1(msgs, sec)));
    v.records = static_cast<std::size_t>(std::count(engine.begin(), engine.end(), '\n'));
    v.pass = engine == oracle;
    if (!v.pass) {
        std::istringstream a(engine), b(oracle);
        std::string la, lb;
        for (std::size_t line = 1;; ++line) {
            const bool ga = static_cast<bool>(std::getline(a, la));
            const bool gb = static_cast<bool>(std::getline(b, lb));
            if (!ga && !gb) break;
            if (!ga || !gb || la != lb) {
                v.detail = fmt::format("line {}: engine '{}' oracle '{}'", line, ga ? la : "<eof>", gb ? lb : "<eof>");
                break;
            }
        }
    }
    return v;
}

int cmd_verify(Run& run, const Common& c, const std::string& input, std::size_t suite, std::uint64_t seed,
               std::size_t messages, const std::optional<std::string>& out) {
    std::vector<VerifyLine> lines;
    if (suite > 0) {
        run.seed(seed);
        lines.resize(suite);
        parallel_for(suite, c.jobs, [&](std::size_t i) {
            synth::ScenarioConfig cfg;
            cfg.seed = seed + i;
            cfg.messages_per_security = messages;
            cfg.shallow = i % 5 == 4;
            const auto g = synth::generate(cfg);
            const auto part = feed::partition_by_security(g.messages);
            VerifyLine all{fmt::format("stream {} (seed {})", i + 1, cfg.seed), true, 0, {}};
            for (const auto& [sec, msgs] : part.by_security) {
                auto v = verify_security(all.label, msgs, sec);
                all.records += v.records;
                if (!v.pass && all.pass) {
                    all.pass = false;
                    all.detail = fmt::format("security {} {}", sec, v.detail);
                }
            }
            lines[i] = std::move(all);
        });
    } else {
        require_exists({input});
        auto in = read_messages(input, feed::ParseMode::Lenient);
        run.input(input, in.crc);
        const auto part = feed::partition_by_security(in.records);
        for (const auto& [sec, msgs] : part.by_security)
            lines.push_back(verify_security(fmt::format("security {}", sec), msgs, sec));
    }
    std::size_t passed = 0;
    std::string report = "Subject,Result,Records,Detail\n";
    for (const auto& v : lines) {
        passed += v.pass;
        std::cout << fmt::format("{}: {} ({} records){}\n", v.label, v.pass ? "PASS" : "FAIL", v.records,
                                 v.detail.empty() ? "" : " " + v.detail);
        report += fmt::format("{},{},{},\"{}\"\n", v.label, v.pass ? "PASS" : "FAIL", v.records, v.detail);
    }
    const bool ok = passed == lines.size();
    std::cout << fmt::format("verify: {}/{} {}\n", passed, lines.size(), ok ? "all pass" : "FAILED");
    if (out) {
        run.set_out(fs::path(*out));
        run.csv("verify.csv", report);
        run.note("passed", passed);
        run.note("checked", lines.size());
        run.finish();
    }
    return ok ? 0 : 1;
}

int cmd_ingest_vendor(Run& run, const Common& c, const std::vector<std::string>& inputs,
                      const std::vector<std::string>& keep, const std::string& session, const std::string& units,
                      double utc_offset_hours, bool strict, const std::optional<std::string>& name) {
    require_exists(inputs);
    if (name && inputs.size() != 1) throw UsageError("--name needs exactly one input");
    vendor::IngestOptions opts;
    opts.session = parse_session(session);
    opts.keep_codes = keep;
    opts.unit = units == "rand" ? vendor::PriceUnit::Rand : vendor::PriceUnit::Zac;
    opts.file_utc_offset = static_cast<Nanos>(utc_offset_hours * 3600.0 * kNanosPerSecond);
    opts.strict = strict;
    opts.weighting = parse_weighting(c.micro);
    run.set_out(fs::path(c.out));
    struct Done {
        std::string name;
        vendor::IngestResult result;
    };
    std::vector<Done> done;
    for (const auto& path : inputs) {
        std::uint32_t crc = 0;
        std::istringstream is(slurp(path, crc));
        run.input(path, crc);
        vendor::IngestResult r;
        try {
            r = vendor::ingest_vendor_csv(is, opts);
        } catch (const std::exception& e) {
            throw std::runtime_error(fmt::format("{}: {}", path, e.what()));
        }
        done.push_back({name ? *name : name_of(path), std::move(r)});
    }
    std::string seq = "Security,Trades,Followed,Fraction\n";
    json report = json::object();
    for (const auto& d : done) {
        run.csv(fmt::format("l1_{}.csv", d.name), l1_csv(d.result.l1));
        const auto s = vendor::verify_trade_quote_sequencing(d.result.l1);
        seq += fmt::format("{},{},{},{}\n", d.name, s.trades, s.followed, num(s.fraction));
        const auto& st = d.result.stats;
        report[d.name] = {{"rows", st.rows},
                          {"kept", st.kept},
                          {"outside_session", st.outside_session},
                          {"dropped_condcode", st.dropped_condcode},
                          {"anomalies", st.anomalies},
                          {"anomaly_samples", st.anomaly_samples}};
    }
    run.csv("sequencing.csv", seq);
    run.note("ingest", report);
    run.finish();
    return 0;
}

std::string returns_csv(const taq::ReturnSeries& r) {
    std::string out = "TimeStamp,LogReturn\n";
    for (const auto& p : r) out += fmt::format("{},{}\n", to_local_time(p.ts).iso(), format_number(p.r));
    return out;
}

int cmd_taq(Run& run, const Common& c, const std::vector<std::string>& inputs, const std::vector<int>& widths,
            const std::string& session) {
    const auto sess = parse_session(session);
    for (int w : widths)
        if (w <= 0) throw UsageError("--bar-width must be positive");
    const auto w = parse_weighting(c.micro);
    auto series = load_series(inputs, run, w);
    run.set_out(fs::path(c.out));
    json report = json::object();
    std::vector<json> reports(series.size());
    parallel_for(series.size(), c.jobs, [&](std::size_t i) {
        const auto& s = series[i];
        const auto quotes = taq::derive_quotes(s.l1, w);
        std::string q = "TimeStamp,Bid,BidVol,Ask,AskVol,MidPrice,MicroPrice\n";
        auto vol = [](std::optional<Quantity> v) { return v ? std::to_string(*v) : std::string("NaN"); };
        for (const auto& p : quotes)
            q += fmt::format("{},{},{},{},{},{},{}\n", to_local_time(p.ts).iso(), num(p.bid), vol(p.bid_vol),
                             num(p.ask), vol(p.ask_vol), num(p.mid), num(p.micro));
        run.csv(fmt::format("quotes_{}.csv", s.name), q);
        run.csv(fmt::format("returns_tick_{}.csv", s.name), returns_csv(taq::tick_returns(quotes)));
        for (int width : widths) {
            const auto bars = taq::ohlc(quotes, width, sess);
            std::string b = "Start,End,Open,High,Low,Close,Direction\n";
            for (const auto& bar : bars)
                b += fmt::format("{},{},{},{},{},{},{}\n", to_local_time(bar.start).iso(), to_local_time(bar.end).iso(),
                                 num(bar.open), num(bar.high), num(bar.low), num(bar.close),
                                 bar.empty() ? "empty" : (bar.up() ? "up" : "down"));
            run.csv(fmt::format("bars_{}m_{}.csv", width, s.name), b);
            run.csv(fmt::format("returns_bar_{}m_{}.csv", width, s.name), returns_csv(taq::bar_returns(bars)));
        }
        std::string ia = "InterArrival\n";
        for (double x : taq::interarrivals(std::span<const L1Record>(s.l1))) ia += format_number(x) + "\n";
        run.csv(fmt::format("interarrivals_{}.csv", s.name), ia);
        const auto scan = taq::scan_trades(s.l1);
        std::string im = "TimeStamp,Price,Volume,Sign,MidBefore,MidAfter,Dp,BrokenAfter\n";
        for (const auto& t : scan.trades)
            im += fmt::format("{},{},{},{},{},{},{},{}\n", to_local_time(t.ts).iso(), format_price_zac(t.price), t.volume,
                              t.sign ? std::to_string(as_int(*t.sign)) : "NaN", num(t.mid_before), num(t.mid_after),
                              num(t.dp), t.broken_after ? 1 : 0);
        run.csv(fmt::format("impacts_{}.csv", s.name), im);
        reports[i] = {{"quotes", quotes.size()},
                      {"trades", scan.trades.size()},
                      {"skipped_broken", scan.skipped_broken},
                      {"skipped_no_mid", scan.skipped_no_mid}};
    });
    for (std::size_t i = 0; i < series.size(); ++i) report[series[i].name] = reports[i];
    run.note("taq", report);
    run.finish();
    return 0;
}

int cmd_classify(Run& run, const Common& c, const std::vector<std::string>& inputs) {
    auto series = load_series(inputs, run, parse_weighting(c.micro));
    std::vector<classify::SecurityReport> reports;
    for (const auto& s : series) {
        const auto trades = classify::trades_from_l1(s.l1);
        try {
            reports.push_back(classify::evaluate_all(s.name, trades));
        } catch (const classify::NoGroundTruth& e) {
            throw std::runtime_error(fmt::format("{}: {}", s.path, e.what()));
        }
    }
    run.set_out(fs::path(c.out));
    const auto table = classify::accuracy_table_csv(reports);
    run.csv("classification.csv", table);
    run.csv("classification_detail.csv", classify::detail_csv(reports));
    run.finish();
    std::cout << table;
    return 0;
}

void write_distribution(Run& run, const std::string& scale, const std::string& name, std::span<const double> x,
                        double pct, std::string& fits, json& skipped) {
    if (x.size() < 2) {
        skipped.push_back(fmt::format("{} {}: {} returns", name, scale, x.size()));
        return;
    }
    const auto nf = facts::fit_normal(x);
    run.csv(fmt::format("qq_normal_{}_{}.csv", scale, name), [&] {
        std::string out = "Theoretical,Empirical\n";
        for (const auto& p : facts::qq_normal(x, nf))
            out += fmt::format("{},{}\n", format_number(p.theoretical), format_number(p.empirical));
        return out;
    }());
    for (auto tail : {facts::Tail::Upper, facts::Tail::Lower}) {
        const std::string tag = tail == facts::Tail::Upper ? "upper" : "lower";
        try {
            const auto pf = facts::fit_powerlaw(x, tail == facts::Tail::Upper ? pct : 100.0 - pct, tail);
            fits += fmt::format("{},{},{},{},{},{},{},{},{}\n", name, scale, x.size(), format_number(nf.mean),
                                format_number(nf.variance), tag, format_number(pf.x_min), format_number(pf.alpha),
                                pf.n_tail);
            const auto tv = facts::tail_values(x, pf);
            std::string qq = "Theoretical,Empirical\n";
            for (const auto& p : facts::qq_powerlaw(tv, pf))
                qq += fmt::format("{},{}\n", format_number(p.theoretical), format_number(p.empirical));
            run.csv(fmt::format("qq_powerlaw_{}_{}_{}.csv", tag, scale, name), qq);
            std::string cc = "X,Empirical,Fitted\n";
            for (const auto& p : facts::ccdf(x, pf))
                cc += fmt::format("{},{},{}\n", format_number(p.x), format_number(p.empirical), format_number(p.fitted));
            run.csv(fmt::format("ccdf_{}_{}_{}.csv", tag, scale, name), cc);
        } catch (const std::invalid_argument& e) {
            fits += fmt::format("{},{},{},{},{},{},NaN,NaN,0\n", name, scale, x.size(), format_number(nf.mean),
                                format_number(nf.variance), tag);
            skipped.push_back(fmt::format("{} {} {} tail: {}", name, scale, tag, e.what()));
        }
    }
}

int cmd_stylised(Run& run, const Common& c, const std::vector<std::string>& inputs, const std::vector<int>& widths,
                 std::size_t max_lag, std::size_t flow_lags, double pct, bool infer, const std::string& session) {
    const auto sess = parse_session(session);
    if (pct <= 0 || pct >= 100) throw UsageError("--percentile must be in (0, 100)");
    const auto w = parse_weighting(c.micro);
    auto series = load_series(inputs, run, w);
    run.set_out(fs::path(c.out));
    std::vector<std::string> fits(series.size());
    std::vector<json> skipped(series.size(), json::array());
    parallel_for(series.size(), c.jobs, [&](std::size_t i) {
        const auto& s = series[i];
        const auto quotes = taq::derive_quotes(s.l1, w);
        std::vector<std::pair<std::string, std::vector<double>>> scales;
        auto values = [](const taq::ReturnSeries& r) {
            std::vector<double> v;
            v.reserve(r.size());
            for (const auto& p : r) v.push_back(p.r);
            return v;
        };
        scales.emplace_back("tick", values(taq::tick_returns(quotes)));
        for (int width : widths) scales.emplace_back(fmt::format("bar{}m", width), values(taq::bar_returns(taq::ohlc(quotes, width, sess))));
        for (const auto& [scale, x] : scales) {
            if (x.size() > max_lag) {
                try {
                    run.csv(fmt::format("acf_{}_{}.csv", scale, s.name), facts::acf_csv(facts::acf(x, max_lag)));
                } catch (const facts::DegenerateSeries& e) {
                    skipped[i].push_back(fmt::format("{} {} acf: {}", s.name, scale, e.what()));
                }
            } else {
                skipped[i].push_back(fmt::format("{} {} acf: {} returns for {} lags", s.name, scale, x.size(), max_lag));
            }
            write_distribution(run, scale, s.name, x, pct, fits[i], skipped[i]);
        }
        std::vector<int> flow;
        const auto inferred = trade_signs(s.l1, infer);
        const auto scan = taq::scan_trades(s.l1);
        for (std::size_t k = 0; k < scan.trades.size(); ++k) {
            const auto sign = infer ? inferred[k] : scan.trades[k].sign;
            if (sign) flow.push_back(as_int(*sign));
        }
        const std::size_t lags = std::min(flow_lags, flow.empty() ? 0 : flow.size() - 1);
        if (lags == 0) {
            skipped[i].push_back(fmt::format("{} order flow: {} signed trades", s.name, flow.size()));
            return;
        }
        try {
            run.csv(fmt::format("orderflow_acf_{}.csv", s.name), facts::acf_csv(facts::orderflow_acf(flow, lags)));
        } catch (const facts::DegenerateSeries& e) {
            skipped[i].push_back(fmt::format("{} order flow: {}", s.name, e.what()));
        }
    });
    std::string all = "Security,Scale,N,Mean,Variance,Tail,XMin,Alpha,NTail\n";
    json sk = json::array();
    for (std::size_t i = 0; i < series.size(); ++i) {
        all += fits[i];
        for (auto& x : skipped[i]) sk.push_back(x);
    }
    run.csv("fits.csv", all);
    run.note("skipped", sk);
    run.finish();
    return 0;
}

int cmd_seasonality(Run& run, const Common& c, const std::vector<std::string>& inputs, int bucket,
                    const std::string& session) {
    const auto sess = parse_session(session);
    if (bucket <= 0) throw UsageError("--bucket must be positive");
    auto series = load_series(inputs, run, parse_weighting(c.micro));
    std::vector<std::vector<L1Record>> streams;
    for (auto& s : series) streams.push_back(std::move(s.l1));
    std::vector<facts::SeasonalityCurve> curves;
    for (auto k : {facts::SeasonKind::Volume, facts::SeasonKind::AbsReturn, facts::SeasonKind::Spread})
        curves.push_back(facts::seasonality(streams, k, sess, bucket));
    run.set_out(fs::path(c.out));
    run.csv("seasonality.csv", facts::seasonality_csv(curves, sess));
    json skipped = json::object();
    for (const auto& cv : curves) {
        std::string d = "Day,Bucket,Share\n";
        for (std::size_t i = 0; i < cv.days.size(); ++i)
            for (std::size_t b = 0; b < cv.daily[i].size(); ++b)
                d += fmt::format("{},{},{}\n", format_iso(cv.days[i] * kNanosPerDay, 0).substr(0, 10), b,
                                 format_number(cv.daily[i][b]));
        run.csv(fmt::format("seasonality_daily_{}.csv", facts::to_string(cv.kind)), d);
        skipped[std::string(facts::to_string(cv.kind))] = {{"days", cv.days.size()}, {"days_skipped", cv.days_skipped}};
    }
    run.note("days", skipped);
    run.finish();
    return 0;
}

int cmd_impact(Run& run, const Common& c, const std::vector<std::string>& inputs, const std::string& side,
               std::size_t nboot, std::uint64_t seed, bool infer) {
    auto series = load_series(inputs, run, parse_weighting(c.micro));
    run.seed(seed);
    run.set_out(fs::path(c.out));
    const auto bins = impact::impact_bins();
    impact::BootstrapOptions boot{nboot, 0.95, seed, c.jobs};
    std::string fits = "Security,Side,Alpha,Lambda,BinsUsed,BinsExcluded\n";
    json report = json::object();
    for (const auto& s : series) {
        const auto scan = taq::scan_trades(s.l1);
        const auto signs = trade_signs(s.l1, infer);
        std::vector<impact::NormalizedTrade> trades;
        try {
            trades = impact::normalized_trades(scan.trades, signs);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(fmt::format("{}: {}", s.path, e.what()));
        }
        for (auto sd : sides_of(side)) {
            const auto curve = impact::impact_curve(trades, sd, bins);
            std::vector<std::optional<impact::Interval>> env;
            if (nboot > 0) env = impact::bootstrap_envelope(trades, sd, bins, boot);
            run.csv(fmt::format("impact_{}_{}.csv", side_tag(sd), s.name), impact::curve_csv(curve, bins, env));
            try {
                const auto f = impact::fit_liquidity_exponent(curve);
                fits += fmt::format("{},{},{},{},{},{}\n", s.name, side_tag(sd), format_number(f.alpha),
                                    format_number(f.lambda), f.bins_used, f.bins_excluded);
            } catch (const std::exception&) {
                fits += fmt::format("{},{},NaN,NaN,0,0\n", s.name, side_tag(sd));
            }
        }
        report[s.name] = {{"trades", scan.trades.size()},
                          {"used", trades.size()},
                          {"skipped_broken", scan.skipped_broken},
                          {"skipped_no_mid", scan.skipped_no_mid}};
    }
    run.csv("liquidity_fit.csv", fits);
    run.note("impact", report);
    run.finish();
    return 0;
}

int cmd_master(Run& run, const Common& c, const std::vector<std::string>& inputs, const std::string& side,
               std::size_t nboot, std::uint64_t seed, bool infer) {
    if (side == "both") throw UsageError("--side must be bi or si");
    auto series = load_series(inputs, run, parse_weighting(c.micro));
    run.seed(seed);
    run.set_out(fs::path(c.out));
    const TradeSign sd = sides_of(side).front();
    const auto bins = impact::calibration_bins();
    std::vector<impact::SecurityTrades> secs;
    std::vector<impact::SecurityCurve> curves;
    for (const auto& s : series) {
        const auto scan = taq::scan_trades(s.l1);
        const auto signs = trade_signs(s.l1, infer);
        impact::SecurityTrades st;
        st.name = s.name;
        st.C = impact::average_daily_value(scan.trades);
        try {
            st.trades = impact::normalized_trades(scan.trades, signs);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(fmt::format("{}: {}", s.path, e.what()));
        }
        const auto curve = impact::impact_curve(st.trades, sd, bins);
        run.csv(fmt::format("curve_{}_{}.csv", side, s.name), impact::curve_csv(curve, bins));
        curves.push_back(impact::security_curve(s.name, st.C, curve));
        secs.push_back(std::move(st));
    }
    const auto fit = impact::calibrate_master(curves, bins);
    const auto js = impact::master_json(fit, side);
    run.raw(fmt::format("master_{}.json", side), js + "\n");
    if (!fit.degenerate) {
        std::string rescaled = "Security,C,Bin,Omega,Dp,X,Y\n";
        for (const auto& cv : curves)
            for (const auto& p : cv.points) {
                const auto k = bins.index(p.omega);
                rescaled += fmt::format("{},{},{},{},{},{},{}\n", cv.name, format_number(cv.C),
                                        k ? std::to_string(*k + 1) : "NaN", format_number(p.omega), format_number(p.dp),
                                        format_number(p.omega / std::pow(cv.C, *fit.delta)),
                                        format_number(p.dp * std::pow(cv.C, *fit.gamma)));
            }
        run.csv(fmt::format("rescaled_{}.csv", side), rescaled);
        impact::BootstrapOptions boot{nboot, 0.95, seed, c.jobs};
        const auto mc = impact::master_curve(secs, sd, *fit.delta, *fit.gamma, bins, boot);
        run.csv(fmt::format("master_curve_{}.csv", side), impact::master_curve_csv(mc, bins));
    } else {
        std::cerr << "master: degenerate: " << fit.reason << "\n";
    }
    run.note("degenerate", fit.degenerate);
    run.finish();
    std::cout << js << "\n";
    return 0;
}

int cmd_costs(Run& run, const Common& c, const std::vector<std::string>& inputs,
              const std::optional<std::string>& fees_path, const std::string& exchange, const std::string& side,
              bool passive, bool infer) {
    std::vector<cost::FeeSchedule> schedules{cost::jse_schedule(), cost::a2x_schedule()};
    std::optional<std::string> fp = fees_path;
    if (!fp) {
        if (auto d = config_dir(); d && fs::exists(fs::path(*d) / "fees.json")) fp = (fs::path(*d) / "fees.json").string();
    }
    if (fp) {
        require_exists({*fp});
        std::uint32_t crc = 0;
        const auto text = slurp(*fp, crc);
        run.config(*fp, crc);
        try {
            schedules = cost::parse_fee_config(text);
        } catch (const std::exception& e) {
            throw UsageError(fmt::format("{}: {}", *fp, e.what()));
        }
    }
    auto series = load_series(inputs, run, parse_weighting(c.micro), exchange);
    for (const auto& s : series) {
        try {
            (void)cost::find_schedule(schedules, s.exchange);
        } catch (const std::exception& e) {
            throw UsageError(e.what());
        }
    }
    run.set_out(fs::path(c.out));
    const auto bins = impact::calibration_bins();
    const auto role = passive ? cost::FeeRole::Passive : cost::FeeRole::Aggressor;
    std::vector<cost::ExchangeCosts> exchanges;
    json report = json::object();
    for (const auto& s : series) {
        const auto& sched = cost::find_schedule(schedules, s.exchange);
        const auto scan = taq::scan_trades(s.l1);
        const auto signs = trade_signs(s.l1, infer);
        cost::CostStats st;
        std::vector<cost::CostBreakdown> costs;
        try {
            costs = cost::security_costs(scan.trades, signs, sched, role, st);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(fmt::format("{}: {}", s.path, e.what()));
        }
        std::vector<cost::CostCurve> curves;
        for (auto sd : sides_of(side)) curves.push_back(cost::cost_curve(costs, sd, bins));
        run.csv(fmt::format("costs_{}_{}.csv", s.exchange, s.name), cost::cost_curve_csv(curves, bins));
        auto it = std::find_if(exchanges.begin(), exchanges.end(), [&](const auto& e) { return e.exchange == s.exchange; });
        if (it == exchanges.end()) it = exchanges.insert(exchanges.end(), cost::ExchangeCosts{s.exchange, {}});
        it->securities.push_back(std::move(costs));
        report[s.exchange + ":" + s.name] = {{"trades", st.trades},         {"kept", st.kept},
                                             {"no_side", st.no_side},       {"broken_book", st.broken_book},
                                             {"undefined_log", st.undefined_log}, {"crossed", st.crossed}};
    }
    const auto table = cost::variability_table(exchanges, bins);
    run.csv("variability.csv", cost::variability_csv(table));
    run.note("costs", report);
    run.note("variability_excluded_groups", table.excluded);
    run.finish();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Order book reconstruction and market microstructure analytics"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(kVersion));
    Common common;
    app.add_option("-j,--jobs", common.jobs, "Parallel jobs across securities")->check(CLI::Range(1u, 1024u));

    auto add_out = [&](CLI::App* sub) { sub->add_option("--out", common.out, "Output directory")->capture_default_str(); };
    auto add_micro = [&](CLI::App* sub) {
        sub->add_option("--micro", common.micro, "Microprice weighting")
            ->check(CLI::IsMember({"volume", "imbalance"}))
            ->capture_default_str();
    };

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a synthetic feed in wire format");
    std::optional<std::uint64_t> g_seed;
    std::optional<std::string> g_scenario, g_truth;
    std::string g_output = "-";
    bool g_shallow = false;
    std::map<std::string, double> g_over;
    std::map<std::string, std::optional<double>> g_raw{{"securities", {}},    {"days", {}},          {"messages", {}},
                                                      {"break-rate", {}},    {"persistence", {}},   {"heartbeat-every", {}},
                                                      {"impact-alpha", {}},  {"impact-lambda", {}}, {"impact-noise", {}}};
    gen->add_option("--seed", g_seed, "Random seed");
    gen->add_option("--scenario", g_scenario, "Scenario JSON file");
    gen->add_option("-o,--output", g_output, "Wire output file ('-' for stdout)");
    gen->add_option("--truth", g_truth, "Directory for ground-truth outputs");
    gen->add_flag("--shallow", g_shallow, "Shallow books");
    for (auto& [k, v] : g_raw) gen->add_option("--" + k, v);

    // parse
    auto* parse = app.add_subcommand("parse", "Decode a wire feed into the message table");
    std::string p_in = "-";
    bool p_strict = false;
    std::optional<std::string> p_dump, p_out;
    parse->add_option("input", p_in, "Wire file, gzip accepted ('-' for stdin)");
    parse->add_flag("--strict", p_strict, "Fail on the first malformed record");
    parse->add_option("--dump-messages", p_dump, "Write the message table to this file instead of stdout");
    parse->add_option("--out", p_out, "Directory for the manifest");

    // build-lob
    auto* build = app.add_subcommand("build-lob", "Replay messages into per-security L1 and depth");
    std::string b_in = "-";
    bool b_strict = false, b_depth = false;
    std::optional<bool> b_pass;
    build->add_option("input", b_in, "Wire file or message table ('-' for stdin)");
    build->add_flag("--strict", b_strict, "Fail on book anomalies");
    build->add_flag("--depth", b_depth, "Write full-depth snapshots");
    build->add_flag("--passthrough,!--no-passthrough", b_pass, "Echo the message table on stdout");
    add_out(build);
    add_micro(build);

    // verify
    auto* verify = app.add_subcommand("verify", "Compare the engine against the brute-force oracle");
    std::string v_in = "-";
    std::size_t v_suite = 0, v_messages = 10000;
    std::uint64_t v_seed = 1;
    std::optional<std::string> v_out;
    verify->add_option("input", v_in, "Wire file or message table ('-' for stdin)");
    verify->add_option("--suite", v_suite, "Generate and check this many streams instead of reading input");
    verify->add_option("--seed", v_seed, "First seed of the suite")->capture_default_str();
    verify->add_option("--messages", v_messages, "Messages per suite stream")->capture_default_str();
    verify->add_option("--out", v_out, "Directory for the report and manifest");

    // ingest-vendor
    auto* ingest = app.add_subcommand("ingest-vendor", "Clean vendor TAQ files into L1");
    std::vector<std::string> i_in;
    std::vector<std::string> i_keep{"AT"};
    std::string i_session = "09:00-16:50", i_units = "zac";
    double i_offset = 2.0;
    bool i_strict = false;
    std::optional<std::string> i_name;
    ingest->add_option("inputs", i_in, "Vendor CSV files")->required();
    ingest->add_option("--condcodes-keep", i_keep, "Trade condition codes to keep")->delimiter(',')->capture_default_str();
    ingest->add_option("--session", i_session, "Continuous session HH:MM-HH:MM")->capture_default_str();
    ingest->add_option("--units", i_units, "Price units of the file")->check(CLI::IsMember({"zac", "rand"}))->capture_default_str();
    ingest->add_option("--vendor-utc-offset", i_offset, "Hours the file clock is ahead of UTC")->capture_default_str();
    ingest->add_flag("--strict", i_strict, "Fail on malformed rows");
    ingest->add_option("--name", i_name, "Security name for a single input");
    add_out(ingest);
    add_micro(ingest);

    std::string session = "09:00-16:50";
    std::vector<std::string> l1_in;
    auto add_inputs = [&](CLI::App* sub) { sub->add_option("inputs", l1_in, "L1 CSV files")->required(); };

    auto* taq_cmd = app.add_subcommand("taq", "Quote series, returns, bars, inter-arrivals and impacts");
    std::vector<int> t_widths{1, 10, 20};
    add_inputs(taq_cmd);
    taq_cmd->add_option("--bar-width", t_widths, "Bar widths in minutes")->delimiter(',')->capture_default_str();
    taq_cmd->add_option("--session", session, "Session HH:MM-HH:MM")->capture_default_str();
    add_out(taq_cmd);
    add_micro(taq_cmd);

    auto* cls = app.add_subcommand("classify-eval", "Accuracy of trade classification rules");
    add_inputs(cls);
    add_out(cls);
    add_micro(cls);

    auto* sty = app.add_subcommand("stylised", "Return distributions, ACFs and order-flow persistence");
    std::vector<int> s_widths{1, 10, 20};
    std::size_t s_lags = 100, s_flow = 1000;
    double s_pct = 95;
    bool s_infer = false;
    add_inputs(sty);
    sty->add_option("--bar-width", s_widths, "Bar widths in minutes")->delimiter(',')->capture_default_str();
    sty->add_option("--max-lag", s_lags, "Return ACF lags")->capture_default_str();
    sty->add_option("--flow-lags", s_flow, "Order-flow ACF lags")->capture_default_str();
    sty->add_option("--percentile", s_pct, "Tail cutoff percentile")->capture_default_str();
    sty->add_flag("--infer-signs", s_infer, "Use Lee-Ready signs for order flow");
    sty->add_option("--session", session, "Session HH:MM-HH:MM")->capture_default_str();
    add_out(sty);
    add_micro(sty);

    auto* sea = app.add_subcommand("seasonality", "Intraday volume, |return| and spread profiles");
    int se_bucket = 10;
    add_inputs(sea);
    sea->add_option("--bucket", se_bucket, "Bucket minutes")->capture_default_str();
    sea->add_option("--session", session, "Session HH:MM-HH:MM")->capture_default_str();
    add_out(sea);
    add_micro(sea);

    std::size_t nboot = 1000;
    std::uint64_t seed = 1;
    bool infer = false;
    std::string side = "both";
    auto add_boot = [&](CLI::App* sub) {
        sub->add_option("--nboot", nboot, "Bootstrap resamples")->capture_default_str();
        sub->add_option("--seed", seed, "Bootstrap seed")->capture_default_str();
        sub->add_flag("--infer-signs", infer, "Use Lee-Ready signs instead of recorded ones");
    };

    auto* imp = app.add_subcommand("impact", "Impact curves with bootstrap envelopes");
    add_inputs(imp);
    imp->add_option("--side", side, "bi, si or both")->check(CLI::IsMember({"bi", "si", "both"}))->capture_default_str();
    add_boot(imp);
    add_out(imp);
    add_micro(imp);

    auto* mas = app.add_subcommand("master", "Master-curve calibration");
    std::string m_side = "bi";
    add_inputs(mas);
    mas->add_option("--side", m_side, "bi or si")->check(CLI::IsMember({"bi", "si"}))->capture_default_str();
    add_boot(mas);
    add_out(mas);
    add_micro(mas);

    auto* cst = app.add_subcommand("costs", "Total cost of trading and its variability");
    std::optional<std::string> c_fees;
    std::string c_exch = "JSE";
    bool c_passive = false;
    add_inputs(cst);
    cst->add_option("--fees", c_fees, "Fee schedule JSON (default $MX_CONFIG_DIR/fees.json or built-in)");
    cst->add_option("--exchange", c_exch, "Exchange for inputs without an EXCH: prefix")->capture_default_str();
    cst->add_option("--side", side, "bi, si or both")->check(CLI::IsMember({"bi", "si", "both"}))->capture_default_str();
    cst->add_flag("--passive", c_passive, "Charge the passive transaction rate where defined");
    cst->add_flag("--infer-signs", infer, "Use Lee-Ready signs instead of recorded ones");
    add_out(cst);
    add_micro(cst);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    std::vector<std::string> args(argv + 1, argv + argc);
    Run run(sub->get_name(), args);
    try {
        if (sub == gen) {
            for (const auto& [k, v] : g_raw)
                if (v) g_over[k] = *v;
            return cmd_gen(run, g_scenario, g_over, g_seed, g_shallow, g_output, g_truth);
        }
        if (sub == parse) return cmd_parse(run, p_in, p_strict, p_dump, p_out);
        if (sub == build) return cmd_build_lob(run, common, b_in, b_strict, b_depth, b_pass);
        if (sub == verify) return cmd_verify(run, common, v_in, v_suite, v_seed, v_messages, v_out);
        if (sub == ingest)
            return cmd_ingest_vendor(run, common, i_in, i_keep, i_session, i_units, i_offset, i_strict, i_name);
        if (sub == taq_cmd) return cmd_taq(run, common, l1_in, t_widths, session);
        if (sub == cls) return cmd_classify(run, common, l1_in);
        if (sub == sty) return cmd_stylised(run, common, l1_in, s_widths, s_lags, s_flow, s_pct, s_infer, session);
        if (sub == sea) return cmd_seasonality(run, common, l1_in, se_bucket, session);
        if (sub == imp) return cmd_impact(run, common, l1_in, side, nboot, seed, infer);
        if (sub == mas) return cmd_master(run, common, l1_in, m_side, nboot, seed, infer);
        if (sub == cst) return cmd_costs(run, common, l1_in, c_fees, c_exch, side, c_passive, infer);
    } catch (const UsageError& e) {
        std::cerr << "mx " << sub->get_name() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "mx " << sub->get_name() << ": " << e.what() << "\n";
        return 1;
    }
    return 2;
}
