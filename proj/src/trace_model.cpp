#include "scfd/trace_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace scfd {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::MalformedLine: return "MalformedLine";
        case Errc::UnbalancedRegion: return "UnbalancedRegion";
        case Errc::UnknownSyscall: return "UnknownSyscall";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::InsufficientData: return "InsufficientData";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::SingularCovariance: return "SingularCovariance";
        case Errc::OutOfRange: return "OutOfRange";
        case Errc::Io: return "Io";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::CorruptProfile: return "CorruptProfile";
        case Errc::EmptyCorpus: return "EmptyCorpus";
    }
    return "Unknown";
}

SyscallAlphabet::SyscallAlphabet(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i].empty()) throw std::invalid_argument("empty syscall name");
        if (!index_.emplace(names_[i], i).second)
            throw std::invalid_argument("duplicate syscall name: " + names_[i]);
    }
}

SyscallAlphabet SyscallAlphabet::sorted(std::vector<std::string> names) {
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    return SyscallAlphabet(std::move(names));
}

std::optional<std::size_t> SyscallAlphabet::index(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> ExecutionTrace::calls() const {
    std::vector<std::string> out;
    out.reserve(events.size());
    for (const auto& e : events)
        if (e.kind == EventKind::Call) out.push_back(e.syscall_name);
    return out;
}

std::size_t ExecutionTrace::call_count() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const TraceEvent& e) { return e.kind == EventKind::Call; }));
}

bool ExecutionTrace::terminated() const {
    return !events.empty() && events.back().kind == EventKind::RegionEnd;
}

namespace {

struct Parsed {
    enum Kind { Skip, Call, Begin, End } kind = Skip;
    std::string name;
    std::optional<double> ts;
    std::string src;
};

class RegionAssembler {
public:
    explicit RegionAssembler(RegionPolicy p) : policy_(p) {}

    void feed(Parsed&& p, std::int64_t line) {
        switch (p.kind) {
            case Parsed::Skip: return;
            case Parsed::Call:
                if (open_) {
                    cur_.events.push_back(TraceEvent::call(std::move(p.name), p.ts));
                } else {
                    if (!stray_) {
                        stray_ = ExecutionTrace{};
                        stray_->out_of_region = true;
                        stray_->source_id = "out-of-region@" + std::to_string(line);
                    }
                    stray_->events.push_back(TraceEvent::call(std::move(p.name), p.ts));
                }
                return;
            case Parsed::Begin:
                if (open_) {
                    if (policy_ == RegionPolicy::Strict)
                        throw Error(Errc::UnbalancedRegion, "line " + std::to_string(line) + ": nested region begin", line);
                    close_current();
                }
                flush_stray();
                open_ = true;
                cur_ = ExecutionTrace{};
                cur_.source_id = p.src.empty() ? "region-" + std::to_string(regions_) : p.src;
                cur_.events.push_back(TraceEvent::begin(p.ts));
                return;
            case Parsed::End:
                if (!open_)
                    throw Error(Errc::UnbalancedRegion, "line " + std::to_string(line) + ": region end without begin", line);
                cur_.events.push_back(TraceEvent::end(p.ts));
                close_current();
                return;
        }
    }

    std::vector<ExecutionTrace> finish(std::int64_t last_line) {
        if (open_) {
            if (policy_ == RegionPolicy::Strict)
                throw Error(Errc::UnbalancedRegion, "line " + std::to_string(last_line) + ": input ends inside a region",
                            last_line);
            close_current();
        }
        flush_stray();
        return std::move(out_);
    }

private:
    void close_current() {
        out_.push_back(std::move(cur_));
        cur_ = ExecutionTrace{};
        open_ = false;
        ++regions_;
    }
    void flush_stray() {
        if (stray_) out_.push_back(std::move(*stray_));
        stray_.reset();
    }

    RegionPolicy policy_;
    bool open_ = false;
    std::size_t regions_ = 0;
    ExecutionTrace cur_;
    std::optional<ExecutionTrace> stray_;
    std::vector<ExecutionTrace> out_;
};

[[noreturn]] void malformed(std::int64_t line, const std::string& why) {
    throw Error(Errc::MalformedLine, "line " + std::to_string(line) + ": " + why, line);
}

Parsed parse_jsonl_line(const std::string& line, std::int64_t no) {
    Parsed p;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) return p;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        malformed(no, "invalid JSON");
    }
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) malformed(no, "missing kind");
    const auto kind = j["kind"].get<std::string>();
    if (j.contains("ts")) {
        if (!j["ts"].is_number() || j["ts"].get<double>() < 0) malformed(no, "ts must be a nonnegative number");
        p.ts = j["ts"].get<double>();
    }
    if (kind == "call") {
        if (!j.contains("name") || !j["name"].is_string() || j["name"].get<std::string>().empty())
            malformed(no, "call without name");
        p.kind = Parsed::Call;
        p.name = j["name"].get<std::string>();
    } else if (kind == "begin" || kind == "end") {
        if (j.contains("name")) malformed(no, "region marker with a name");
        p.kind = kind == "begin" ? Parsed::Begin : Parsed::End;
        if (kind == "begin" && j.contains("src")) {
            if (!j["src"].is_string()) malformed(no, "src must be a string");
            p.src = j["src"].get<std::string>();
        }
    } else {
        malformed(no, "unknown kind '" + kind + "'");
    }
    return p;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Accepts "HH:MM:SS[.frac]" or "secs.frac"; returns seconds.
std::optional<double> parse_strace_time(std::string_view tok) {
    if (tok.empty() || !std::isdigit(static_cast<unsigned char>(tok[0]))) return std::nullopt;
    if (tok.find(':') != std::string_view::npos) {
        int h = 0, m = 0;
        double s = 0;
        std::string t(tok);
        char c1 = 0, c2 = 0;
        std::istringstream is(t);
        if (is >> h >> c1 >> m >> c2 >> s && c1 == ':' && c2 == ':' && is.eof()) return h * 3600.0 + m * 60.0 + s;
        return std::nullopt;
    }
    if (tok.find('.') == std::string_view::npos) return std::nullopt;
    for (char c : tok)
        if (!std::isdigit(static_cast<unsigned char>(c)) && c != '.') return std::nullopt;
    return std::stod(std::string(tok));
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string_view next_token(std::string_view s) {
    auto sp = s.find_first_of(" \t");
    return sp == std::string_view::npos ? s : s.substr(0, sp);
}

Parsed parse_strace_line(const std::string& raw, std::int64_t no) {
    Parsed p;
    std::string_view s = trim(raw);
    if (s.empty()) return p;
    if (s == "#REGION BEGIN") { p.kind = Parsed::Begin; return p; }
    if (s == "#REGION END") { p.kind = Parsed::End; return p; }
    if (s.front() == '#') return p;

    if (s.rfind("[pid", 0) == 0) {
        auto close = s.find(']');
        if (close == std::string_view::npos) malformed(no, "unterminated pid prefix");
        s = trim(s.substr(close + 1));
    } else {
        auto tok = next_token(s);
        if (tok.size() < s.size() && std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); }))
            s = trim(s.substr(tok.size()));
    }
    if (auto tok = next_token(s); tok.size() < s.size()) {
        if (auto t = parse_strace_time(tok)) {
            p.ts = t;
            s = trim(s.substr(tok.size()));
        }
    }

    if (s.rfind("---", 0) == 0 || s.rfind("+++", 0) == 0) return p;

    if (s.rfind("<...", 0) == 0) {
        std::string_view rest = trim(s.substr(4));
        std::size_t i = 0;
        while (i < rest.size() && is_ident(rest[i])) ++i;
        if (i == 0 || rest.substr(i).find("resumed>") == std::string_view::npos)
            malformed(no, "bad resumed line");
        p.kind = Parsed::Call;
        p.name = std::string(rest.substr(0, i));
        return p;
    }

    if (!is_ident_start(s.front())) malformed(no, "expected syscall name");
    std::size_t i = 0;
    while (i < s.size() && is_ident(s[i])) ++i;
    if (i >= s.size() || s[i] != '(') malformed(no, "expected '(' after syscall name");
    if (s.find("<unfinished ...>") != std::string_view::npos) return p;

    auto eq = s.rfind(" = ");
    auto rparen = eq == std::string_view::npos ? eq : s.rfind(')', eq);
    if (rparen == std::string_view::npos || rparen < i || eq + 3 >= s.size())
        malformed(no, "expected 'name(args) = ret'");
    p.kind = Parsed::Call;
    p.name = std::string(s.substr(0, i));
    return p;
}

}  // namespace

std::vector<ExecutionTrace> parse_event_log(std::istream& in, LogFormat format, RegionPolicy policy) {
    RegionAssembler asmb(policy);
    std::string line;
    std::int64_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        asmb.feed(format == LogFormat::Jsonl ? parse_jsonl_line(line, no) : parse_strace_line(line, no), no);
    }
    if (in.bad()) throw Error(Errc::Io, "read failure");
    return asmb.finish(no);
}

std::vector<ExecutionTrace> parse_event_log_string(std::string_view text, LogFormat format, RegionPolicy policy) {
    std::istringstream is{std::string(text)};
    return parse_event_log(is, format, policy);
}

LogFormat guess_format(std::string_view path) {
    auto ends = [&](std::string_view suf) {
        return path.size() >= suf.size() && path.substr(path.size() - suf.size()) == suf;
    };
    return ends(".strace") || ends(".txt") ? LogFormat::StraceText : LogFormat::Jsonl;
}

std::vector<ExecutionTrace> read_event_log(const std::string& path, std::optional<LogFormat> format,
                                           RegionPolicy policy) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::Io, "cannot open " + path);
    return parse_event_log(f, format.value_or(guess_format(path)), policy);
}

void write_jsonl(std::ostream& out, const ExecutionTrace& trace) {
    for (const auto& e : trace.events) {
        nlohmann::ordered_json j;
        switch (e.kind) {
            case EventKind::Call:
                j["kind"] = "call";
                j["name"] = e.syscall_name;
                break;
            case EventKind::RegionBegin:
                j["kind"] = "begin";
                if (!trace.source_id.empty()) j["src"] = trace.source_id;
                break;
            case EventKind::RegionEnd:
                j["kind"] = "end";
                break;
        }
        if (e.timestamp) j["ts"] = *e.timestamp;
        out << j.dump() << '\n';
    }
}

void write_jsonl(std::ostream& out, const std::vector<ExecutionTrace>& traces) {
    for (const auto& t : traces) write_jsonl(out, t);
}

Scfd build_scfd(const ExecutionTrace& trace, const SyscallAlphabet& alphabet) {
    Scfd x{std::vector<std::int64_t>(alphabet.size(), 0)};
    for (const auto& e : trace.events) {
        if (e.kind != EventKind::Call) continue;
        auto idx = alphabet.index(e.syscall_name);
        if (!idx) throw Error(Errc::UnknownSyscall, "unknown syscall: " + e.syscall_name);
        ++x.counts[*idx];
    }
    return x;
}

Scfd build_scfd(const ExecutionTrace& trace, SyscallAlphabet& alphabet, OnUnknown on_unknown) {
    if (on_unknown == OnUnknown::Extend) {
        std::vector<std::string> names = alphabet.names();
        bool grew = false;
        for (const auto& e : trace.events)
            if (e.kind == EventKind::Call && !alphabet.index(e.syscall_name)) {
                names.push_back(e.syscall_name);
                grew = true;
            }
        if (grew) alphabet = SyscallAlphabet::sorted(std::move(names));
    }
    return build_scfd(trace, static_cast<const SyscallAlphabet&>(alphabet));
}

TrainingSet load_training_set(const std::vector<ExecutionTrace>& traces) {
    if (traces.empty()) throw Error(Errc::EmptyInput, "training input has no traces");
    std::set<std::string> names;
    for (const auto& t : traces)
        for (const auto& e : t.events)
            if (e.kind == EventKind::Call) names.insert(e.syscall_name);
    TrainingSet ts;
    ts.alphabet = SyscallAlphabet(std::vector<std::string>(names.begin(), names.end()));
    ts.rows.reserve(traces.size());
    for (const auto& t : traces) ts.rows.push_back(build_scfd(t, ts.alphabet));
    return ts;
}

}  // namespace scfd
