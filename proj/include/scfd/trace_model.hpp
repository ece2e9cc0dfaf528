/**
 * @file trace_model.hpp
 * @brief Traces, execution regions and per-execution syscall frequency vectors.
 *
 * An ExecutionTrace is one monitored execution delimited by region markers.
 * Two input formats are understood: a Jsonl event stream and a subset of
 * strace text output.
 */
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scfd/error.hpp"

namespace scfd {

/**
 * @brief Ordered registry of syscall names; index(name) is a bijection onto 0..D-1.
 *
 * Immutable once built.
 */
class SyscallAlphabet {
public:
    SyscallAlphabet() = default;
    /// Keeps the given order. Throws std::invalid_argument on duplicates.
    explicit SyscallAlphabet(std::vector<std::string> names);
    /// Lexicographically sorted alphabet over a set of names.
    static SyscallAlphabet sorted(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> index(std::string_view name) const;

    bool operator==(const SyscallAlphabet& o) const { return names_ == o.names_; }

private:
    std::vector<std::string> names_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

enum class EventKind { Call, RegionBegin, RegionEnd };

struct TraceEvent {
    EventKind kind = EventKind::Call;
    std::string syscall_name;   ///< empty for markers
    std::optional<double> timestamp;

    static TraceEvent call(std::string name, std::optional<double> ts = std::nullopt) {
        return {EventKind::Call, std::move(name), ts};
    }
    static TraceEvent begin(std::optional<double> ts = std::nullopt) { return {EventKind::RegionBegin, {}, ts}; }
    static TraceEvent end(std::optional<double> ts = std::nullopt) { return {EventKind::RegionEnd, {}, ts}; }

    bool operator==(const TraceEvent&) const = default;
};

/**
 * @brief Events of exactly one execution region, markers included.
 *
 * A region cut short (Begin with no End) has terminated() == false.
 * Calls seen outside any region form a trace with out_of_region set and
 * no markers at all.
 */
struct ExecutionTrace {
    std::vector<TraceEvent> events;
    std::string source_id;
    bool out_of_region = false;

    std::vector<std::string> calls() const;
    std::size_t call_count() const;
    bool terminated() const;

    bool operator==(const ExecutionTrace&) const = default;
};

struct Scfd {
    std::vector<std::int64_t> counts;
    bool operator==(const Scfd&) const = default;
};

struct TrainingSet {
    SyscallAlphabet alphabet;
    std::vector<Scfd> rows;
};

enum class LogFormat { Jsonl, StraceText };

/// Strict rejects a nested Begin or end of input inside a region.
/// Watchdog closes the open region as unterminated in both cases, as a
/// monitor does when the end marker never arrives.
enum class RegionPolicy { Strict, Watchdog };

std::vector<ExecutionTrace> parse_event_log(std::istream& in, LogFormat format,
                                            RegionPolicy policy = RegionPolicy::Strict);
std::vector<ExecutionTrace> parse_event_log_string(std::string_view text, LogFormat format,
                                                   RegionPolicy policy = RegionPolicy::Strict);
/// Format defaults to StraceText for *.strace / *.txt paths and Jsonl otherwise.
std::vector<ExecutionTrace> read_event_log(const std::string& path, std::optional<LogFormat> format = std::nullopt,
                                           RegionPolicy policy = RegionPolicy::Strict);
LogFormat guess_format(std::string_view path);

/// One object per line. A Begin line carries the trace's source_id as "src".
void write_jsonl(std::ostream& out, const ExecutionTrace& trace);
void write_jsonl(std::ostream& out, const std::vector<ExecutionTrace>& traces);

enum class OnUnknown { Reject, Extend };

/// Throws UnknownSyscall for a name outside the alphabet.
Scfd build_scfd(const ExecutionTrace& trace, const SyscallAlphabet& alphabet);
/// Extend replaces `alphabet` by the sorted union with the trace's names
/// before counting; Reject behaves like the overload above.
Scfd build_scfd(const ExecutionTrace& trace, SyscallAlphabet& alphabet, OnUnknown on_unknown);

TrainingSet load_training_set(const std::vector<ExecutionTrace>& traces);

}  // namespace scfd
