#include "scfd/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace scfd {

std::uint64_t SplitMix64::mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

SplitMix64 SplitMix64::substream(std::uint64_t seed, std::uint64_t index) {
    return SplitMix64(mix(seed + (index + 1) * kGamma));
}

std::uint64_t SplitMix64::next() {
    s_ += kGamma;
    return mix(s_);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::int64_t SplitMix64::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t range = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next());  // full 64-bit range
    const std::uint64_t threshold = (0 - range) % range;  // 2^64 mod range
    std::uint64_t x;
    do x = next();
    while (x < threshold);
    return lo + static_cast<std::int64_t>(x % range);
}

std::size_t SplitMix64::categorical(const double* w, std::size_t n) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        acc += w[i];
        if (u < acc) return i;
    }
    return n - 1;
}

const char* attack_name(AttackKind a) {
    switch (a) {
        case AttackKind::None: return "none";
        case AttackKind::HttpLeak: return "httpleak";
        case AttackKind::FtpLeak: return "ftpleak";
        case AttackKind::DataCorrupt: return "datacorrupt";
        case AttackKind::Shellcode: return "shellcode";
    }
    return "none";
}

std::optional<AttackKind> parse_attack(const std::string& s) {
    for (auto a : {AttackKind::None, AttackKind::HttpLeak, AttackKind::FtpLeak, AttackKind::DataCorrupt,
                   AttackKind::Shellcode})
        if (s == attack_name(a)) return a;
    return std::nullopt;
}

void WorkloadSpec::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    auto dist = [&](const std::array<double, 3>& w) {
        double s = 0;
        for (double x : w) {
            if (!prob(x)) return false;
            s += x;
        }
        return std::abs(s - 1.0) < 1e-9;
    };
    if (jpeg_min > jpeg_max) throw std::invalid_argument("jpeg_min > jpeg_max");
    if (jpeg_min < 0 || raw_image_bytes < 0) throw std::invalid_argument("negative byte count");
    if (write_chunk <= 0 || read_chunk <= 0 || camera_chunk <= 0) throw std::invalid_argument("chunk sizes must be positive");
    if (!prob(ftp_skip_prob) || !prob(excursion_prob)) throw std::invalid_argument("probability outside [0,1]");
    if (!dist(scene_probs) || !dist(reply_probs)) throw std::invalid_argument("weights must form a distribution");
    if (size_jitter < 0 || excursion_bytes < 0) throw std::invalid_argument("negative jitter");
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return a <= 0 ? 0 : (a + b - 1) / b; }

struct Builder {
    ExecutionTrace t;
    double ts;
    double step;
    bool stamp;

    void put(TraceEvent e) {
        if (stamp) e.timestamp = ts;
        ts += step;
        t.events.push_back(std::move(e));
    }
    void call(const char* name, std::int64_t times = 1) {
        for (std::int64_t i = 0; i < times; ++i) put(TraceEvent::call(name));
    }
    void calls(std::initializer_list<const char*> names) {
        for (auto n : names) call(n);
    }
};

void ftp_stage(Builder& b, const WorkloadSpec& s, std::int64_t jpeg, int reply_delta) {
    b.calls({"socket", "connect", "read"});
    if (reply_delta > 0) b.call("read");
    b.calls({"write", "read", "write"});
    if (reply_delta >= 0) b.call("read");
    b.calls({"stat", "socket", "connect", "stat", "open", "fstat", "mmap"});
    for (std::int64_t i = 0, R = ceil_div(jpeg, s.read_chunk); i < R; ++i) b.calls({"read", "write"});
    b.calls({"close", "read", "write", "close", "close", "munmap", "write"});
}

void http_stage(Builder& b) { b.calls({"write", "brk", "stat", "socket", "connect", "write", "sendto", "close", "write"}); }

}  // namespace

ExecutionTrace gen_trace(const WorkloadSpec& s, AttackKind attack, std::uint64_t index, FlowChoice flow) {
    auto rng = SplitMix64::substream(s.seed, index);
    // Every draw happens on every trace so forced flows and attacks keep the
    // remaining draws aligned with the normal corpus.
    const double u_flow = rng.uniform();
    const std::size_t scene = rng.categorical(s.scene_probs.data(), 3);
    const std::int64_t jitter = rng.uniform_int(-s.size_jitter, s.size_jitter);
    const double u_exc = rng.uniform();
    const double u_sign = rng.uniform();
    const int reply1 = static_cast<int>(rng.categorical(s.reply_probs.data(), 3)) - 1;
    const int reply2 = static_cast<int>(rng.categorical(s.reply_probs.data(), 3)) - 1;

    const bool ftp = flow ? *flow == 1 : u_flow >= s.ftp_skip_prob;
    const bool uploads = ftp || attack == AttackKind::FtpLeak;
    std::int64_t jpeg = (uploads ? s.upload_sizes : s.local_sizes)[scene] + jitter;
    if (!uploads && u_exc < s.excursion_prob) jpeg += u_sign < 0.5 ? s.excursion_bytes : -s.excursion_bytes;
    jpeg = std::clamp(jpeg, s.jpeg_min, s.jpeg_max);
    if (attack == AttackKind::DataCorrupt) jpeg = s.corrupt_jpeg_bytes;

    Builder b{{}, static_cast<double>(index) * s.frame_period, s.call_spacing, s.timestamps};
    char id[96];
    std::snprintf(id, sizeof id, "%s/%06llu/flow%d", attack_name(attack), static_cast<unsigned long long>(index),
                  ftp ? 1 : 2);
    b.t.source_id = id;

    b.put(TraceEvent::begin());
    b.call("read", ceil_div(s.raw_image_bytes, s.camera_chunk));
    b.calls({"futex", "rt_sigreturn", "brk"});
    b.calls({"stat", "open", "fstat", "mmap"});
    b.call("write", ceil_div(jpeg, s.write_chunk));
    b.calls({"close", "munmap", "write"});

    if (attack == AttackKind::Shellcode) {
        b.calls({"execve", "brk", "open", "mmap", "access", "getuid", "read", "close"});
        return std::move(b.t);
    }
    if (ftp) ftp_stage(b, s, jpeg, reply1);
    if (attack == AttackKind::FtpLeak) ftp_stage(b, s, jpeg, ftp ? reply2 : reply1);
    http_stage(b);
    if (attack == AttackKind::HttpLeak) http_stage(b);
    b.calls({"stat", "open", "close", "futex"});
    b.put(TraceEvent::end());
    return std::move(b.t);
}

std::vector<ExecutionTrace> gen_corpus(const WorkloadSpec& spec, std::size_t n, AttackKind attack, FlowChoice flow) {
    spec.validate();
    std::vector<ExecutionTrace> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(gen_trace(spec, attack, i, flow));
    return out;
}

int flow_of(const ExecutionTrace& t) {
    const auto pos = t.source_id.rfind("/flow");
    if (pos == std::string::npos || pos + 5 >= t.source_id.size()) return 0;
    const char c = t.source_id[pos + 5];
    return c == '1' ? 1 : c == '2' ? 2 : 0;
}

}  // namespace scfd
