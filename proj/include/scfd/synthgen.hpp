/**
 * @file synthgen.hpp
 * @brief Seeded generator of camera-application traces and attack variants.
 *
 * One execution of the modelled application:
 *
 *   prologue   read x ceil(raw/camera_chunk), futex, rt_sigreturn, brk
 *   file write stat, open, fstat, mmap, write x L, close, munmap, write
 *   ftp        socket, connect, read, [read], write, read, write, [read],
 *              stat, socket, connect, stat, open, fstat, mmap,
 *              (read, write) x R, close, read, write, close, close, munmap, write
 *   http log   write, brk, stat, socket, connect, write, sendto, close, write
 *   tail       stat, open, close, futex   (heartbeat file touch)
 *
 * with L = ceil(jpeg/write_chunk) and R = ceil(jpeg/read_chunk). The FTP stage
 * runs with probability 1 - ftp_skip_prob. The bracketed control-channel
 * reads model server replies split across two reads or coalesced into one:
 * the reply read count is -1, 0 or +1 from nominal with reply_probs.
 *
 * JPEG sizes come from a scene model. A scene class is drawn from scene_probs
 * and the encoder target for that scene depends on whether the frame will be
 * uploaded (upload_sizes) or only stored (local_sizes). The size is the target
 * plus uniform jitter of +-size_jitter bytes and is clamped to
 * [jpeg_min, jpeg_max]. Stored frames are also shifted by +-excursion_bytes
 * with probability excursion_prob; uploaded frames hit their target.
 *
 * With the defaults a stored frame makes 91 reads and 16-27 writes; an
 * uploaded one 106-115 reads and 32-46 writes.
 *
 * Attacks:
 *   HttpLeak     the HTTP stage runs twice.
 *   FtpLeak      one extra FTP session with the same image. The attack also
 *                forces the upload decision, so the frame uses the upload
 *                encoder target. On Flow 2 the result is indistinguishable
 *                from a normal Flow 1 execution.
 *   DataCorrupt  jpeg size forced to corrupt_jpeg_bytes; no extra calls.
 *   Shellcode    after the file write: execve, brk, open, mmap, access,
 *                getuid, read, close, and no end marker.
 */
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scfd/trace_model.hpp"

namespace scfd {

/**
 * SplitMix64.
 *   state update: s <- s + 0x9E3779B97F4A7C15 (mod 2^64)
 *   output:       z = s; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
 *                 z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31)
 * Trace i of a corpus with seed S uses a fresh generator whose initial state
 * is the (i+1)-th output of a generator started at S.
 */
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    explicit SplitMix64(std::uint64_t seed) : s_(seed) {}
    static std::uint64_t mix(std::uint64_t z);
    static SplitMix64 substream(std::uint64_t seed, std::uint64_t index);

    std::uint64_t next();
    /// 53-bit uniform in [0, 1).
    double uniform();
    /// Uniform integer in [lo, hi] by rejection; no modulo bias.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    /// Index drawn from nonnegative weights summing to about 1.
    std::size_t categorical(const double* w, std::size_t n);

private:
    std::uint64_t s_;
};

enum class AttackKind { None, HttpLeak, FtpLeak, DataCorrupt, Shellcode };

const char* attack_name(AttackKind a);
std::optional<AttackKind> parse_attack(const std::string& s);

struct WorkloadSpec {
    std::uint64_t seed = 1;
    std::int64_t raw_image_bytes = 2600000;
    std::int64_t jpeg_min = 27000;
    std::int64_t jpeg_max = 97000;
    double ftp_skip_prob = 0.5;
    std::int64_t write_chunk = 4096;
    std::int64_t read_chunk = 4096;

    std::int64_t camera_chunk = 28672;
    std::array<double, 3> scene_probs{0.49, 0.34, 0.17};
    std::array<std::int64_t, 3> local_sizes{51200, 67584, 88064};
    std::array<std::int64_t, 3> upload_sizes{51200, 71680, 71680};
    std::int64_t size_jitter = 1500;
    double excursion_prob = 0.015;
    std::int64_t excursion_bytes = 4096;
    std::array<double, 3> reply_probs{0.18, 0.64, 0.18};
    std::int64_t corrupt_jpeg_bytes = 15000;

    bool timestamps = true;
    double frame_period = 0.5;    ///< seconds between executions
    double call_spacing = 1e-4;   ///< seconds between consecutive events

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

/// 1 = upload (FTP) flow, 2 = skip flow.
using FlowChoice = std::optional<int>;

ExecutionTrace gen_trace(const WorkloadSpec& spec, AttackKind attack, std::uint64_t index, FlowChoice flow = {});
std::vector<ExecutionTrace> gen_corpus(const WorkloadSpec& spec, std::size_t n, AttackKind attack,
                                       FlowChoice flow = {});

/// Flow recorded in a generated trace's source_id, or 0 if absent.
int flow_of(const ExecutionTrace& t);

}  // namespace scfd
