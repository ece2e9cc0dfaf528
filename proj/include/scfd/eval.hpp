/**
 * @file eval.hpp
 * @brief Experiment protocol: detection rates, false positives, the
 *        sequence-model comparison and classification cost.
 */
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scfd/detector.hpp"
#include "scfd/pst.hpp"
#include "scfd/synthgen.hpp"

namespace scfd {

struct Corpus {
    std::string name;
    std::vector<ExecutionTrace> traces;
};

/// The five attack corpora used by the default evaluation:
/// httpleak, ftpleak-flow1, ftpleak-flow2, datacorrupt, shellcode.
std::vector<Corpus> standard_attack_corpora(const WorkloadSpec& base, std::size_t trials);

struct LogEntry {
    std::string section;  ///< "detection", "ablated", "fp@<p0>", "pst@<depth>"
    std::string corpus;
    std::size_t index = 0;
    std::string source_id;
    bool malicious = false;
    std::string rule;      ///< rule token, or "position=<i>" for the sequence model
    double distance = 0.0;
};

struct RuleHistogram {
    std::map<std::string, std::size_t> counts;  ///< rule token -> traces
};

struct DetectionRow {
    std::string corpus;
    std::size_t trials = 0;
    std::size_t detected = 0;
    double rate = 0.0;
    RuleHistogram rules;
};

struct FpRow {
    double p0 = 0.0;
    double theta = 0.0;
    std::size_t trials = 0;
    std::size_t flagged = 0;
    double rate = 0.0;
};

struct PstRow {
    std::string corpus;
    int depth = 0;
    std::size_t trials = 0;
    std::size_t detected = 0;
    double rate = 0.0;
};

struct CostRow {
    std::string label;
    std::size_t d_prime = 0;
    std::size_t k = 0;
    std::uint64_t madds = 0;           ///< per classify call
    std::uint64_t madds_long = 0;      ///< same SCFD dimension, 10x the syscalls
    double mean_latency_us = 0.0;
    double stdev_latency_us = 0.0;
};

struct EvalReport {
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<DetectionRow> detection;
    std::vector<DetectionRow> detection_ablated;  ///< rules (i) and (ii) off
    std::vector<FpRow> false_positive;
    bool fp_monotone = true;
    std::vector<int> pst_depths;
    std::vector<PstRow> pst;
    std::vector<CostRow> cost;
    std::vector<LogEntry> log;
};

std::vector<DetectionRow> run_detection_eval(const Profile& p, const std::vector<Corpus>& corpora,
                                             const ClassifyOptions& opt, std::vector<LogEntry>* log = nullptr,
                                             const std::string& section = "detection", int threads = 1);

/// Throws EmptyCorpus on no traces. fp_monotone reports FP(smaller p0) <= FP(larger p0).
std::vector<FpRow> run_false_positive_eval(const Profile& p, const std::vector<ExecutionTrace>& normals,
                                           const std::vector<double>& p0_list, bool* fp_monotone = nullptr,
                                           std::vector<LogEntry>* log = nullptr, int threads = 1);

std::vector<PstRow> run_pst_comparison(const std::vector<ExecutionTrace>& train, const std::vector<Corpus>& corpora,
                                       const std::vector<int>& depths, std::vector<LogEntry>* log = nullptr,
                                       double threshold = kPstThreshold);

/// Profile with D' variable coordinates and k clusters, for cost scaling.
Profile make_cost_profile(std::size_t d_prime, std::size_t k, std::uint64_t seed);

/// Op counts and latency for `p` and for synthetic profiles with
/// D' in {5, 10, 14} and the same k. Latency is left at zero when
/// `measure_latency` is false.
std::vector<CostRow> run_cost_eval(const Profile& p, std::size_t trials, bool measure_latency);

std::string report_to_json(const EvalReport& r);
/// Aligned plain-text tables.
std::string report_to_text(const EvalReport& r);

}  // namespace scfd
