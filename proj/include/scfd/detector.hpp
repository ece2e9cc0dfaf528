/**
 * @file detector.hpp
 * @brief Learned profiles, their on-disk container, and the legitimacy test.
 *
 * A trace is checked by three rules in fixed order:
 *  - (i)   a syscall name absent from the profile alphabet;
 *  - (ii)  the summed count of the zero-variance syscalls differs from training;
 *  - (iii) the distance to the closest cluster exceeds the cutoff theta.
 * Calls recorded outside any execution region are rejected outright.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scfd/clustering.hpp"
#include "scfd/stats.hpp"
#include "scfd/trace_model.hpp"

namespace scfd {

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr std::uint32_t kProfileFormatVersion = 1;

struct ProfileMeta {
    std::string app_id;
    std::int64_t trained_at = 0;  ///< unix seconds; 0 under deterministic runs
    std::string tool_version = kToolVersion;
    GkmConfig gkm;
};

/// With D' = 0 the profile holds no clusters and rule (iii) always passes.
struct Profile {
    SyscallAlphabet alphabet;
    DimReduction reduction;
    std::vector<ClusterCentroid> clusters;
    Cutoff cutoff;
    ProfileMeta meta;
};

/// Profile plus the clustering it came from, for summaries.
struct TrainResult {
    Profile profile;
    ClusterSet clusters;
    Eigen::MatrixXd reduced;  ///< N x D'
};

TrainResult train_profile_detailed(const TrainingSet& ts, const GkmConfig& cfg, double p0,
                                   const std::string& app_id = "app", std::int64_t trained_at = 0);
Profile train_profile(const TrainingSet& ts, const GkmConfig& cfg, double p0);

enum class Rule { None, UnseenType, ZeroVarianceChanged, DistanceExceeded, OutOfRegion };

const char* rule_token(Rule r);

struct Verdict {
    bool malicious = false;
    Rule rule = Rule::None;
    std::string unseen_name;               ///< UnseenType
    std::int64_t residual_expected = 0;    ///< ZeroVarianceChanged
    std::int64_t residual_observed = 0;
    std::optional<std::size_t> closest_cluster;
    double distance = 0.0;
    double theta = 0.0;
    Eigen::VectorXd reduced;               ///< reduced observation, when rule (i) did not fire
};

struct ClassifyOptions {
    bool rule_unseen = true;    ///< rule (i)
    bool rule_residual = true;  ///< rule (ii)
};

/// Parses "i,ii" style lists of rules to switch off; throws std::invalid_argument.
ClassifyOptions disabled_rules(const std::string& list);

Verdict classify(const Profile& p, const ExecutionTrace& trace, const ClassifyOptions& opt = {},
                 OpCounter* ops = nullptr);
/// Classification from raw counts keyed by the profile alphabet (rule (i) already passed).
Verdict classify_counts(const Profile& p, const Scfd& x, const ClassifyOptions& opt = {}, OpCounter* ops = nullptr);

/**
 * Binary container, all integers and floats little-endian:
 *   "SCFDPROF" | u32 format version | payload | u32 CRC-32 of all preceding bytes.
 * Strings are u32 length + bytes; floats are raw IEEE-754 64-bit patterns.
 */
void save_profile(const Profile& p, const std::string& path);
Profile load_profile(const std::string& path);
std::string serialize_profile(const Profile& p);
Profile deserialize_profile(const std::string& bytes);

/// Lossy human-readable dump (6 significant digits).
std::string profile_to_text(const Profile& p);

/// First line: VERDICT=<LEGIT|MALICIOUS> rule=<...> dist=<...> theta=<...>
std::string explain(const Verdict& v, const Profile& p);

/// Per-coordinate terms d_i * (A d)_i of the quadratic form; they sum to distance^2.
std::vector<double> distance_contributions(const ClusterCentroid& c, const Eigen::VectorXd& x);

}  // namespace scfd
