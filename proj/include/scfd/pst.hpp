#pragma once
// Probabilistic suffix tree over syscall sequences. A node at depth l holds
// the next-symbol counts observed after one length-l context; its children
// extend that context one symbol further into the past.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scfd/trace_model.hpp"

namespace scfd {

struct PstNode {
    std::vector<std::uint64_t> next;  // indexed by symbol id
    std::uint64_t total = 0;
    std::vector<std::unique_ptr<PstNode>> children;  // indexed by symbol id, null when absent
};

class PstModel {
public:
    PstModel(SyscallAlphabet alphabet, int max_depth);

    const SyscallAlphabet& alphabet() const { return alphabet_; }
    int max_depth() const { return max_depth_; }
    const PstNode& root() const { return *root_; }
    PstNode& root() { return *root_; }

    /// Node for a context given oldest-first, or null if not resident.
    const PstNode* find(const std::vector<std::string>& context) const;
    std::size_t node_count() const;

private:
    SyscallAlphabet alphabet_;
    int max_depth_;
    std::unique_ptr<PstNode> root_;
};

/// Counts (context, next) pairs for every context length 0..max_depth within
/// each trace, then prunes nodes seen fewer than min_count times.
PstModel pst_train(const std::vector<ExecutionTrace>& traces, int max_depth, std::uint64_t min_count = 1);

/// P(call_t | longest resident suffix of the preceding calls, up to max_depth).
/// Unseen symbols score 0. No smoothing.
std::vector<double> pst_score(const PstModel& m, const ExecutionTrace& trace);

struct PstVerdict {
    bool malicious = false;
    std::optional<std::size_t> position;  ///< first call index scoring below threshold
    double probability = 1.0;
};

constexpr double kPstThreshold = 0.01;

PstVerdict pst_classify(const PstModel& m, const ExecutionTrace& trace, double threshold = kPstThreshold);

/// "ctx1,ctx2,... -> next:count ..." lines, contexts oldest-first, sorted.
std::string pst_dump(const PstModel& m);

}  // namespace scfd
