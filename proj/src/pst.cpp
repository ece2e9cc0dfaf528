#include "scfd/pst.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace scfd {

namespace {

std::unique_ptr<PstNode> new_node(std::size_t A) {
    auto n = std::make_unique<PstNode>();
    n->next.assign(A, 0);
    return n;
}

constexpr std::size_t kUnknown = static_cast<std::size_t>(-1);

std::vector<std::size_t> symbols(const SyscallAlphabet& a, const ExecutionTrace& t) {
    std::vector<std::size_t> out;
    for (const auto& e : t.events)
        if (e.kind == EventKind::Call) out.push_back(a.index(e.syscall_name).value_or(kUnknown));
    return out;
}

void prune(PstNode& n, std::uint64_t min_count) {
    for (auto& c : n.children) {
        if (!c) continue;
        if (c->total < min_count) c.reset();
        else prune(*c, min_count);
    }
}

std::size_t count_nodes(const PstNode& n) {
    std::size_t k = 1;
    for (const auto& c : n.children)
        if (c) k += count_nodes(*c);
    return k;
}

}  // namespace

PstModel::PstModel(SyscallAlphabet alphabet, int max_depth)
    : alphabet_(std::move(alphabet)), max_depth_(max_depth), root_(new_node(alphabet_.size())) {}

const PstNode* PstModel::find(const std::vector<std::string>& context) const {
    const PstNode* n = root_.get();
    for (auto it = context.rbegin(); it != context.rend(); ++it) {
        auto s = alphabet_.index(*it);
        if (!s || n->children.empty() || !n->children[*s]) return nullptr;
        n = n->children[*s].get();
    }
    return n;
}

std::size_t PstModel::node_count() const { return count_nodes(*root_); }

PstModel pst_train(const std::vector<ExecutionTrace>& traces, int max_depth, std::uint64_t min_count) {
    if (traces.empty()) throw Error(Errc::EmptyInput, "PST training needs at least one trace");
    if (max_depth < 1) throw Error(Errc::OutOfRange, "PST depth must be at least 1");
    std::set<std::string> names;
    for (const auto& t : traces)
        for (const auto& e : t.events)
            if (e.kind == EventKind::Call) names.insert(e.syscall_name);
    PstModel m(SyscallAlphabet(std::vector<std::string>(names.begin(), names.end())), max_depth);
    const std::size_t A = m.alphabet().size();

    for (const auto& t : traces) {
        const auto s = symbols(m.alphabet(), t);
        for (std::size_t i = 0; i < s.size(); ++i) {
            PstNode* n = &m.root();
            ++n->next[s[i]];
            ++n->total;
            const std::size_t lmax = std::min<std::size_t>(static_cast<std::size_t>(max_depth), i);
            for (std::size_t l = 1; l <= lmax; ++l) {
                const auto sym = s[i - l];
                if (n->children.empty()) n->children.resize(A);
                if (!n->children[sym]) n->children[sym] = new_node(A);
                n = n->children[sym].get();
                ++n->next[s[i]];
                ++n->total;
            }
        }
    }
    if (min_count > 1) prune(m.root(), min_count);
    return m;
}

std::vector<double> pst_score(const PstModel& m, const ExecutionTrace& trace) {
    const auto s = symbols(m.alphabet(), trace);
    std::vector<double> out(s.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == kUnknown) continue;
        const PstNode* n = &m.root();
        const std::size_t lmax = std::min<std::size_t>(static_cast<std::size_t>(m.max_depth()), i);
        for (std::size_t l = 1; l <= lmax; ++l) {
            const auto sym = s[i - l];
            if (sym == kUnknown || n->children.empty() || !n->children[sym]) break;
            n = n->children[sym].get();
        }
        out[i] = n->total ? static_cast<double>(n->next[s[i]]) / static_cast<double>(n->total) : 0.0;
    }
    return out;
}

PstVerdict pst_classify(const PstModel& m, const ExecutionTrace& trace, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(Errc::OutOfRange, "threshold must lie in [0, 1]");
    PstVerdict v;
    const auto p = pst_score(m, trace);
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] < threshold) {
            v.malicious = true;
            v.position = i;
            v.probability = p[i];
            break;
        }
    return v;
}

std::string pst_dump(const PstModel& m) {
    const auto& a = m.alphabet();
    std::vector<std::string> lines;
    std::vector<std::string> ctx;  // newest first while walking
    std::function<void(const PstNode&)> walk = [&](const PstNode& n) {
        std::string key;
        for (auto it = ctx.rbegin(); it != ctx.rend(); ++it) key += (key.empty() ? "" : ",") + *it;
        std::ostringstream os;
        os << (key.empty() ? "<root>" : key) << " ->";
        for (std::size_t s = 0; s < n.next.size(); ++s)
            if (n.next[s]) os << ' ' << a.name(s) << ':' << n.next[s];
        lines.push_back(os.str());
        for (std::size_t s = 0; s < n.children.size(); ++s)
            if (n.children[s]) {
                ctx.push_back(a.name(s));
                walk(*n.children[s]);
                ctx.pop_back();
            }
    };
    walk(m.root());
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + '\n';
    return out;
}

}  // namespace scfd
