#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "../common/oracles.hpp"
#include "scfd/pst.hpp"
#include "scfd/synthgen.hpp"

using namespace scfd;

namespace {

ExecutionTrace seq(const std::vector<std::string>& names) {
    ExecutionTrace t;
    t.events.push_back(TraceEvent::begin());
    for (const auto& n : names) t.events.push_back(TraceEvent::call(n));
    t.events.push_back(TraceEvent::end());
    return t;
}

double prob(const PstModel& m, const std::vector<std::string>& ctx, const std::string& next) {
    const PstNode* n = m.find(ctx);
    REQUIRE(n != nullptr);
    REQUIRE(n->total > 0);
    return static_cast<double>(n->next[*m.alphabet().index(next)]) / static_cast<double>(n->total);
}

void visit(const PstModel& m, const std::function<void(const PstNode&, std::size_t)>& f) {
    std::function<void(const PstNode&, std::size_t)> walk = [&](const PstNode& n, std::size_t depth) {
        f(n, depth);
        for (const auto& c : n.children)
            if (c) walk(*c, depth + 1);
    };
    walk(m.root(), 0);
}

const std::vector<ExecutionTrace>& normals() {
    static const auto traces = [] {
        WorkloadSpec s;
        s.seed = 31;
        return gen_corpus(s, 400, AttackKind::None);
    }();
    return traces;
}

}  // namespace

TEST_CASE("a,b,a,b at depth 2") {
    const auto m = pst_train({seq({"a", "b", "a", "b"})}, 2);
    CHECK(prob(m, {}, "a") == 0.5);
    CHECK(prob(m, {"a"}, "b") == 1.0);
    CHECK(prob(m, {"b"}, "a") == 1.0);
    CHECK(prob(m, {"a", "b"}, "a") == 1.0);
    CHECK(prob(m, {"b", "a"}, "b") == 1.0);
    CHECK(m.find({"a", "a"}) == nullptr);
    CHECK(m.node_count() == 5);

    const auto p = pst_score(m, seq({"a", "b"}));
    REQUIRE(p.size() == 2);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 1.0);
    CHECK(pst_score(m, seq({})).empty());
    const auto u = pst_score(m, seq({"a", "zz", "b"}));
    CHECK(u[1] == 0.0);
    CHECK(u[2] == 0.5);  // context through an unknown symbol falls back to the root
    CHECK(pst_dump(m) == "<root> -> a:2 b:2\na -> b:2\na,b -> a:1\nb -> a:1\nb,a -> b:1\n");
}

TEST_CASE("one-symbol trace") {
    const auto m = pst_train({seq({"read"})}, 3);
    CHECK(m.node_count() == 1);
    CHECK(prob(m, {}, "read") == 1.0);
    CHECK_FALSE(pst_classify(m, seq({"read", "read"})).malicious);
}

TEST_CASE("contexts do not span traces") {
    const auto m = pst_train({seq({"a"}), seq({"b"})}, 2);
    CHECK(m.find({"a"}) == nullptr);
    CHECK(m.root().total == 2);
}

TEST_CASE("scores match exhaustive n-gram counting") {
    std::mt19937_64 rng(99);
    const std::vector<std::string> sym{"a", "b", "c", "d"};
    for (int round = 0; round < 60; ++round) {
        const int k = 1 + static_cast<int>(rng() % 6);
        std::vector<std::vector<std::string>> train;
        std::vector<ExecutionTrace> traces;
        for (int i = 0; i < k; ++i) {
            std::vector<std::string> s(1 + rng() % 12);
            for (auto& x : s) x = sym[rng() % (round % 2 ? 2 : 4)];
            train.push_back(s);
            traces.push_back(seq(s));
        }
        std::vector<std::string> test(1 + rng() % 12);
        for (auto& x : test) x = rng() % 13 == 0 ? "zz" : sym[rng() % 4];
        for (int depth = 1; depth <= 5; ++depth) {
            const auto m = pst_train(traces, depth);
            CHECK(pst_score(m, seq(test)) == oracle::ngram_scores(train, test, depth));
            for (const auto& s : train) CHECK(pst_score(m, seq(s)) == oracle::ngram_scores(train, s, depth));
        }
    }
}

TEST_CASE("node structure") {
    const auto m = pst_train(normals(), 5);
    visit(m, [&](const PstNode& n, std::size_t depth) {
        std::uint64_t sum = 0;
        double psum = 0;
        for (auto c : n.next) sum += c;
        for (auto c : n.next) psum += static_cast<double>(c) / static_cast<double>(n.total);
        CHECK(sum == n.total);
        CHECK(std::abs(psum - 1.0) <= 1e-12);
        CHECK(depth <= 5);
        // A child's occurrences are a subset of its parent's.
        for (const auto& c : n.children)
            if (c) CHECK(c->total <= n.total);
    });
    for (const auto& t : normals()) {
        bool zero = false;
        for (double p : pst_score(m, t)) zero |= p == 0.0;
        CHECK_FALSE(zero);
    }
    CHECK(pst_dump(m) == pst_dump(pst_train(normals(), 5)));
}

TEST_CASE("workload contexts behind the detection examples") {
    const auto m5 = pst_train(normals(), 5);
    const PstNode* n = m5.find({"mmap", "write", "write", "write", "write"});
    REQUIRE(n != nullptr);
    CHECK(n->total > 0);
    CHECK(n->next[*m5.alphabet().index("close")] == 0);

    WorkloadSpec s;
    s.seed = 8;
    for (const auto& t : gen_corpus(s, 10, AttackKind::HttpLeak)) {
        const auto v = pst_classify(m5, t);
        REQUIRE(v.malicious);
        REQUIRE(v.position.has_value());
        const auto c = t.calls();
        const auto i = *v.position;
        REQUIRE(i >= 3);
        CHECK(c[i] == "write");
        CHECK(c[i - 3] == "sendto");
        CHECK(c[i - 2] == "close");
        CHECK(c[i - 1] == "write");
        CHECK(v.probability == 0.0);
    }
    for (const auto& t : gen_corpus(s, 10, AttackKind::DataCorrupt)) {
        const auto v = pst_classify(m5, t);
        REQUIRE(v.malicious);
        CHECK(t.calls()[*v.position] == "close");
    }
    for (const auto& t : normals()) CHECK_FALSE(pst_classify(m5, t).malicious);

    const auto m3 = pst_train(normals(), 3);
    for (const auto& t : gen_corpus(s, 10, AttackKind::FtpLeak, 1)) CHECK_FALSE(pst_classify(m3, t).malicious);
}

TEST_CASE("pruning and arguments") {
    const auto m = pst_train(normals(), 5, 50);
    visit(m, [&](const PstNode& n, std::size_t depth) {
        if (depth > 0) CHECK(n.total >= 50);
    });
    CHECK(m.node_count() < pst_train(normals(), 5).node_count());
    CHECK_THROWS_AS(pst_train({}, 3), Error);
    CHECK_THROWS_AS(pst_train(normals(), 0), Error);
    const auto small = pst_train({seq({"a", "b"})}, 1);
    CHECK_THROWS_AS(pst_classify(small, seq({"a"}), 1.5), Error);
    CHECK(pst_classify(small, seq({"a", "a"}), 0.0).malicious == false);
    const auto v = pst_classify(small, seq({"a", "a"}));
    CHECK(v.malicious);
    CHECK(*v.position == 1);
}
