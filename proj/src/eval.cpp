#include "scfd/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "scfd/parallel.hpp"

namespace scfd {

std::vector<Corpus> standard_attack_corpora(const WorkloadSpec& base, std::size_t trials) {
    struct Item {
        const char* name;
        AttackKind attack;
        FlowChoice flow;
    };
    const Item items[] = {{"httpleak", AttackKind::HttpLeak, {}},
                          {"ftpleak-flow1", AttackKind::FtpLeak, 1},
                          {"ftpleak-flow2", AttackKind::FtpLeak, 2},
                          {"datacorrupt", AttackKind::DataCorrupt, {}},
                          {"shellcode", AttackKind::Shellcode, {}}};
    std::vector<Corpus> out;
    std::uint64_t offset = 101;
    for (const auto& it : items) {
        WorkloadSpec s = base;
        s.seed = base.seed + offset++;
        out.push_back({it.name, gen_corpus(s, trials, it.attack, it.flow)});
    }
    return out;
}

std::vector<DetectionRow> run_detection_eval(const Profile& p, const std::vector<Corpus>& corpora,
                                             const ClassifyOptions& opt, std::vector<LogEntry>* log,
                                             const std::string& section, int threads) {
    std::vector<DetectionRow> rows;
    for (const auto& c : corpora) {
        std::vector<Verdict> v(c.traces.size());
        parallel_for(c.traces.size(), threads, [&](std::size_t i) { v[i] = classify(p, c.traces[i], opt); });
        DetectionRow r;
        r.corpus = c.name;
        r.trials = c.traces.size();
        for (std::size_t i = 0; i < v.size(); ++i) {
            r.detected += v[i].malicious;
            ++r.rules.counts[rule_token(v[i].rule)];
            if (log)
                log->push_back({section, c.name, i, c.traces[i].source_id, v[i].malicious, rule_token(v[i].rule),
                                v[i].distance});
        }
        r.rate = r.trials ? static_cast<double>(r.detected) / static_cast<double>(r.trials) : 0.0;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<FpRow> run_false_positive_eval(const Profile& p, const std::vector<ExecutionTrace>& normals,
                                           const std::vector<double>& p0_list, bool* fp_monotone,
                                           std::vector<LogEntry>* log, int threads) {
    if (normals.empty()) throw Error(Errc::EmptyCorpus, "false-positive evaluation needs at least one trace");
    std::vector<FpRow> rows;
    for (double p0 : p0_list) {
        Profile q = p;
        q.cutoff = compute_cutoff(p0);
        char sec[32];
        std::snprintf(sec, sizeof sec, "fp@%g", p0);
        const auto d = run_detection_eval(q, {Corpus{"normal", normals}}, {}, log, sec, threads);
        rows.push_back({p0, q.cutoff.theta, d[0].trials, d[0].detected, d[0].rate});
    }
    if (fp_monotone) {
        auto sorted = rows;
        std::sort(sorted.begin(), sorted.end(), [](const FpRow& a, const FpRow& b) { return a.p0 < b.p0; });
        *fp_monotone = true;
        for (std::size_t i = 1; i < sorted.size(); ++i)
            if (sorted[i - 1].rate > sorted[i].rate) *fp_monotone = false;
    }
    return rows;
}

std::vector<PstRow> run_pst_comparison(const std::vector<ExecutionTrace>& train, const std::vector<Corpus>& corpora,
                                       const std::vector<int>& depths, std::vector<LogEntry>* log, double threshold) {
    std::vector<PstRow> rows;
    for (int depth : depths) {
        const PstModel m = pst_train(train, depth);
        const std::string sec = "pst@" + std::to_string(depth);
        for (const auto& c : corpora) {
            PstRow r{c.name, depth, c.traces.size(), 0, 0.0};
            for (std::size_t i = 0; i < c.traces.size(); ++i) {
                const auto v = pst_classify(m, c.traces[i], threshold);
                r.detected += v.malicious;
                if (log)
                    log->push_back({sec, c.name, i, c.traces[i].source_id, v.malicious,
                                    v.position ? "position=" + std::to_string(*v.position) : "none", v.probability});
            }
            r.rate = r.trials ? static_cast<double>(r.detected) / static_cast<double>(r.trials) : 0.0;
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

Profile make_cost_profile(std::size_t d_prime, std::size_t k, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d_prime; ++j) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "v%02zu", j);
        names.push_back(buf);
    }
    names.push_back("z_const_a");
    names.push_back("z_const_b");
    Profile p;
    p.alphabet = SyscallAlphabet(names);
    for (std::size_t j = 0; j < d_prime; ++j) p.reduction.kept.push_back(j);
    p.reduction.merged = {d_prime, d_prime + 1};
    p.reduction.residual_expected = 6;
    p.cutoff = compute_cutoff(0.05);
    for (std::size_t c = 0; c < k; ++c) {
        Eigen::MatrixXd rows(60, static_cast<Eigen::Index>(d_prime));
        std::vector<double> base(d_prime);
        for (auto& b : base) b = static_cast<double>(rng.uniform_int(10, 100));
        for (Eigen::Index i = 0; i < rows.rows(); ++i)
            for (Eigen::Index j = 0; j < rows.cols(); ++j)
                rows(i, j) = base[static_cast<std::size_t>(j)] + static_cast<double>(rng.uniform_int(-3, 3));
        p.clusters.push_back(estimate_centroid(rows));
    }
    return p;
}

namespace {

// Trace whose counts follow the first cluster mean, each syscall repeated `scale` times as often.
ExecutionTrace cost_trace(const Profile& p, int scale) {
    ExecutionTrace t;
    t.events.push_back(TraceEvent::begin());
    for (std::size_t j = 0; j < p.reduction.kept.size(); ++j) {
        const auto n = std::max<long>(1, std::lround(p.clusters.front().mean[static_cast<Eigen::Index>(j)]));
        for (long r = 0; r < n * scale; ++r) t.events.push_back(TraceEvent::call(p.alphabet.name(p.reduction.kept[j])));
    }
    for (auto m : p.reduction.merged)
        for (int r = 0; r < 3 * scale; ++r) t.events.push_back(TraceEvent::call(p.alphabet.name(m)));
    t.events.push_back(TraceEvent::end());
    return t;
}

CostRow measure(const std::string& label, const Profile& p, std::size_t trials, bool latency) {
    CostRow r;
    r.label = label;
    r.d_prime = p.reduction.reduced_dim();
    r.k = p.clusters.size();
    const auto t1 = cost_trace(p, 1), t10 = cost_trace(p, 10);
    OpCounter a, b;
    classify(p, t1, {}, &a);
    classify(p, t10, {}, &b);
    r.madds = a.madds;
    r.madds_long = b.madds;
    if (latency && trials > 0) {
        // Counting is outside the timed region: only classify on a prebuilt trace is timed.
        std::vector<double> us(trials);
        for (std::size_t i = 0; i < trials; ++i) {
            const auto s = std::chrono::steady_clock::now();
            const auto v = classify(p, t1);
            const auto e = std::chrono::steady_clock::now();
            us[i] = std::chrono::duration<double, std::micro>(e - s).count() + 0.0 * v.distance;
        }
        double m = 0;
        for (double x : us) m += x;
        m /= static_cast<double>(trials);
        double var = 0;
        for (double x : us) var += (x - m) * (x - m);
        r.mean_latency_us = m;
        r.stdev_latency_us = trials > 1 ? std::sqrt(var / static_cast<double>(trials - 1)) : 0.0;
    }
    return r;
}

}  // namespace

std::vector<CostRow> run_cost_eval(const Profile& p, std::size_t trials, bool measure_latency) {
    std::vector<CostRow> rows;
    if (!p.clusters.empty()) rows.push_back(measure("profile", p, trials, measure_latency));
    const std::size_t k = std::max<std::size_t>(1, p.clusters.size());
    for (std::size_t d : {5u, 10u, 14u})
        rows.push_back(measure("synthetic", make_cost_profile(d, k, 0xC057 + d), trials, measure_latency));
    return rows;
}

// ---------------------------------------------------------------- output

std::string report_to_json(const EvalReport& r) {
    using J = nlohmann::ordered_json;
    J j;
    J cfg = J::object();
    for (const auto& [k, v] : r.config) cfg[k] = v;
    j["config"] = cfg;

    auto det = [](const std::vector<DetectionRow>& rows) {
        J a = J::array();
        for (const auto& d : rows) {
            J rules = J::object();
            for (const auto& [k, v] : d.rules.counts) rules[k] = v;
            a.push_back({{"corpus", d.corpus}, {"trials", d.trials}, {"detected", d.detected}, {"rate", d.rate},
                         {"rules", rules}});
        }
        return a;
    };
    j["detection"] = det(r.detection);
    j["detection_rules_i_ii_disabled"] = det(r.detection_ablated);

    J fp = J::array();
    for (const auto& f : r.false_positive)
        fp.push_back({{"p0", f.p0}, {"theta", f.theta}, {"trials", f.trials}, {"flagged", f.flagged}, {"rate", f.rate}});
    j["false_positive"] = {{"rows", fp}, {"monotone", r.fp_monotone}};

    J pst = J::array();
    for (const auto& p : r.pst)
        pst.push_back({{"corpus", p.corpus}, {"depth", p.depth}, {"trials", p.trials}, {"detected", p.detected},
                       {"rate", p.rate}});
    j["pst"] = {{"depths", r.pst_depths}, {"rows", pst}};

    J cost = J::array();
    for (const auto& c : r.cost)
        cost.push_back({{"label", c.label}, {"d_prime", c.d_prime}, {"k", c.k}, {"madds", c.madds},
                        {"madds_10x_trace", c.madds_long}, {"mean_latency_us", c.mean_latency_us},
                        {"stdev_latency_us", c.stdev_latency_us}});
    j["cost"] = cost;

    J log = J::array();
    for (const auto& e : r.log)
        log.push_back({{"section", e.section}, {"corpus", e.corpus}, {"index", e.index}, {"src", e.source_id},
                       {"malicious", e.malicious}, {"rule", e.rule}, {"value", e.distance}});
    j["verdicts"] = log;
    return j.dump(2) + "\n";
}

namespace {
std::string pct(double r) {
    char b[32];
    std::snprintf(b, sizeof b, "%.1f%%", 100.0 * r);
    return b;
}
}  // namespace

std::string report_to_text(const EvalReport& r) {
    std::ostringstream os;
    char line[256];
    os << "Detection rate\n";
    std::snprintf(line, sizeof line, "%-16s %7s %8s", "attack", "trials", "SCFD");
    os << line;
    for (int d : r.pst_depths) {
        std::snprintf(line, sizeof line, " %8s", ("PST@" + std::to_string(d)).c_str());
        os << line;
    }
    os << '\n';
    for (const auto& d : r.detection) {
        std::snprintf(line, sizeof line, "%-16s %7zu %8s", d.corpus.c_str(), d.trials, pct(d.rate).c_str());
        os << line;
        for (int depth : r.pst_depths) {
            std::string cell = "-";
            for (const auto& p : r.pst)
                if (p.depth == depth && p.corpus == d.corpus) cell = pct(p.rate);
            std::snprintf(line, sizeof line, " %8s", cell.c_str());
            os << line;
        }
        os << '\n';
    }
    if (!r.detection_ablated.empty()) {
        os << "\nSCFD with rules i,ii disabled\n";
        for (const auto& d : r.detection_ablated) {
            std::snprintf(line, sizeof line, "%-16s %7zu %8s\n", d.corpus.c_str(), d.trials, pct(d.rate).c_str());
            os << line;
        }
    }
    os << "\nFalse positives\n";
    std::snprintf(line, sizeof line, "%-8s %9s %7s %7s %8s\n", "p0", "theta", "trials", "flagged", "rate");
    os << line;
    for (const auto& f : r.false_positive) {
        std::snprintf(line, sizeof line, "%-8g %9.5f %7zu %7zu %8s\n", f.p0, f.theta, f.trials, f.flagged,
                      pct(f.rate).c_str());
        os << line;
    }
    os << "monotone: " << (r.fp_monotone ? "yes" : "no") << '\n';
    if (!r.cost.empty()) {
        os << "\nClassify cost\n";
        std::snprintf(line, sizeof line, "%-10s %3s %3s %8s %10s %12s %12s\n", "profile", "D'", "k", "madds",
                      "madds(10x)", "mean_us", "stdev_us");
        os << line;
        for (const auto& c : r.cost) {
            std::snprintf(line, sizeof line, "%-10s %3zu %3zu %8llu %10llu %12.3f %12.3f\n", c.label.c_str(),
                          c.d_prime, c.k, static_cast<unsigned long long>(c.madds),
                          static_cast<unsigned long long>(c.madds_long), c.mean_latency_us, c.stdev_latency_us);
            os << line;
        }
    }
    return os.str();
}

}  // namespace scfd
