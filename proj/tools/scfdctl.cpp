/**
 * @file scfdctl.cpp
 * @brief Command-line front end: gen, train, classify, eval, compare, inspect.
 *
 * Exit codes: 0 success or all legitimate, 1 I/O or data error,
 * 2 usage error, 3 at least one malicious verdict.
 */
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "scfd/detector.hpp"
#include "scfd/eval.hpp"
#include "scfd/pst.hpp"
#include "scfd/synthgen.hpp"

using namespace scfd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMalicious = 3;
constexpr const char* kThreadsEnv = "SCFD_THREADS";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// key=value lines; '#' and ';' start comments; [section] headers are ignored.
std::vector<std::pair<std::string, std::string>> read_overlay(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::Io, "cannot open config " + path);
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto c = line.find_first_of("#;");
        if (c != std::string::npos) line.erase(c);
        line = trim(line);
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        for (auto& ch : key)
            if (ch == '_') ch = '-';
        std::string val = trim(line.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
        kv.emplace_back(key, val);
    }
    return kv;
}

bool given(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
}

/// Appends overlay entries as --key=value unless the flag was given explicitly.
std::vector<std::string> apply_overlay(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    const auto explicit_args = args;
    for (const auto& [k, v] : read_overlay(path))
        if (!given(explicit_args, "--" + k)) args.push_back("--" + k + "=" + v);
    return args;
}

int default_threads() {
    if (const char* e = std::getenv(kThreadsEnv)) {
        const int t = std::atoi(e);
        if (t > 0) return t;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string option_value(const CLI::Option* o) {
    if (o->count() == 0) {
        const auto d = o->get_default_str();
        return d.empty() && o->get_expected_max() == 0 ? "false" : d;
    }
    std::string s;
    for (const auto& r : o->results()) s += (s.empty() ? "" : ",") + r;
    return s;
}

std::vector<std::pair<std::string, std::string>> resolved(const CLI::App& root, const CLI::App& sub) {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("command", sub.get_name());
    for (const CLI::App* a : {&root, &sub})
        for (const CLI::Option* o : a->get_options()) {
            if (o->get_lnames().empty()) continue;
            const auto& n = o->get_lnames().front();
            if (n == "help" || n == "config") continue;
            out.emplace_back(n, option_value(o));
        }
    return out;
}

std::optional<LogFormat> format_of(const std::string& s) {
    if (s == "auto") return std::nullopt;
    if (s == "jsonl") return LogFormat::Jsonl;
    return LogFormat::StraceText;
}

std::vector<int> parse_depths(const std::string& s) {
    std::vector<int> d;
    for (const auto& t : split(s, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(t, &used);
            if (used != t.size() || v < 0) throw std::invalid_argument(t);
            d.push_back(v);
        } catch (const std::exception&) {
            throw UsageError("bad depth '" + t + "'");
        }
    }
    return d;
}

std::vector<double> parse_p0_list(const std::string& s) {
    std::vector<double> d;
    for (const auto& t : split(s, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(t, &used);
            if (used != t.size() || !(v > 0.0 && v <= 1.0)) throw std::invalid_argument(t);
            d.push_back(v);
        } catch (const std::exception&) {
            throw UsageError("bad p0 '" + t + "'");
        }
    }
    return d;
}

// ---------------------------------------------------------------- train summary

struct ColumnStats {
    std::vector<double> mean, sd;
};

ColumnStats column_stats(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows) {
    ColumnStats s;
    const auto d = static_cast<std::size_t>(X.cols());
    s.mean.assign(d, 0.0);
    s.sd.assign(d, 0.0);
    if (rows.empty()) return s;
    for (std::size_t j = 0; j < d; ++j) {
        double m = 0;
        for (auto r : rows) m += X(r, static_cast<Eigen::Index>(j));
        m /= static_cast<double>(rows.size());
        double v = 0;
        for (auto r : rows) v += std::pow(X(r, static_cast<Eigen::Index>(j)) - m, 2);
        s.mean[j] = m;
        s.sd[j] = rows.size() > 1 ? std::sqrt(v / static_cast<double>(rows.size() - 1)) : 0.0;
    }
    return s;
}

std::string train_summary(const TrainResult& r, std::size_t n) {
    const Profile& p = r.profile;
    std::ostringstream os;
    char buf[256];
    os << "traces=" << n << " D=" << p.reduction.input_dim() << " D'=" << p.reduction.reduced_dim() << '\n';
    os << "merged={";
    for (std::size_t i = 0; i < p.reduction.merged.size(); ++i)
        os << (i ? "," : "") << p.alphabet.name(p.reduction.merged[i]);
    os << "} residual=" << p.reduction.residual_expected << '\n';
    std::snprintf(buf, sizeof buf, "k=%zu total_distance=%.3f bound_td=%.3f converged=%s\n", p.clusters.size(),
                  r.clusters.total_distance, p.meta.gkm.bound_td, r.clusters.converged ? "yes" : "no");
    os << buf;
    std::snprintf(buf, sizeof buf, "p0=%g theta=%.5f\n", p.cutoff.p0, p.cutoff.theta);
    os << buf;
    if (p.reduction.reduced_dim() == 0) return os.str();

    std::vector<std::string> cols;
    for (auto j : p.reduction.kept) cols.push_back(p.alphabet.name(j));
    std::vector<int> width;
    for (const auto& c : cols) width.push_back(static_cast<int>(std::max<std::size_t>(9, c.size() + 1)));
    std::snprintf(buf, sizeof buf, "\n%-8s %6s %-5s", "", "pts", "");
    os << buf;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        std::snprintf(buf, sizeof buf, " %*s", width[j], cols[j].c_str());
        os << buf;
    }
    os << '\n';

    auto emit = [&](const std::string& label, const std::vector<Eigen::Index>& rows) {
        const auto s = column_stats(r.reduced, rows);
        for (int line = 0; line < 2; ++line) {
            std::snprintf(buf, sizeof buf, "%-8s %6s %-5s", line ? "" : label.c_str(),
                          line ? "" : std::to_string(rows.size()).c_str(), line ? "Stdev" : "Mean");
            os << buf;
            for (std::size_t j = 0; j < cols.size(); ++j) {
                char cell[64];
                std::snprintf(cell, sizeof cell, "%.3f%s", line ? s.sd[j] : s.mean[j], s.sd[j] > 0 ? "*" : " ");
                std::snprintf(buf, sizeof buf, " %*s", width[j], cell);
                os << buf;
            }
            os << '\n';
        }
    };
    std::vector<Eigen::Index> all(static_cast<std::size_t>(r.reduced.rows()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
    emit("All", all);
    std::vector<std::vector<Eigen::Index>> members(p.clusters.size());
    for (std::size_t i = 0; i < r.clusters.assignments.size(); ++i)
        members[r.clusters.assignments[i]].push_back(static_cast<Eigen::Index>(i));
    for (std::size_t c = 0; c < members.size(); ++c) emit("c" + std::to_string(c + 1), members[c]);
    os << "(* nonzero variance)\n";
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::Io, "cannot write " + path);
    f << text;
    if (!f) throw Error(Errc::Io, "write failed: " + path);
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"System call frequency distribution anomaly detector"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    int threads = default_threads();
    bool deterministic = false;
    app.add_option("--config", config_path, "key=value overlay; explicit flags win");
    app.add_option("--threads", threads, std::string("worker threads (default from ") + kThreadsEnv + ")")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("--deterministic", deterministic, "zero timestamps and latency measurements");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic trace corpus");
    std::uint64_t seed = 1;
    std::int64_t n = 2000;
    std::string attack = "none", out = "-";
    int flow = 0;
    bool no_timestamps = false;
    gen->add_option("--seed", seed)->capture_default_str();
    gen->add_option("--n", n)->check(CLI::NonNegativeNumber)->capture_default_str();
    gen->add_option("--attack", attack)
        ->check(CLI::IsMember({"none", "httpleak", "ftpleak", "datacorrupt", "shellcode"}))
        ->capture_default_str();
    gen->add_option("--flow", flow, "0 = drawn, 1 = upload, 2 = skip upload")
        ->check(CLI::Range(0, 2))
        ->capture_default_str();
    gen->add_option("--out", out, "output file, - for stdout")->capture_default_str();
    gen->add_flag("--no-timestamps", no_timestamps);

    // shared trace input
    std::string in_path, format = "auto";
    std::optional<std::string> regions;
    auto add_regions = [&](CLI::App* s, const char* dflt) {
        s->add_option("--regions", regions, "strict rejects unterminated regions; watchdog closes them")
            ->check(CLI::IsMember({"strict", "watchdog"}))
            ->default_str(dflt);
    };
    auto add_input = [&](CLI::App* s, bool required, const char* dflt) {
        auto* o = s->add_option("--in", in_path, "event log (jsonl or strace text)");
        if (required) o->required();
        s->add_option("--format", format)->check(CLI::IsMember({"auto", "jsonl", "strace"}))->capture_default_str();
        add_regions(s, dflt);
    };

    // train
    auto* train = app.add_subcommand("train", "learn a profile from normal traces");
    add_input(train, true, "strict");
    std::string out_profile, app_id = "app";
    GkmConfig gkm;
    double p0 = 0.05;
    std::optional<double> bound_per_point;
    train->add_option("--out-profile", out_profile)->required();
    train->add_option("--max-k", gkm.max_k)->check(CLI::PositiveNumber)->capture_default_str();
    train->add_option("--bound-td", gkm.bound_td)->check(CLI::NonNegativeNumber)->capture_default_str();
    train->add_option("--bound-td-per-point", bound_per_point, "bound_td = value x number of traces")
        ->check(CLI::NonNegativeNumber);
    train->add_option("--p0", p0)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    train->add_option("--ridge", gkm.ridge)->check(CLI::NonNegativeNumber)->capture_default_str();
    train->add_option("--max-iters", gkm.max_iters)->check(CLI::PositiveNumber)->capture_default_str();
    train->add_option("--candidate-stride", gkm.candidate_stride)->check(CLI::PositiveNumber)->capture_default_str();
    train->add_option("--app-id", app_id)->capture_default_str();

    // classify
    auto* cls = app.add_subcommand("classify", "check traces against a profile");
    std::string profile_path, disable;
    bool want_explain = false;
    cls->add_option("--profile", profile_path)->required();
    add_input(cls, true, "watchdog");
    cls->add_flag("--explain", want_explain, "print per-coordinate distance contributions");
    cls->add_option("--disable-rules", disable, "comma list from i,ii");

    // eval
    auto* ev = app.add_subcommand("eval", "run the evaluation protocol");
    std::string normal_path, train_path, report_path = "-", report_text_path, pst_depths = "3,5", p0_list = "0.05,0.01";
    std::vector<std::string> attack_files;
    std::size_t trials = 300, fresh_n = 2000, cost_trials = 2000;
    ev->add_option("--profile", profile_path)->required();
    ev->add_option("--normal", normal_path, "fresh normal traces for the false-positive test (default: generated)");
    ev->add_option("--train", train_path, "training traces for the sequence model (default: generated)");
    ev->add_option("--attacks", attack_files, "name=file pairs (default: generated corpora)")->delimiter(',');
    ev->add_option("--format", format)->check(CLI::IsMember({"auto", "jsonl", "strace"}))->capture_default_str();
    add_regions(ev, "watchdog");
    ev->add_option("--seed", seed, "seed for generated corpora")->capture_default_str();
    ev->add_option("--trials", trials, "traces per generated attack corpus")->capture_default_str();
    ev->add_option("--fresh-n", fresh_n, "generated fresh normals")->capture_default_str();
    ev->add_option("--train-n", n, "generated training traces")->capture_default_str();
    ev->add_option("--p0-list", p0_list)->capture_default_str();
    ev->add_option("--pst-depths", pst_depths, "comma list; empty for SCFD only")->capture_default_str();
    ev->add_option("--cost-trials", cost_trials)->capture_default_str();
    ev->add_option("--report", report_path, "JSON report, - for stdout")->capture_default_str();
    ev->add_option("--report-text", report_text_path, "plain-text tables");

    // compare
    auto* cmp = app.add_subcommand("compare", "per-trace SCFD and sequence-model verdicts");
    cmp->add_option("--profile", profile_path)->required();
    cmp->add_option("--train", train_path, "training traces for the sequence model")->required();
    add_input(cmp, true, "watchdog");
    cmp->add_option("--pst-depths", pst_depths)->capture_default_str();

    // inspect
    auto* ins = app.add_subcommand("inspect", "dump a profile or summarise traces");
    int dump_depth = -1;
    ins->add_option("--profile", profile_path);
    add_input(ins, false, "watchdog");
    ins->add_option("--pst-dump", dump_depth, "print the suffix tree of this depth trained on --in");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = apply_overlay(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }

    CLI::App* sub = app.get_subcommands().front();
    const auto config = resolved(app, *sub);
    for (const auto& [k, v] : config) std::cerr << "config " << k << "=" << v << '\n';

    const std::string region_mode = regions.value_or(sub == train ? "strict" : "watchdog");
    const RegionPolicy policy = region_mode == "strict" ? RegionPolicy::Strict : RegionPolicy::Watchdog;
    gkm.threads = threads;

    try {
        if (sub == gen) {
            WorkloadSpec s;
            s.seed = seed;
            s.timestamps = !no_timestamps;
            const auto a = *parse_attack(attack);
            const auto traces = gen_corpus(s, static_cast<std::size_t>(n), a, flow ? FlowChoice{flow} : FlowChoice{});
            std::ostringstream os;
            write_jsonl(os, traces);
            write_text(out, os.str());
            return kExitOk;
        }

        if (sub == train) {
            const auto traces = read_event_log(in_path, format_of(format), policy);
            const auto ts = load_training_set(traces);
            if (bound_per_point) gkm.bound_td = *bound_per_point * static_cast<double>(traces.size());
            const std::int64_t now = deterministic ? 0 : static_cast<std::int64_t>(std::time(nullptr));
            const auto r = train_profile_detailed(ts, gkm, p0, app_id, now);
            save_profile(r.profile, out_profile);
            std::cout << train_summary(r, traces.size());
            return kExitOk;
        }

        if (sub == cls) {
            ClassifyOptions opt;
            try {
                opt = disabled_rules(disable);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            const Profile p = load_profile(profile_path);
            const auto traces = read_event_log(in_path, format_of(format), policy);
            bool any = false;
            for (const auto& t : traces) {
                const auto v = classify(p, t, opt);
                any = any || v.malicious;
                const auto text = explain(v, p);
                std::cout << first_line(text) << " src=" << t.source_id << '\n';
                if (want_explain) {
                    const auto nl = text.find('\n');
                    if (nl != std::string::npos) std::cout << text.substr(nl + 1);
                }
            }
            return any ? kExitMalicious : kExitOk;
        }

        if (sub == ev) {
            const Profile p = load_profile(profile_path);
            const auto depths = parse_depths(pst_depths);
            const auto p0s = parse_p0_list(p0_list);
            WorkloadSpec base;
            base.seed = seed;
            const auto fmt = format_of(format);

            std::vector<Corpus> corpora;
            if (attack_files.empty()) {
                corpora = standard_attack_corpora(base, trials);
            } else {
                for (const auto& pair : attack_files) {
                    const auto eq = pair.find('=');
                    if (eq == std::string::npos || eq == 0) throw UsageError("--attacks expects name=file");
                    corpora.push_back({pair.substr(0, eq), read_event_log(pair.substr(eq + 1), fmt, policy)});
                }
            }
            std::vector<ExecutionTrace> normals;
            if (!normal_path.empty()) {
                normals = read_event_log(normal_path, fmt, policy);
            } else {
                WorkloadSpec f = base;
                f.seed = seed + 1000;
                normals = gen_corpus(f, fresh_n, AttackKind::None);
            }

            EvalReport rep;
            rep.config = config;
            rep.detection = run_detection_eval(p, corpora, {}, &rep.log, "detection", threads);
            rep.detection_ablated =
                run_detection_eval(p, corpora, disabled_rules("i,ii"), &rep.log, "ablated", threads);
            rep.false_positive = run_false_positive_eval(p, normals, p0s, &rep.fp_monotone, &rep.log, threads);
            rep.pst_depths = depths;
            if (!depths.empty()) {
                std::vector<ExecutionTrace> train_traces;
                if (!train_path.empty()) {
                    train_traces = read_event_log(train_path, fmt, policy);
                } else {
                    train_traces = gen_corpus(base, static_cast<std::size_t>(n), AttackKind::None);
                }
                rep.pst = run_pst_comparison(train_traces, corpora, depths, &rep.log);
            }
            rep.cost = run_cost_eval(p, cost_trials, !deterministic);
            write_text(report_path, report_to_json(rep));
            const auto text = report_to_text(rep);
            if (!report_text_path.empty()) write_text(report_text_path, text);
            if (report_path != "-") std::cout << text;
            return kExitOk;
        }

        if (sub == cmp) {
            const Profile p = load_profile(profile_path);
            const auto depths = parse_depths(pst_depths);
            const auto train_traces = read_event_log(train_path, format_of(format), policy);
            const auto traces = read_event_log(in_path, format_of(format), policy);
            std::vector<PstModel> models;
            for (int d : depths) models.push_back(pst_train(train_traces, d));
            bool any = false;
            char buf[128];
            for (const auto& t : traces) {
                const auto v = classify(p, t);
                any = any || v.malicious;
                std::cout << "src=" << t.source_id << " scfd=" << (v.malicious ? "MALICIOUS" : "LEGIT")
                          << " rule=" << rule_token(v.rule);
                for (std::size_t i = 0; i < models.size(); ++i) {
                    const auto pv = pst_classify(models[i], t);
                    any = any || pv.malicious;
                    std::snprintf(buf, sizeof buf, " pst@%d=%s", depths[i], pv.malicious ? "MALICIOUS" : "LEGIT");
                    std::cout << buf;
                    if (pv.position) {
                        std::snprintf(buf, sizeof buf, "(pos=%zu p=%.6f)", *pv.position, pv.probability);
                        std::cout << buf;
                    }
                }
                std::cout << '\n';
            }
            return any ? kExitMalicious : kExitOk;
        }

        if (sub == ins) {
            if (profile_path.empty() && in_path.empty()) throw UsageError("inspect needs --profile or --in");
            if (!profile_path.empty()) std::cout << profile_to_text(load_profile(profile_path));
            if (!in_path.empty()) {
                const auto traces = read_event_log(in_path, format_of(format), policy);
                if (dump_depth >= 0) {
                    std::cout << pst_dump(pst_train(traces, dump_depth));
                } else {
                    SyscallAlphabet alpha;
                    for (const auto& t : traces) build_scfd(t, alpha, OnUnknown::Extend);
                    for (std::size_t i = 0; i < traces.size(); ++i) {
                        const auto x = build_scfd(traces[i], alpha);
                        std::cout << traces[i].source_id << " calls=" << traces[i].call_count()
                                  << " terminated=" << (traces[i].terminated() ? "yes" : "no");
                        for (std::size_t j = 0; j < alpha.size(); ++j)
                            if (x.counts[j]) std::cout << ' ' << alpha.name(j) << '=' << x.counts[j];
                        std::cout << '\n';
                    }
                }
            }
            return kExitOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n' << sub->help();
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
