#include "scfd/detector.hpp"

#include <algorithm>
#include <cctype>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <zlib.h>

namespace scfd {

TrainResult train_profile_detailed(const TrainingSet& ts, const GkmConfig& cfg, double p0, const std::string& app_id,
                                   std::int64_t trained_at) {
    if (ts.rows.size() < 2) throw Error(Errc::InsufficientData, "training needs at least 2 traces");
    TrainResult r;
    Profile& p = r.profile;
    p.alphabet = ts.alphabet;
    p.reduction = fit_reduction(ts);
    p.cutoff = compute_cutoff(p0);
    p.meta.app_id = app_id;
    p.meta.trained_at = trained_at;
    p.meta.gkm = cfg;
    r.reduced = reduce_all(p.reduction, ts);
    if (p.reduction.reduced_dim() == 0) {
        r.clusters.assignments.assign(ts.rows.size(), 0);
        r.clusters.centroids.push_back(ClusterCentroid{Eigen::VectorXd(0), Eigen::MatrixXd(0, 0), ts.rows.size()});
        r.clusters.td_history = {0.0};
        return r;
    }
    r.clusters = global_kmeans(r.reduced, cfg);
    p.clusters = r.clusters.centroids;
    return r;
}

Profile train_profile(const TrainingSet& ts, const GkmConfig& cfg, double p0) {
    return train_profile_detailed(ts, cfg, p0).profile;
}

const char* rule_token(Rule r) {
    switch (r) {
        case Rule::None: return "none";
        case Rule::UnseenType: return "unseen_type";
        case Rule::ZeroVarianceChanged: return "zero_variance_changed";
        case Rule::DistanceExceeded: return "distance";
        case Rule::OutOfRegion: return "out_of_region";
    }
    return "none";
}

ClassifyOptions disabled_rules(const std::string& list) {
    ClassifyOptions o;
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }), tok.end());
        if (tok.empty()) continue;
        if (tok == "i") o.rule_unseen = false;
        else if (tok == "ii") o.rule_residual = false;
        else throw std::invalid_argument("only rules i and ii can be disabled, got '" + tok + "'");
    }
    return o;
}

Verdict classify_counts(const Profile& p, const Scfd& x, const ClassifyOptions& opt, OpCounter* ops) {
    Verdict v;
    v.theta = p.cutoff.theta;
    const Reduced red = apply_reduction(p.reduction, x);
    v.reduced = red.x;
    v.residual_expected = p.reduction.residual_expected;
    v.residual_observed = red.residual_sum;
    if (!p.clusters.empty()) {
        auto [idx, d] = assign_closest(p.clusters, red.x, ops);
        v.closest_cluster = idx;
        v.distance = d;
    }
    if (opt.rule_residual && red.residual_sum != p.reduction.residual_expected) {
        v.malicious = true;
        v.rule = Rule::ZeroVarianceChanged;
    } else if (v.distance > v.theta) {
        v.malicious = true;
        v.rule = Rule::DistanceExceeded;
    }
    return v;
}

Verdict classify(const Profile& p, const ExecutionTrace& trace, const ClassifyOptions& opt, OpCounter* ops) {
    if (trace.out_of_region && trace.call_count() > 0) {
        Verdict v;
        v.malicious = true;
        v.rule = Rule::OutOfRegion;
        v.theta = p.cutoff.theta;
        return v;
    }
    Scfd x{std::vector<std::int64_t>(p.alphabet.size(), 0)};
    for (const auto& e : trace.events) {
        if (e.kind != EventKind::Call) continue;
        if (auto idx = p.alphabet.index(e.syscall_name)) {
            ++x.counts[*idx];
        } else if (opt.rule_unseen) {
            Verdict v;
            v.malicious = true;
            v.rule = Rule::UnseenType;
            v.unseen_name = e.syscall_name;
            v.theta = p.cutoff.theta;
            return v;
        }
    }
    return classify_counts(p, x, opt, ops);
}

// ---------------------------------------------------------------- container

namespace {

constexpr char kMagic[8] = {'S', 'C', 'F', 'D', 'P', 'R', 'O', 'F'};

class Writer {
public:
    void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
    void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    std::string& bytes() { return buf_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    std::string buf_;
};

class Reader {
public:
    Reader(const std::string& b, std::size_t begin, std::size_t end) : b_(b), pos_(begin), end_(end) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
    std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(le(4))); }
    double f64() { return std::bit_cast<double>(le(8)); }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t count(std::size_t max_reasonable) {
        const auto n = u32();
        if (n > max_reasonable) corrupt("implausible element count");
        return n;
    }
    bool done() const { return pos_ == end_; }
    [[noreturn]] static void corrupt(const std::string& why) { throw Error(Errc::CorruptProfile, "corrupt profile: " + why); }

private:
    void need(std::size_t n) const {
        if (end_ - pos_ < n) corrupt("truncated payload");
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    const std::string& b_;
    std::size_t pos_, end_;
};

std::uint32_t crc_of(const std::string& s, std::size_t n) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(n)));
}

}  // namespace

std::string serialize_profile(const Profile& p) {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kProfileFormatVersion);

    w.u32(static_cast<std::uint32_t>(p.alphabet.size()));
    for (const auto& n : p.alphabet.names()) w.str(n);

    w.u32(static_cast<std::uint32_t>(p.reduction.kept.size()));
    for (auto k : p.reduction.kept) w.u32(static_cast<std::uint32_t>(k));
    w.u32(static_cast<std::uint32_t>(p.reduction.merged.size()));
    for (auto m : p.reduction.merged) w.u32(static_cast<std::uint32_t>(m));
    w.i64(p.reduction.residual_expected);

    w.u32(static_cast<std::uint32_t>(p.clusters.size()));
    for (const auto& c : p.clusters) {
        const auto D = c.mean.size();
        w.u32(static_cast<std::uint32_t>(D));
        for (Eigen::Index i = 0; i < D; ++i) w.f64(c.mean[i]);
        for (Eigen::Index i = 0; i < D; ++i)
            for (Eigen::Index j = 0; j < D; ++j) w.f64(c.inv_cov(i, j));
        w.u64(c.member_count);
    }

    w.f64(p.cutoff.p0);
    w.f64(p.cutoff.theta);

    w.str(p.meta.app_id);
    w.i64(p.meta.trained_at);
    w.str(p.meta.tool_version);
    w.i32(p.meta.gkm.max_k);
    w.f64(p.meta.gkm.bound_td);
    w.f64(p.meta.gkm.ridge);
    w.i32(p.meta.gkm.max_iters);
    w.i32(p.meta.gkm.candidate_stride);
    w.i32(p.meta.gkm.threads);

    w.u32(crc_of(w.bytes(), w.bytes().size()));
    return std::move(w.bytes());
}

Profile deserialize_profile(const std::string& b) {
    constexpr std::size_t header = sizeof kMagic + 4;
    if (b.size() < header + 4 || std::memcmp(b.data(), kMagic, sizeof kMagic) != 0) Reader::corrupt("bad magic");
    {
        Reader h(b, sizeof kMagic, header);
        const auto version = h.u32();
        if (version != kProfileFormatVersion)
            throw Error(Errc::VersionMismatch,
                        "profile format version " + std::to_string(version) + ", this tool reads version " +
                            std::to_string(kProfileFormatVersion),
                        version);
    }
    const std::size_t body_end = b.size() - 4;
    Reader tail(b, body_end, b.size());
    if (tail.u32() != crc_of(b, body_end)) Reader::corrupt("checksum mismatch");

    Reader r(b, header, body_end);
    Profile p;
    constexpr std::size_t kMax = 1u << 20;
    std::vector<std::string> names(r.count(kMax));
    for (auto& n : names) n = r.str();
    try {
        p.alphabet = SyscallAlphabet(std::move(names));
    } catch (const std::invalid_argument& e) {
        Reader::corrupt(e.what());
    }
    const std::size_t D = p.alphabet.size();

    p.reduction.kept.resize(r.count(D));
    for (auto& k : p.reduction.kept) k = r.u32();
    p.reduction.merged.resize(r.count(D));
    for (auto& m : p.reduction.merged) m = r.u32();
    p.reduction.residual_expected = r.i64();
    {
        std::vector<int> seen(D, 0);
        auto mark = [&](std::size_t i) {
            if (i >= D) Reader::corrupt("reduction index out of range");
            ++seen[i];
        };
        for (auto k : p.reduction.kept) mark(k);
        for (auto m : p.reduction.merged) mark(m);
        if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; }))
            Reader::corrupt("reduction does not partition the alphabet");
    }

    const std::size_t Dp = p.reduction.kept.size();
    p.clusters.resize(r.count(kMax));
    for (auto& c : p.clusters) {
        if (r.u32() != Dp) Reader::corrupt("cluster dimension differs from reduction");
        const auto n = static_cast<Eigen::Index>(Dp);
        c.mean.resize(n);
        c.inv_cov.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) c.mean[i] = r.f64();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) c.inv_cov(i, j) = r.f64();
        c.member_count = r.u64();
    }

    p.cutoff.p0 = r.f64();
    p.cutoff.theta = r.f64();
    p.meta.app_id = r.str();
    p.meta.trained_at = r.i64();
    p.meta.tool_version = r.str();
    p.meta.gkm.max_k = r.i32();
    p.meta.gkm.bound_td = r.f64();
    p.meta.gkm.ridge = r.f64();
    p.meta.gkm.max_iters = r.i32();
    p.meta.gkm.candidate_stride = r.i32();
    p.meta.gkm.threads = r.i32();
    if (!r.done()) Reader::corrupt("trailing bytes");
    return p;
}

void save_profile(const Profile& p, const std::string& path) {
    const auto bytes = serialize_profile(p);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::Io, "cannot write " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(Errc::Io, "write failed: " + path);
}

Profile load_profile(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::Io, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw Error(Errc::Io, "read failed: " + path);
    return deserialize_profile(bytes);
}

// ---------------------------------------------------------------- reports

namespace {
std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}
}  // namespace

std::string profile_to_text(const Profile& p) {
    std::ostringstream os;
    os << "profile app=" << p.meta.app_id << " tool=" << p.meta.tool_version << " trained_at=" << p.meta.trained_at << '\n';
    os << "alphabet D=" << p.alphabet.size() << ":";
    for (const auto& n : p.alphabet.names()) os << ' ' << n;
    os << "\nkept D'=" << p.reduction.kept.size() << ":";
    for (auto k : p.reduction.kept) os << ' ' << p.alphabet.name(k);
    os << "\nmerged:";
    for (auto m : p.reduction.merged) os << ' ' << p.alphabet.name(m);
    os << " residual_expected=" << p.reduction.residual_expected << '\n';
    os << "cutoff p0=" << fmt("%.6g", p.cutoff.p0) << " theta=" << fmt("%.6g", p.cutoff.theta) << '\n';
    os << "gkm max_k=" << p.meta.gkm.max_k << " bound_td=" << fmt("%.6g", p.meta.gkm.bound_td)
       << " ridge=" << fmt("%.6g", p.meta.gkm.ridge) << " max_iters=" << p.meta.gkm.max_iters
       << " stride=" << p.meta.gkm.candidate_stride << '\n';
    for (std::size_t c = 0; c < p.clusters.size(); ++c) {
        const auto& cl = p.clusters[c];
        os << "cluster " << c << " members=" << cl.member_count << '\n';
        for (std::size_t j = 0; j < p.reduction.kept.size(); ++j) {
            const auto J = static_cast<Eigen::Index>(j);
            os << "  " << p.alphabet.name(p.reduction.kept[j]) << " mean=" << fmt("%.6g", cl.mean[J])
               << " inv_cov_diag=" << fmt("%.6g", cl.inv_cov(J, J)) << '\n';
        }
    }
    return os.str();
}

std::vector<double> distance_contributions(const ClusterCentroid& c, const Eigen::VectorXd& x) {
    const Eigen::VectorXd d = x - c.mean;
    const Eigen::VectorXd t = c.inv_cov * d;
    std::vector<double> out(static_cast<std::size_t>(d.size()));
    for (Eigen::Index i = 0; i < d.size(); ++i) out[static_cast<std::size_t>(i)] = d[i] * t[i];
    return out;
}

std::string explain(const Verdict& v, const Profile& p) {
    std::ostringstream os;
    const bool has_dist = v.rule != Rule::UnseenType && v.rule != Rule::OutOfRegion;
    os << "VERDICT=" << (v.malicious ? "MALICIOUS" : "LEGIT") << " rule=" << rule_token(v.rule)
       << " dist=" << (has_dist ? fmt("%.6f", v.distance) : std::string("na")) << " theta=" << fmt("%.6f", v.theta)
       << '\n';
    switch (v.rule) {
        case Rule::UnseenType: os << "  unseen syscall: " << v.unseen_name << '\n'; break;
        case Rule::OutOfRegion: os << "  syscalls outside any execution region\n"; break;
        case Rule::ZeroVarianceChanged:
            os << "  zero-variance residual expected=" << v.residual_expected << " observed=" << v.residual_observed
               << '\n';
            break;
        default: break;
    }
    if (has_dist && v.closest_cluster) {
        const auto& c = p.clusters.at(*v.closest_cluster);
        os << "  closest cluster=" << *v.closest_cluster << " members=" << c.member_count << '\n';
        const auto contrib = distance_contributions(c, v.reduced);
        std::vector<std::size_t> order(contrib.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return std::abs(contrib[a]) > std::abs(contrib[b]); });
        os << "  contributions to dist^2:\n";
        for (auto j : order) {
            const auto J = static_cast<Eigen::Index>(j);
            char line[160];
            std::snprintf(line, sizeof line, "    %-14s %+14.6f  (x=%g mean=%.3f)\n",
                          p.alphabet.name(p.reduction.kept[j]).c_str(), contrib[j], v.reduced[J], c.mean[J]);
            os << line;
        }
    }
    return os.str();
}

}  // namespace scfd
