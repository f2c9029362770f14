#include "camforge/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "camforge/error.hpp"

namespace camforge {

namespace {

TrialLabel parse_label(const std::string& tok, const std::string& path, size_t line_no) {
    if (tok == "target" || tok == "1") return TrialLabel::target;
    if (tok == "nontarget" || tok == "0") return TrialLabel::nontarget;
    throw FormatError(path + ":" + std::to_string(line_no) + ": label must be target/nontarget/1/0, got '" +
                      tok + "'");
}

bool skippable(const std::string& line) {
    for (char ch : line) {
        if (ch == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(ch))) return false;
    }
    return true;
}

} // namespace

TrialSet parse_trials(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trial file " + path);
    TrialSet set;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (skippable(line)) continue;
        std::istringstream ls(line);
        std::string enroll, test, label, extra;
        ls >> enroll >> test >> label;
        if (label.empty() || (ls >> extra))
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": expected 'enroll_id test_id label'");
        set.pairs.push_back({enroll, test, parse_label(label, path, line_no)});
    }
    return set;
}

void attach_scores(TrialSet& trials, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score file " + path);
    std::vector<double> scores;
    scores.reserve(trials.pairs.size());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (skippable(line)) continue;
        std::istringstream ls(line);
        std::string enroll, test;
        double score = 0.0;
        if (!(ls >> enroll >> test >> score))
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": expected 'enroll_id test_id score'");
        size_t i = scores.size();
        if (i >= trials.pairs.size())
            throw FormatError(path + ":" + std::to_string(line_no) + ": more scores than trial pairs");
        if (trials.pairs[i].enroll_id != enroll || trials.pairs[i].test_id != test)
            throw FormatError(path + ":" + std::to_string(line_no) + ": pair " + enroll + " " + test +
                              " does not match trial pair " + trials.pairs[i].enroll_id + " " +
                              trials.pairs[i].test_id);
        scores.push_back(score);
    }
    if (scores.size() != trials.pairs.size())
        throw FormatError(path + ": has " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(trials.pairs.size()) + " trial pairs");
    trials.scores = std::move(scores);
}

void write_scores(const TrialSet& trials, const std::string& path) {
    if (trials.scores.size() != trials.pairs.size())
        throw UsageError("trial set has no scores to write");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write score file " + path);
    char buf[64];
    for (size_t i = 0; i < trials.pairs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f", trials.scores[i]);
        out << trials.pairs[i].enroll_id << " " << trials.pairs[i].test_id << " " << buf << "\n";
    }
    if (!out) throw IoError("failed writing score file " + path);
}

Tensor average_enrollment(const std::vector<Tensor>& embeddings) {
    if (embeddings.empty()) throw InputError("enrollment average needs at least one embedding");
    const Tensor& first = embeddings.front();
    if (first.ndim() != 1) throw InputError("embeddings must be rank 1, got " + first.shape_str());
    const int64_t d = first.dim(0);
    std::vector<double> acc(size_t(d), 0.0);
    for (const Tensor& e : embeddings) {
        if (e.ndim() != 1 || e.dim(0) != d)
            throw InputError("embedding dims differ: " + first.shape_str() + " vs " + e.shape_str());
        for (int64_t i = 0; i < d; ++i) acc[size_t(i)] += e[i];
    }
    Tensor out({d});
    for (int64_t i = 0; i < d; ++i) out[i] = float(acc[size_t(i)] / double(embeddings.size()));
    return out;
}

double cosine_score(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 1 || b.ndim() != 1 || a.dim(0) != b.dim(0))
        throw InputError("cosine needs two equal-length vectors, got " + a.shape_str() + " and " +
                         b.shape_str());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int64_t i = 0; i < a.dim(0); ++i) {
        dot += double(a[i]) * double(b[i]);
        na += double(a[i]) * double(a[i]);
        nb += double(b[i]) * double(b[i]);
    }
    if (na == 0.0 || nb == 0.0) throw InputError("cosine of a zero-norm vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

struct SplitScores {
    std::vector<double> target;    // sorted
    std::vector<double> nontarget; // sorted
    std::vector<double> candidates;
};

SplitScores split_and_candidates(const TrialSet& trials) {
    if (trials.scores.size() != trials.pairs.size())
        throw InputError("trial set has no scores attached");
    SplitScores s;
    for (size_t i = 0; i < trials.pairs.size(); ++i) {
        if (!std::isfinite(trials.scores[i]))
            throw InputError("non-finite score at pair " + std::to_string(i));
        if (trials.pairs[i].label == TrialLabel::target)
            s.target.push_back(trials.scores[i]);
        else
            s.nontarget.push_back(trials.scores[i]);
    }
    if (s.target.empty() || s.nontarget.empty())
        throw InputError("metrics need both target and nontarget pairs");
    std::sort(s.target.begin(), s.target.end());
    std::sort(s.nontarget.begin(), s.nontarget.end());

    std::vector<double> all = s.target;
    all.insert(all.end(), s.nontarget.begin(), s.nontarget.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    const double inf = std::numeric_limits<double>::infinity();
    s.candidates.push_back(-inf);
    for (size_t i = 0; i + 1 < all.size(); ++i)
        s.candidates.push_back(0.5 * (all[i] + all[i + 1]));
    s.candidates.push_back(inf);
    return s;
}

// Accept iff score >= threshold.
void rates_at(const SplitScores& s, double threshold, double& miss, double& fa) {
    auto below = [](const std::vector<double>& v, double t) {
        return double(std::lower_bound(v.begin(), v.end(), t) - v.begin());
    };
    miss = below(s.target, threshold) / double(s.target.size());
    fa = 1.0 - below(s.nontarget, threshold) / double(s.nontarget.size());
}

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

} // namespace

EerResult compute_eer(const TrialSet& trials) {
    SplitScores s = split_and_candidates(trials);
    const double lo = std::min(s.target.front(), s.nontarget.front());
    const double hi = std::max(s.target.back(), s.nontarget.back());

    double prev_thr = s.candidates.front();
    double prev_miss = 0.0, prev_fa = 1.0;
    for (double thr : s.candidates) {
        double miss, fa;
        rates_at(s, thr, miss, fa);
        double diff = miss - fa;
        if (diff >= 0.0) {
            EerResult r;
            if (diff == 0.0) {
                r.eer = miss;
                r.threshold = finite_or(thr, hi);
                return r;
            }
            double prev_diff = prev_miss - prev_fa;
            double lam = -prev_diff / (diff - prev_diff);
            r.eer = prev_miss + lam * (miss - prev_miss);
            double a = finite_or(prev_thr, lo);
            double b = finite_or(thr, hi);
            r.threshold = a + lam * (b - a);
            return r;
        }
        prev_thr = thr;
        prev_miss = miss;
        prev_fa = fa;
    }
    // miss-fa reaches +1 at the +inf candidate, so the loop always returns.
    throw NumericError("equal error rate crossing not found");
}

DcfResult compute_mindcf(const TrialSet& trials, double p_target, double c_miss, double c_fa) {
    if (!(p_target > 0.0) || !(p_target < 1.0))
        throw ConfigError("p_target must be in (0,1), got " + std::to_string(p_target));
    if (!(c_miss > 0.0) || !(c_fa > 0.0)) throw ConfigError("detection costs must be positive");
    SplitScores s = split_and_candidates(trials);
    const double lo = std::min(s.target.front(), s.nontarget.front());
    const double hi = std::max(s.target.back(), s.nontarget.back());

    double best = std::numeric_limits<double>::infinity();
    double best_thr = 0.0;
    for (double thr : s.candidates) {
        double miss, fa;
        rates_at(s, thr, miss, fa);
        double dcf = p_target * c_miss * miss + (1.0 - p_target) * c_fa * fa;
        if (dcf < best) {
            best = dcf;
            best_thr = finite_or(thr, thr > 0 ? hi : lo);
        }
    }
    DcfResult r;
    r.mindcf = best / std::min(p_target * c_miss, (1.0 - p_target) * c_fa);
    r.threshold = best_thr;
    return r;
}

} // namespace camforge
