#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "camforge/tensor.hpp"

namespace camforge {

enum class TrialLabel { target, nontarget };

struct TrialPair {
    std::string enroll_id;
    std::string test_id;
    TrialLabel label = TrialLabel::nontarget;
};

struct TrialSet {
    std::vector<TrialPair> pairs;
    std::vector<double> scores; // empty until scored; else parallel to pairs
};

// Lines of `enroll_id test_id label`, label one of target/nontarget/1/0.
// Blank lines and #-comments are skipped. Order preserved.
TrialSet parse_trials(const std::string& path);

// Scores as written by write_scores; attached to matching pairs in order.
void attach_scores(TrialSet& trials, const std::string& path);

// `enroll_id test_id score` with six decimals, one line per pair.
void write_scores(const TrialSet& trials, const std::string& path);

// Elementwise mean of raw embeddings (same dimension each).
Tensor average_enrollment(const std::vector<Tensor>& embeddings);

// dot(a,b) / (|a| |b|), accumulated in double.
double cosine_score(const Tensor& a, const Tensor& b);

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

struct DcfResult {
    double mindcf = 0.0;
    double threshold = 0.0;
};

// Operating point where false-accept rate equals miss rate, linearly
// interpolated between adjacent candidate thresholds (midpoints of distinct
// scores plus the infinities). Acceptance rule: score >= threshold.
EerResult compute_eer(const TrialSet& trials);

// Minimum over the same candidate thresholds of
// p*c_miss*P_miss + (1-p)*c_fa*P_fa, normalized by min(p*c_miss, (1-p)*c_fa).
DcfResult compute_mindcf(const TrialSet& trials, double p_target = 0.01, double c_miss = 1.0,
                         double c_fa = 1.0);

} // namespace camforge
