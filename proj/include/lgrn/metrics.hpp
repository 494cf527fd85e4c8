#ifndef LGRN_METRICS_HPP
#define LGRN_METRICS_HPP

#include <string>

#include "lgrn/tensor.hpp"

namespace lgrn {

constexpr int kPrThresholds = 256;
constexpr double kFBeta2 = 0.3;

// 256 thresholds descending over [0,1]; binarization is S > t.
struct PRCurve {
    std::vector<double> thresholds;
    std::vector<double> precision;
    std::vector<double> recall;
};

struct SequenceMetrics {
    std::string sequence_id;
    double f_beta_max = 0.0;
    double s_measure = 0.0;
    double mae = 0.0;
};

struct MetricsReport {
    double f_beta_max = 0.0;
    double s_measure = 0.0;
    double mae = 0.0;
    PRCurve pr;
    std::vector<SequenceMetrics> per_sequence;
};

// Precision defined as 1 when there are no detections.
PRCurve pr_curve(const Tensor& s, const Tensor& gt);
PRCurve average_pr(const std::vector<PRCurve>& curves);
double max_f_beta(const PRCurve& pr, double beta2 = kFBeta2);

// Reference structure measure: mu*S_o + (1-mu)*S_r, clamped to [0,1].
// Degenerate ground truths: all background -> 1 - mean(S); all foreground -> mean(S).
double s_measure(const Tensor& s, const Tensor& gt, double mu = 0.5);

double mae(const Tensor& s, const Tensor& gt);

// Per-frame predictions grouped by sequence, frame order preserved.
struct EvalFrame {
    std::string sequence_id;
    Tensor prediction;
    Tensor ground_truth;
};

MetricsReport compute_report(const std::vector<EvalFrame>& frames);

// CSV artifacts: <dir>/per_sequence.csv and <dir>/pr_curve.csv.
void write_report_csv(const MetricsReport& report, const std::string& dir);
MetricsReport read_report_csv(const std::string& dir);

} // namespace lgrn

#endif
