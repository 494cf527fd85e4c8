#include "lgrn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace lgrn {

namespace {

void check_shapes(const Tensor& s, const Tensor& gt, const char* op) {
    if (s.ndim() != 2 || !s.same_shape(gt))
        throw Error("shape_mismatch", std::string(op) + ": prediction/ground-truth shapes differ");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

PRCurve pr_curve(const Tensor& s, const Tensor& gt) {
    check_shapes(s, gt, "pr_curve");
    long n = s.numel();
    long fg = 0;
    for (long i = 0; i < n; ++i) fg += gt[i] > 0.5 ? 1 : 0;
    if (fg == 0) throw Error("empty_ground_truth", "pr_curve: ground truth has no foreground");

    PRCurve out;
    out.thresholds.resize(kPrThresholds);
    out.precision.resize(kPrThresholds);
    out.recall.resize(kPrThresholds);
    for (int k = 0; k < kPrThresholds; ++k) {
        double t = static_cast<double>(kPrThresholds - 1 - k) / (kPrThresholds - 1);
        long tp = 0, fp = 0;
        for (long i = 0; i < n; ++i) {
            if (s[i] > t) {
                if (gt[i] > 0.5) ++tp;
                else ++fp;
            }
        }
        out.thresholds[static_cast<size_t>(k)] = t;
        out.precision[static_cast<size_t>(k)] =
            (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        out.recall[static_cast<size_t>(k)] = static_cast<double>(tp) / static_cast<double>(fg);
    }
    return out;
}

PRCurve average_pr(const std::vector<PRCurve>& curves) {
    if (curves.empty()) throw Error("empty_input", "average_pr: no curves");
    PRCurve out = curves.front();
    for (size_t c = 1; c < curves.size(); ++c)
        for (int k = 0; k < kPrThresholds; ++k) {
            out.precision[static_cast<size_t>(k)] += curves[c].precision[static_cast<size_t>(k)];
            out.recall[static_cast<size_t>(k)] += curves[c].recall[static_cast<size_t>(k)];
        }
    double inv = 1.0 / static_cast<double>(curves.size());
    for (int k = 0; k < kPrThresholds; ++k) {
        out.precision[static_cast<size_t>(k)] *= inv;
        out.recall[static_cast<size_t>(k)] *= inv;
    }
    return out;
}

double max_f_beta(const PRCurve& pr, double beta2) {
    double best = 0.0;
    for (size_t k = 0; k < pr.precision.size(); ++k) {
        double p = pr.precision[k], r = pr.recall[k];
        double denom = beta2 * p + r;
        double f = denom == 0.0 ? 0.0 : (1.0 + beta2) * p * r / denom;
        best = std::max(best, f);
    }
    return best;
}

namespace {

constexpr double kSsimEps = 1e-20;

// Region SSIM as used by the reference structure measure.
double region_ssim(const Tensor& s, const Tensor& gt, int y0, int y1, int x0, int x1) {
    long n = static_cast<long>(y1 - y0) * (x1 - x0);
    if (n <= 0) return 0.0;
    double mx = 0.0, my = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            mx += s.at(y, x);
            my += gt.at(y, x);
        }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            double dx = s.at(y, x) - mx, dy = gt.at(y, x) - my;
            sx += dx * dx;
            sy += dy * dy;
            sxy += dx * dy;
        }
    double div = n > 1 ? static_cast<double>(n - 1) : 1.0;
    sx /= div;
    sy /= div;
    sxy /= div;
    double alpha = 4.0 * mx * my * sxy;
    double beta = (mx * mx + my * my) * (sx + sy);
    if (alpha != 0.0) return alpha / (beta + kSsimEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

// Object score O(mean, std) = 2*mean / (mean^2 + 1 + 2*std).
double object_score(const Tensor& pred, const Tensor& gt, bool foreground) {
    long n = pred.numel();
    long cnt = 0;
    double mean = 0.0;
    for (long i = 0; i < n; ++i) {
        bool in = foreground ? gt[i] > 0.5 : gt[i] <= 0.5;
        if (!in) continue;
        ++cnt;
        mean += foreground ? pred[i] : 1.0 - pred[i];
    }
    if (cnt == 0) return 0.0;
    mean /= static_cast<double>(cnt);
    double var = 0.0;
    for (long i = 0; i < n; ++i) {
        bool in = foreground ? gt[i] > 0.5 : gt[i] <= 0.5;
        if (!in) continue;
        double v = (foreground ? pred[i] : 1.0 - pred[i]) - mean;
        var += v * v;
    }
    var /= static_cast<double>(cnt);
    return 2.0 * mean / (mean * mean + 1.0 + 2.0 * std::sqrt(var) + kSsimEps);
}

} // namespace

double s_measure(const Tensor& s, const Tensor& gt, double mu) {
    check_shapes(s, gt, "s_measure");
    int h = gt.dim(0), w = gt.dim(1);
    long n = gt.numel();
    long fg = 0;
    for (long i = 0; i < n; ++i) fg += gt[i] > 0.5 ? 1 : 0;
    double mean_s = 0.0;
    for (long i = 0; i < n; ++i) mean_s += s[i];
    mean_s /= static_cast<double>(n);
    if (fg == 0) return std::clamp(1.0 - mean_s, 0.0, 1.0);
    if (fg == n) return std::clamp(mean_s, 0.0, 1.0);

    // Object-aware term.
    double m = static_cast<double>(fg) / static_cast<double>(n);
    double s_o = m * object_score(s, gt, true) + (1.0 - m) * object_score(s, gt, false);

    // Region-aware term: split at the foreground centroid, weight by block area.
    double cy = 0.0, cx = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt.at(y, x) > 0.5) {
                cy += y;
                cx += x;
            }
    int cyi = static_cast<int>(std::round(cy / static_cast<double>(fg))) + 1;
    int cxi = static_cast<int>(std::round(cx / static_cast<double>(fg))) + 1;
    cyi = std::clamp(cyi, 1, h - 1);
    cxi = std::clamp(cxi, 1, w - 1);
    double s_r = 0.0;
    const int ys[3] = {0, cyi, h};
    const int xs[3] = {0, cxi, w};
    for (int by = 0; by < 2; ++by)
        for (int bx = 0; bx < 2; ++bx) {
            double weight = static_cast<double>(ys[by + 1] - ys[by]) *
                            static_cast<double>(xs[bx + 1] - xs[bx]) / static_cast<double>(n);
            s_r += weight * region_ssim(s, gt, ys[by], ys[by + 1], xs[bx], xs[bx + 1]);
        }

    return std::clamp(mu * s_o + (1.0 - mu) * s_r, 0.0, 1.0);
}

double mae(const Tensor& s, const Tensor& gt) {
    check_shapes(s, gt, "mae");
    double acc = 0.0;
    for (long i = 0; i < s.numel(); ++i) acc += std::fabs(s[i] - gt[i]);
    return acc / static_cast<double>(s.numel());
}

MetricsReport compute_report(const std::vector<EvalFrame>& frames) {
    if (frames.empty()) throw Error("empty_input", "compute_report: no frames");
    MetricsReport rep;
    std::vector<PRCurve> all_curves;
    std::vector<std::string> seq_order;
    std::map<std::string, std::vector<size_t>> by_seq;
    for (size_t i = 0; i < frames.size(); ++i) {
        if (!by_seq.count(frames[i].sequence_id)) seq_order.push_back(frames[i].sequence_id);
        by_seq[frames[i].sequence_id].push_back(i);
    }
    double mae_sum = 0.0, sm_sum = 0.0;
    for (const auto& f : frames) {
        all_curves.push_back(pr_curve(f.prediction, f.ground_truth));
        mae_sum += mae(f.prediction, f.ground_truth);
        sm_sum += s_measure(f.prediction, f.ground_truth);
    }
    rep.pr = average_pr(all_curves);
    rep.f_beta_max = max_f_beta(rep.pr);
    rep.mae = mae_sum / static_cast<double>(frames.size());
    rep.s_measure = sm_sum / static_cast<double>(frames.size());
    for (const auto& id : seq_order) {
        SequenceMetrics sm;
        sm.sequence_id = id;
        std::vector<PRCurve> curves;
        double msum = 0.0, ssum = 0.0;
        for (size_t i : by_seq[id]) {
            curves.push_back(all_curves[i]);
            msum += mae(frames[i].prediction, frames[i].ground_truth);
            ssum += s_measure(frames[i].prediction, frames[i].ground_truth);
        }
        sm.f_beta_max = max_f_beta(average_pr(curves));
        sm.mae = msum / static_cast<double>(curves.size());
        sm.s_measure = ssum / static_cast<double>(curves.size());
        rep.per_sequence.push_back(sm);
    }
    return rep;
}

void write_report_csv(const MetricsReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/per_sequence.csv");
        if (!out) throw Error("missing_file", "cannot write " + dir + "/per_sequence.csv");
        out << "sequence_id,f_beta_max,s_measure,mae\n";
        for (const auto& s : report.per_sequence)
            out << s.sequence_id << ',' << fmt(s.f_beta_max) << ',' << fmt(s.s_measure) << ','
                << fmt(s.mae) << '\n';
        out << "overall," << fmt(report.f_beta_max) << ',' << fmt(report.s_measure) << ','
            << fmt(report.mae) << '\n';
    }
    {
        std::ofstream out(dir + "/pr_curve.csv");
        if (!out) throw Error("missing_file", "cannot write " + dir + "/pr_curve.csv");
        out << "threshold,precision,recall\n";
        for (size_t k = 0; k < report.pr.thresholds.size(); ++k)
            out << fmt(report.pr.thresholds[k]) << ',' << fmt(report.pr.precision[k]) << ','
                << fmt(report.pr.recall[k]) << '\n';
    }
}

MetricsReport read_report_csv(const std::string& dir) {
    MetricsReport rep;
    std::ifstream seq(dir + "/per_sequence.csv");
    if (!seq) throw Error("missing_file", "cannot read " + dir + "/per_sequence.csv");
    std::string line;
    std::getline(seq, line); // header
    while (std::getline(seq, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id, f, s, m;
        std::getline(ss, id, ',');
        std::getline(ss, f, ',');
        std::getline(ss, s, ',');
        std::getline(ss, m, ',');
        if (id == "overall") {
            rep.f_beta_max = std::stod(f);
            rep.s_measure = std::stod(s);
            rep.mae = std::stod(m);
        } else {
            rep.per_sequence.push_back({id, std::stod(f), std::stod(s), std::stod(m)});
        }
    }
    std::ifstream prf(dir + "/pr_curve.csv");
    if (!prf) throw Error("missing_file", "cannot read " + dir + "/pr_curve.csv");
    std::getline(prf, line);
    while (std::getline(prf, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string t, p, r;
        std::getline(ss, t, ',');
        std::getline(ss, p, ',');
        std::getline(ss, r, ',');
        rep.pr.thresholds.push_back(std::stod(t));
        rep.pr.precision.push_back(std::stod(p));
        rep.pr.recall.push_back(std::stod(r));
    }
    return rep;
}

} // namespace lgrn
