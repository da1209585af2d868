#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ffagent {

struct Encoder;
struct Agent;
struct VideoSpec;

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Relevant frames are those inside the ground-truth segments. Empty-set
// conventions: P=0 when nothing is selected; R=1 when there are no relevant
// frames (such videos are excluded from aggregates by the callers).
PRF precision_recall_f1(const std::vector<std::size_t>& selected,
                        const std::vector<std::pair<int, int>>& segments, std::size_t num_frames);

double output_speedup(std::size_t num_frames, std::size_t num_selected);

// Harmonic mean of F1 and the Gaussian speed-up accuracy with
// sigma_OS = 0.0838 * S*; 0 when both terms are 0.
double overall_performance(double f1, double s_hat, double s_star);

// Rank statistic with averaged ties; both classes must be present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean reciprocal rank over 1-based ranks.
double mrr(const std::vector<std::size_t>& ranks);

struct MetricRow {
    std::string video_id;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double os = 0.0;
    double op = 0.0;
    int s_star = 0;
    bool has_ground_truth = true;
};

MetricRow evaluate_selection(const std::string& video_id,
                             const std::vector<std::size_t>& selected,
                             const std::vector<std::pair<int, int>>& segments,
                             std::size_t num_frames, int s_star);

// Unweighted mean over videos with ground truth.
MetricRow aggregate(const std::vector<MetricRow>& rows);

nlohmann::json report_json(const std::vector<MetricRow>& rows);
std::string report_csv(const std::vector<MetricRow>& rows);

struct SweepRow {
    int s_star = 0;
    double mean_error = 0.0;      // mean (OS - S*)
    double mean_abs_error = 0.0;  // mean |OS - S*|
};

std::vector<SweepRow> speedup_sweep(const Agent& agent, const Encoder& encoder,
                                    const std::vector<VideoSpec>& videos,
                                    const std::vector<int>& targets);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace ffagent
