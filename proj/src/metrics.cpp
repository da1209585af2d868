#include "ffagent/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ffagent/env.hpp"
#include "ffagent/errors.hpp"

namespace ffagent {

namespace {

bool in_segments(std::size_t f, const std::vector<std::pair<int, int>>& segments) {
    for (const auto& [a, b] : segments)
        if (static_cast<int>(f) >= a && static_cast<int>(f) <= b) return true;
    return false;
}

double harmonic(double a, double b) { return (a + b) == 0.0 ? 0.0 : 2.0 * a * b / (a + b); }

}  // namespace

PRF precision_recall_f1(const std::vector<std::size_t>& selected,
                        const std::vector<std::pair<int, int>>& segments,
                        std::size_t num_frames) {
    std::size_t relevant = 0;
    for (const auto& [a, b] : segments) relevant += static_cast<std::size_t>(b - a + 1);
    std::size_t hits = 0;
    for (std::size_t f : selected) {
        if (f < 1 || f > num_frames) throw DataError("selection frame out of range");
        if (in_segments(f, segments)) ++hits;
    }
    PRF out;
    out.precision = selected.empty() ? 0.0
                                     : static_cast<double>(hits) /
                                           static_cast<double>(selected.size());
    out.recall = relevant == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(relevant);
    out.f1 = harmonic(out.precision, out.recall);
    return out;
}

double output_speedup(std::size_t num_frames, std::size_t num_selected) {
    if (num_selected == 0) throw DataError("output_speedup: empty selection");
    return static_cast<double>(num_frames) / static_cast<double>(num_selected);
}

double overall_performance(double f1, double s_hat, double s_star) {
    if (s_star < 1.0) throw ConfigError("overall_performance: S* must be >= 1");
    const double sigma_os = 0.0838 * s_star;
    const double dev = (s_hat - s_star) / sigma_os;
    const double g = std::exp(-0.5 * dev * dev);
    return harmonic(f1, g);
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DataError("roc_auc: size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc: both classes must be present");

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // average ranks over ties
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k]) pos_rank_sum += rank[k];
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double mrr(const std::vector<std::size_t>& ranks) {
    if (ranks.empty()) throw DataError("mrr: empty rank list");
    double s = 0.0;
    for (std::size_t r : ranks) {
        if (r < 1) throw DataError("mrr: ranks are 1-based");
        s += 1.0 / static_cast<double>(r);
    }
    return s / static_cast<double>(ranks.size());
}

MetricRow evaluate_selection(const std::string& video_id,
                             const std::vector<std::size_t>& selected,
                             const std::vector<std::pair<int, int>>& segments,
                             std::size_t num_frames, int s_star) {
    MetricRow row;
    row.video_id = video_id;
    row.s_star = s_star;
    row.has_ground_truth = !segments.empty();
    const PRF prf = precision_recall_f1(selected, segments, num_frames);
    row.precision = prf.precision;
    row.recall = prf.recall;
    row.f1 = prf.f1;
    row.os = output_speedup(num_frames, selected.size());
    row.op = overall_performance(row.f1, row.os, static_cast<double>(s_star));
    return row;
}

MetricRow aggregate(const std::vector<MetricRow>& rows) {
    MetricRow agg;
    agg.video_id = "aggregate";
    std::size_t n = 0;
    for (const auto& r : rows) {
        if (!r.has_ground_truth) continue;
        agg.precision += r.precision;
        agg.recall += r.recall;
        agg.f1 += r.f1;
        agg.os += r.os;
        agg.op += r.op;
        agg.s_star = r.s_star;
        ++n;
    }
    if (n == 0) throw DataError("aggregate: no videos with ground truth");
    const double dn = static_cast<double>(n);
    agg.precision /= dn;
    agg.recall /= dn;
    agg.f1 /= dn;
    agg.os /= dn;
    agg.op /= dn;
    return agg;
}

nlohmann::json report_json(const std::vector<MetricRow>& rows) {
    nlohmann::json j;
    j["videos"] = nlohmann::json::array();
    for (const auto& r : rows)
        j["videos"].push_back({{"video_id", r.video_id},
                               {"precision", r.precision},
                               {"recall", r.recall},
                               {"f1", r.f1},
                               {"os", r.os},
                               {"op", r.op},
                               {"s_star", r.s_star}});
    const MetricRow agg = aggregate(rows);
    j["aggregate"] = {{"precision", agg.precision}, {"recall", agg.recall}, {"f1", agg.f1},
                      {"os", agg.os},               {"op", agg.op},         {"s_star", agg.s_star}};
    return j;
}

std::string report_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream out;
    out << "video_id,precision,recall,f1,os,op,s_star\n";
    for (const auto& r : rows)
        out << r.video_id << ',' << r.precision << ',' << r.recall << ',' << r.f1 << ',' << r.os
            << ',' << r.op << ',' << r.s_star << "\n";
    return out.str();
}

std::vector<SweepRow> speedup_sweep(const Agent& agent, const Encoder& encoder,
                                    const std::vector<VideoSpec>& videos,
                                    const std::vector<int>& targets) {
    std::vector<SweepRow> rows;
    for (int s_star : targets) {
        SweepRow row;
        row.s_star = s_star;
        for (const auto& v : videos) {
            RolloutOptions opts;
            opts.s_star = s_star;
            opts.mode = SelectMode::Greedy;
            opts.keep_states = false;
            const EpisodeTrace trace = rollout(v, encoder, agent, opts, nullptr);
            const double err = output_speedup(v.num_frames, trace.length()) - s_star;
            row.mean_error += err;
            row.mean_abs_error += std::abs(err);
        }
        row.mean_error /= static_cast<double>(videos.size());
        row.mean_abs_error /= static_cast<double>(videos.size());
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "s_star,mean_error,mean_abs_error\n";
    for (const auto& r : rows)
        out << r.s_star << ',' << r.mean_error << ',' << r.mean_abs_error << "\n";
    return out.str();
}

}  // namespace ffagent
