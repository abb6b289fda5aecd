#pragma once

#include "blockbuild/corpus.hpp"
#include "blockbuild/gridworld.hpp"
#include "blockbuild/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace blockbuild {

struct Metrics {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;

    /// Zero-denominator conventions: recall/precision are 0 when undefined,
    /// f1 is 0 when precision + recall is 0.
    static Metrics from_counts(long long tp, long long fp, long long fn);
};

/// A predicted item matches a gold item iff direction, cell and color agree.
Metrics net_action_metrics(const NetChange& pred, const NetChange& gold);

using TurnDecoder =
    std::function<ActionSeq(const Episode& episode, int turn_index, const Grid& grid_at_turn)>;

/// Micro-averaged net-change counts over every builder turn; each turn starts
/// from the gold-replayed grid.
Metrics evaluate_with_decoder(const std::vector<Episode>& episodes, const TurnDecoder& decoder,
                              int threads = 1);

/// evaluate_with_decoder over greedy model decoding.
Metrics evaluate_model(const ModelConfig& config, const ParamSet<float>& params,
                       const Vocabulary& vocab, const std::vector<Episode>& episodes,
                       int max_steps, int threads = 1);

/// Table-1-style presentation: values x100, one decimal, half-up.
std::string report_table(const std::vector<std::pair<std::string, Metrics>>& rows);

/// "34.5"-style fixed-point rendering of a ratio, half-up at the tenths digit.
std::string format_percent(double ratio);

void write_metrics_csv(const std::vector<std::pair<std::string, Metrics>>& rows,
                       const std::filesystem::path& path);

} // namespace blockbuild
