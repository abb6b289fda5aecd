#include "blockbuild/eval.hpp"

#include "blockbuild/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <tuple>

namespace blockbuild {

Metrics Metrics::from_counts(long long tp, long long fp, long long fn) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

namespace {

using Item = std::tuple<int, int, int, int, int>; // direction, x, y, z, color

std::vector<Item> items_of(const NetChange& nc) {
    std::vector<Item> out;
    out.reserve(nc.added.size() + nc.removed.size());
    for (const auto& [cell, color] : nc.added) {
        out.emplace_back(0, cell.x, cell.y, cell.z, static_cast<int>(color));
    }
    for (const auto& [cell, color] : nc.removed) {
        out.emplace_back(1, cell.x, cell.y, cell.z, static_cast<int>(color));
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

Metrics net_action_metrics(const NetChange& pred, const NetChange& gold) {
    const std::vector<Item> p = items_of(pred);
    const std::vector<Item> g = items_of(gold);
    std::vector<Item> common;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
    const long long tp = static_cast<long long>(common.size());
    return Metrics::from_counts(tp, static_cast<long long>(p.size()) - tp,
                                static_cast<long long>(g.size()) - tp);
}

Metrics evaluate_with_decoder(const std::vector<Episode>& episodes, const TurnDecoder& decoder,
                              int threads) {
    struct Counts {
        long long tp = 0, fp = 0, fn = 0;
        std::string error;
    };
    std::vector<Counts> per_episode(episodes.size());

    parallel_for(episodes.size(), threads, [&](int, std::size_t i) {
        const Episode& ep = episodes[i];
        try {
            Grid grid = ep.initial_world;
            for (const GoldTurn& turn : ep.gold_turns) {
                const ActionSeq pred = decoder(ep, turn.turn_index, grid);
                const Grid pred_after = replay(grid, pred);
                const Grid gold_after = replay(grid, turn.actions);
                const Metrics m = net_action_metrics(diff(grid, pred_after), diff(grid, gold_after));
                per_episode[i].tp += m.tp;
                per_episode[i].fp += m.fp;
                per_episode[i].fn += m.fn;
                grid = gold_after; // evaluation context follows gold history
            }
        } catch (const std::exception& e) {
            per_episode[i].error = e.what();
        }
    });

    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < per_episode.size(); ++i) {
        if (!per_episode[i].error.empty()) {
            throw DataError("episode " + episodes[i].id + ": " + per_episode[i].error);
        }
        tp += per_episode[i].tp;
        fp += per_episode[i].fp;
        fn += per_episode[i].fn;
    }
    return Metrics::from_counts(tp, fp, fn);
}

Metrics evaluate_model(const ModelConfig& config, const ParamSet<float>& params,
                       const Vocabulary& vocab, const std::vector<Episode>& episodes,
                       int max_steps, int threads) {
    // a no-grad clone keeps the shared forward passes entirely read-only
    const ParamSet<float> frozen = clone_params(params);
    return evaluate_with_decoder(
        episodes,
        [&](const Episode& ep, int turn_index, const Grid& grid) {
            return decode_actions(config, frozen, vocab, ep, turn_index, grid, max_steps);
        },
        threads);
}

std::string format_percent(double ratio) {
    const long long tenths = static_cast<long long>(std::floor(ratio * 1000.0 + 0.5));
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

std::string report_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
    std::size_t name_width = 5; // "Model"
    for (const auto& [name, m] : rows) name_width = std::max(name_width, name.size());

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << "Model"
        << "Recall Precision F1\n";
    for (const auto& [name, m] : rows) {
        out << std::left << std::setw(static_cast<int>(name_width) + 2) << name
            << format_percent(m.recall) << " " << format_percent(m.precision) << " "
            << format_percent(m.f1) << "\n";
    }
    return out.str();
}

void write_metrics_csv(const std::vector<std::pair<std::string, Metrics>>& rows,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write metrics file " + path.string());
    out << "model,recall,precision,f1,tp,fp,fn\n";
    out << std::setprecision(17);
    for (const auto& [name, m] : rows) {
        out << name << "," << m.recall << "," << m.precision << "," << m.f1 << "," << m.tp << ","
            << m.fp << "," << m.fn << "\n";
    }
}

} // namespace blockbuild
