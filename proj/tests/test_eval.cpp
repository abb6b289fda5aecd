#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blockbuild/eval.hpp"
#include "blockbuild/rng.hpp"

#include "support/synth.hpp"
#include "support/test_util.hpp"

#include <set>

using namespace blockbuild;
namespace tu = blockbuild::testutil;

namespace {

NetChange random_net_change(SplitMix& rng, const Dims& dims) {
    // sample disjoint cell sets for added/removed; occasionally leave a side empty
    std::vector<Cell> cells;
    for (int i = 0; i < dims.cells(); ++i) {
        const int z = i % dims.d;
        const int y = (i / dims.d) % dims.h;
        const int x = i / (dims.d * dims.h);
        cells.push_back(Cell{x, y, z});
    }
    for (std::size_t i = cells.size(); i > 1; --i) {
        std::swap(cells[i - 1], cells[static_cast<std::size_t>(rng.below(static_cast<int>(i)))]);
    }
    NetChange nc;
    const int n_add = rng.below(5);
    const int n_rem = rng.below(5);
    std::size_t k = 0;
    for (int i = 0; i < n_add && k < cells.size(); ++i) {
        nc.added.emplace_back(cells[k++], static_cast<BlockColor>(rng.below(kNumBlockColors)));
    }
    for (int i = 0; i < n_rem && k < cells.size(); ++i) {
        nc.removed.emplace_back(cells[k++], static_cast<BlockColor>(rng.below(kNumBlockColors)));
    }
    return nc;
}

// quadratic brute-force comparison, independent of the implementation
Metrics oracle_metrics(const NetChange& pred, const NetChange& gold) {
    auto items = [](const NetChange& nc) {
        std::vector<std::tuple<bool, Cell, BlockColor>> out;
        for (const auto& [c, col] : nc.added) out.emplace_back(true, c, col);
        for (const auto& [c, col] : nc.removed) out.emplace_back(false, c, col);
        return out;
    };
    const auto p = items(pred);
    const auto g = items(gold);
    long long tp = 0;
    for (const auto& a : p) {
        for (const auto& b : g) {
            if (a == b) {
                ++tp;
                break;
            }
        }
    }
    const long long fp = static_cast<long long>(p.size()) - tp;
    const long long fn = static_cast<long long>(g.size()) - tp;
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
    m.precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
    m.f1 = m.recall + m.precision == 0.0 ? 0.0
                                         : 2 * m.recall * m.precision / (m.recall + m.precision);
    return m;
}

} // namespace

TEST_CASE("net_action_metrics on the worked examples") {
    const NetChange single{{{Cell{1, 0, 1}, BlockColor::Red}}, {}};
    const Metrics identical = net_action_metrics(single, single);
    CHECK(identical.tp == 1);
    CHECK(identical.precision == 1.0);
    CHECK(identical.recall == 1.0);
    CHECK(identical.f1 == 1.0);

    // pred = {A, B}, gold = {A, C}
    const NetChange pred{{{Cell{0, 0, 0}, BlockColor::Red}, {Cell{1, 0, 0}, BlockColor::Blue}}, {}};
    const NetChange gold{{{Cell{0, 0, 0}, BlockColor::Red}, {Cell{2, 0, 0}, BlockColor::Green}}, {}};
    const Metrics half = net_action_metrics(pred, gold);
    CHECK(half.tp == 1);
    CHECK(half.fp == 1);
    CHECK(half.fn == 1);
    CHECK(half.precision == doctest::Approx(0.5));
    CHECK(half.recall == doctest::Approx(0.5));
    CHECK(half.f1 == doctest::Approx(0.5));

    const Metrics nothing = net_action_metrics(NetChange{}, single);
    CHECK(nothing.precision == 0.0);
    CHECK(nothing.recall == 0.0);
    CHECK(nothing.f1 == 0.0);

    // direction matters: an Added item never matches a Removed one
    const NetChange removed{{}, {{Cell{1, 0, 1}, BlockColor::Red}}};
    CHECK(net_action_metrics(single, removed).tp == 0);
}

TEST_CASE("swapping pred and gold exchanges precision and recall") {
    SplitMix rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const NetChange a = random_net_change(rng, Dims{3, 3, 3});
        const NetChange b = random_net_change(rng, Dims{3, 3, 3});
        const Metrics ab = net_action_metrics(a, b);
        const Metrics ba = net_action_metrics(b, a);
        CHECK(ab.tp == ba.tp);
        CHECK(ab.fp == ba.fn);
        CHECK(ab.precision == ba.recall);
        CHECK(ab.recall == ba.precision);
        CHECK(ab.f1 == doctest::Approx(ba.f1));
    }
}

TEST_CASE("exact agreement with the brute-force oracle") {
    SplitMix rng(6);
    for (int trial = 0; trial < 500; ++trial) {
        const NetChange a = random_net_change(rng, Dims{4, 3, 4});
        const NetChange b = random_net_change(rng, Dims{4, 3, 4});
        const Metrics got = net_action_metrics(a, b);
        const Metrics want = oracle_metrics(a, b);
        CHECK(got.tp == want.tp);
        CHECK(got.fp == want.fp);
        CHECK(got.fn == want.fn);
        CHECK(got.precision == want.precision);
        CHECK(got.recall == want.recall);
        CHECK(got.f1 == want.f1);
    }
}

TEST_CASE("micro-averaged counts over a partition equal counts over the union") {
    // the worked example first: (1,0,1) + (1,1,0) -> P = R = F1 = 2/3
    const Metrics merged = Metrics::from_counts(1 + 1, 0 + 1, 1 + 0);
    CHECK(merged.precision == doctest::Approx(2.0 / 3.0));
    CHECK(merged.recall == doctest::Approx(2.0 / 3.0));
    CHECK(merged.f1 == doctest::Approx(2.0 / 3.0));

    SplitMix rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        long long tp = 0, fp = 0, fn = 0;
        long long tp1 = 0, fp1 = 0, fn1 = 0, tp2 = 0, fp2 = 0, fn2 = 0;
        for (int turn = 0; turn < 6; ++turn) {
            const NetChange p = random_net_change(rng, Dims{3, 3, 3});
            const NetChange g = random_net_change(rng, Dims{3, 3, 3});
            const Metrics m = net_action_metrics(p, g);
            tp += m.tp;
            fp += m.fp;
            fn += m.fn;
            if (turn < 3) {
                tp1 += m.tp;
                fp1 += m.fp;
                fn1 += m.fn;
            } else {
                tp2 += m.tp;
                fp2 += m.fp;
                fn2 += m.fn;
            }
        }
        const Metrics whole = Metrics::from_counts(tp, fp, fn);
        const Metrics parts = Metrics::from_counts(tp1 + tp2, fp1 + fp2, fn1 + fn2);
        CHECK(whole.tp == parts.tp);
        CHECK(whole.precision == parts.precision);
        CHECK(whole.recall == parts.recall);
        CHECK(whole.f1 == parts.f1);
    }
}

TEST_CASE("evaluate_with_decoder scores an oracle stub at F1 = 1 and a stop stub at 0") {
    synth::Spec spec;
    spec.dims = Dims{4, 3, 4};
    spec.episodes = 6;
    spec.seed = 9;
    const std::vector<Episode> episodes = synth::make_episodes(spec);

    const Metrics oracle = evaluate_with_decoder(
        episodes,
        [&](const Episode& ep, int turn_index, const Grid&) {
            for (const GoldTurn& t : ep.gold_turns) {
                if (t.turn_index == turn_index) return t.actions;
            }
            return ActionSeq{};
        });
    CHECK(oracle.f1 == 1.0);
    CHECK(oracle.fp == 0);
    CHECK(oracle.fn == 0);

    const Metrics stop = evaluate_with_decoder(
        episodes, [](const Episode&, int, const Grid&) { return ActionSeq{}; });
    CHECK(stop.f1 == 0.0);
    CHECK(stop.tp == 0);

    // deterministic regardless of worker count
    const Metrics threaded = evaluate_with_decoder(
        episodes, [](const Episode&, int, const Grid&) { return ActionSeq{}; }, 4);
    CHECK(threaded.fn == stop.fn);
}

TEST_CASE("report_table renders the Table-1 presentation digit for digit") {
    Metrics perfect = Metrics::from_counts(3, 0, 0);
    const std::string all100 = report_table({{"stub", perfect}});
    CHECK(all100.find("100.0 100.0 100.0") != std::string::npos);

    Metrics ours;
    ours.recall = 0.285;
    ours.precision = 0.463;
    ours.f1 = 0.353;
    const std::string table = report_table({{"ours", ours}});
    CHECK(table.find("Model") != std::string::npos);
    CHECK(table.find("Recall Precision F1") != std::string::npos);
    CHECK(table.find("28.5 46.3 35.3") != std::string::npos);

    CHECK(format_percent(0.3449) == "34.5"); // half-up at the displayed digit
    CHECK(format_percent(0.0) == "0.0");
    CHECK(format_percent(1.0) == "100.0");
    CHECK(format_percent(0.9995) == "100.0");
    CHECK(format_percent(0.99949) == "99.9");
}

TEST_CASE("metrics csv carries counts and full-precision ratios") {
    const auto dir = tu::temp_dir("metrics_csv");
    Metrics m = Metrics::from_counts(2, 1, 3);
    write_metrics_csv({{"ours", m}}, dir / "metrics.csv");
    const std::string text = tu::read_file_bytes(dir / "metrics.csv");
    CHECK(text.find("model,recall,precision,f1,tp,fp,fn\n") == 0);
    CHECK(text.find("ours,") != std::string::npos);
    CHECK(text.find(",2,1,3\n") != std::string::npos);
}
