#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blockbuild/gridworld.hpp"
#include "blockbuild/rng.hpp"

#include <algorithm>
#include <set>

using namespace blockbuild;

namespace {

// Independent brute-force enumeration of the feasibility rule, kept separate
// from the implementation on purpose.
std::vector<Action> oracle_feasible(const Grid& g) {
    std::vector<Action> out;
    out.push_back(Action::stop());
    const Dims& d = g.dims();
    for (int x = 0; x < d.w; ++x) {
        for (int y = 0; y < d.h; ++y) {
            for (int z = 0; z < d.d; ++z) {
                const Cell c{x, y, z};
                if (g.occupied(c)) continue;
                bool ok = y == 0;
                const int dx[] = {1, -1, 0, 0, 0, 0};
                const int dy[] = {0, 0, 1, -1, 0, 0};
                const int dz[] = {0, 0, 0, 0, 1, -1};
                for (int i = 0; i < 6 && !ok; ++i) {
                    ok = g.occupied(Cell{x + dx[i], y + dy[i], z + dz[i]});
                }
                if (!ok) continue;
                for (int col = 0; col < kNumBlockColors; ++col) {
                    out.push_back(Action::place(static_cast<BlockColor>(col), c));
                }
            }
        }
    }
    for (int x = 0; x < d.w; ++x) {
        for (int y = 0; y < d.h; ++y) {
            for (int z = 0; z < d.d; ++z) {
                if (g.occupied(Cell{x, y, z})) out.push_back(Action::remove(Cell{x, y, z}));
            }
        }
    }
    return out;
}

bool contains(const std::vector<Action>& v, const Action& a) {
    return std::find(v.begin(), v.end(), a) != v.end();
}

Grid random_grid(Dims dims, int steps, SplitMix& rng) {
    Grid g(dims);
    for (int i = 0; i < steps; ++i) {
        const std::vector<Action> options = feasible(g);
        g = apply(g, options[static_cast<std::size_t>(rng.below(static_cast<int>(options.size())))]);
    }
    return g;
}

} // namespace

TEST_CASE("color parsing covers exactly the six names") {
    CHECK(parse_color("red") == BlockColor::Red);
    CHECK(parse_color("purple") == BlockColor::Purple);
    CHECK_THROWS_AS(parse_color("pink"), UnknownColor);
    CHECK_THROWS_AS(parse_color("RED"), UnknownColor);
}

TEST_CASE("empty 2x2x2 grid offers stop plus ground placements") {
    const Grid g(Dims{2, 2, 2});
    const std::vector<Action> acts = feasible(g);
    // Stop + 6 colors x 4 ground cells
    CHECK(acts.size() == 25);
    CHECK(acts.front() == Action::stop());
    for (const Action& a : acts) {
        if (a.kind == ActionKind::Place) CHECK(a.cell.y == 0);
        CHECK(a.kind != ActionKind::Remove);
    }
}

TEST_CASE("fully occupied grid offers stop plus removes only") {
    Grid g(Dims{2, 2, 2});
    for (int i = 0; i < 8; ++i) g.set(g.cell_at(i), BlockColor::Green);
    const std::vector<Action> acts = feasible(g);
    CHECK(acts.size() == 9);
    for (std::size_t i = 1; i < acts.size(); ++i) CHECK(acts[i].kind == ActionKind::Remove);
}

TEST_CASE("single block enables face-adjacent placement") {
    Grid g(Dims{2, 2, 2});
    g.set(Cell{0, 0, 0}, BlockColor::Red);
    const std::vector<Action> acts = feasible(g);
    CHECK(contains(acts, Action::place(BlockColor::Blue, Cell{1, 0, 0})));
    CHECK(contains(acts, Action::place(BlockColor::Blue, Cell{0, 0, 1})));
    CHECK(contains(acts, Action::place(BlockColor::Blue, Cell{1, 0, 1})));
    CHECK(contains(acts, Action::place(BlockColor::Blue, Cell{0, 1, 0})));
    CHECK_FALSE(contains(acts, Action::place(BlockColor::Blue, Cell{1, 1, 1})));
    CHECK(contains(acts, Action::remove(Cell{0, 0, 0})));
}

TEST_CASE("feasible matches the brute-force oracle on random grids") {
    SplitMix rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Grid g = random_grid(Dims{3, 3, 3}, rng.below(12), rng);
        CHECK(feasible(g) == oracle_feasible(g));
    }
}

TEST_CASE("apply validates and never mutates its input") {
    const Grid empty(Dims{2, 6, 2});
    const Grid placed = apply(empty, Action::place(BlockColor::Red, Cell{0, 0, 0}));
    CHECK(placed.occupied(Cell{0, 0, 0}));
    CHECK_FALSE(empty.occupied(Cell{0, 0, 0}));

    CHECK_THROWS_AS(apply(empty, Action::remove(Cell{0, 0, 0})), EmptyCell);
    CHECK_THROWS_AS(apply(empty, Action::place(BlockColor::Red, Cell{0, 5, 0})),
                    UnsupportedPlacement);
    CHECK_THROWS_AS(apply(empty, Action::place(BlockColor::Red, Cell{5, 0, 0})), OutOfBounds);
    CHECK_THROWS_AS(apply(placed, Action::place(BlockColor::Blue, Cell{0, 0, 0})), OccupiedCell);
    CHECK(apply(placed, Action::stop()) == placed);
}

TEST_CASE("every feasible action applies, every infeasible place/remove errors") {
    SplitMix rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid g = random_grid(Dims{3, 3, 3}, rng.below(10), rng);
        const std::vector<Action> ok = feasible(g);
        for (const Action& a : ok) CHECK_NOTHROW(apply(g, a));
        for (int i = 0; i < g.dims().cells(); ++i) {
            const Cell c = g.cell_at(i);
            const Action place = Action::place(BlockColor::Red, c);
            if (!contains(ok, place)) CHECK_THROWS_AS(apply(g, place), DataError);
            const Action remove = Action::remove(c);
            if (!contains(ok, remove)) CHECK_THROWS_AS(apply(g, remove), DataError);
        }
    }
}

TEST_CASE("diff identity, addition and recolor") {
    Grid g(Dims{3, 2, 3});
    CHECK(diff(g, g).empty());

    Grid one = apply(g, Action::place(BlockColor::Red, Cell{1, 0, 1}));
    const NetChange added = diff(g, one);
    CHECK(added.added == std::vector<std::pair<Cell, BlockColor>>{{Cell{1, 0, 1}, BlockColor::Red}});
    CHECK(added.removed.empty());

    Grid recolored = one;
    recolored.clear(Cell{1, 0, 1});
    recolored.set(Cell{1, 0, 1}, BlockColor::Blue);
    const NetChange change = diff(one, recolored);
    CHECK(change.added ==
          std::vector<std::pair<Cell, BlockColor>>{{Cell{1, 0, 1}, BlockColor::Blue}});
    CHECK(change.removed ==
          std::vector<std::pair<Cell, BlockColor>>{{Cell{1, 0, 1}, BlockColor::Red}});

    CHECK_THROWS_AS(diff(g, Grid(Dims{2, 2, 2})), DimsMismatch);
}

TEST_CASE("diff of a single applied action has at most one entry") {
    SplitMix rng(37);
    for (int trial = 0; trial < 40; ++trial) {
        const Grid g = random_grid(Dims{3, 3, 3}, rng.below(10), rng);
        for (const Action& a : feasible(g)) {
            const NetChange nc = diff(g, apply(g, a));
            CHECK(nc.added.size() + nc.removed.size() <= 1);
        }
    }
}

TEST_CASE("diff is mirrored under argument swap") {
    SplitMix rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        const Grid a = random_grid(Dims{3, 3, 3}, rng.below(10), rng);
        const Grid b = random_grid(Dims{3, 3, 3}, rng.below(10), rng);
        const NetChange ab = diff(a, b);
        const NetChange ba = diff(b, a);
        CHECK(ab.added == ba.removed);
        CHECK(ab.removed == ba.added);
    }
}

TEST_CASE("replay folds apply and leaves floating blocks") {
    const Grid empty(Dims{2, 3, 2});
    const Grid end = replay(empty, {Action::place(BlockColor::Red, Cell{0, 0, 0}),
                                    Action::place(BlockColor::Red, Cell{0, 1, 0}),
                                    Action::remove(Cell{0, 0, 0})});
    CHECK(end.block_count() == 1);
    CHECK(end.occupied(Cell{0, 1, 0}));

    CHECK(replay(empty, {}) == empty);

    try {
        replay(empty, {Action::remove(Cell{0, 0, 0})});
        FAIL("expected ReplayError");
    } catch (const ReplayError& e) {
        CHECK(e.step_index == 0);
    }
}
