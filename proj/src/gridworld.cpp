#include "blockbuild/gridworld.hpp"

#include <array>

namespace blockbuild {

namespace {

constexpr std::array<const char*, kNumBlockColors> kColorNames = {
    "red", "orange", "yellow", "green", "blue", "purple",
};

} // namespace

BlockColor parse_color(const std::string& name) {
    for (int i = 0; i < kNumBlockColors; ++i) {
        if (name == kColorNames[static_cast<std::size_t>(i)]) {
            return static_cast<BlockColor>(i);
        }
    }
    throw UnknownColor("unknown color \"" + name + "\"");
}

const char* color_name(BlockColor c) {
    return kColorNames[static_cast<std::size_t>(c)];
}

std::string to_string(const Cell& c) {
    return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + "," + std::to_string(c.z) + ")";
}

Grid::Grid(Dims dims) : dims_(dims) {
    if (dims.w <= 0 || dims.h <= 0 || dims.d <= 0) {
        throw DataError("grid dims must be positive");
    }
    cells_.assign(static_cast<std::size_t>(dims.cells()), 0);
}

bool Grid::in_bounds(const Cell& c) const {
    return c.x >= 0 && c.x < dims_.w && c.y >= 0 && c.y < dims_.h && c.z >= 0 && c.z < dims_.d;
}

int Grid::index_of(const Cell& c) const {
    return (c.x * dims_.h + c.y) * dims_.d + c.z;
}

Cell Grid::cell_at(int index) const {
    const int z = index % dims_.d;
    const int y = (index / dims_.d) % dims_.h;
    const int x = index / (dims_.d * dims_.h);
    return Cell{x, y, z};
}

bool Grid::occupied(const Cell& c) const {
    return in_bounds(c) && cells_[static_cast<std::size_t>(index_of(c))] != 0;
}

BlockColor Grid::color_at(const Cell& c) const {
    if (!in_bounds(c)) throw OutOfBounds("cell " + to_string(c) + " out of bounds");
    const std::uint8_t v = cells_[static_cast<std::size_t>(index_of(c))];
    if (v == 0) throw EmptyCell("cell " + to_string(c) + " is empty");
    return static_cast<BlockColor>(v - 1);
}

bool Grid::supported(const Cell& c) const {
    if (c.y == 0) return true;
    static constexpr std::array<std::array<int, 3>, 6> kFaces = {{
        {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1},
    }};
    for (const auto& f : kFaces) {
        if (occupied(Cell{c.x + f[0], c.y + f[1], c.z + f[2]})) return true;
    }
    return false;
}

void Grid::set(const Cell& c, BlockColor color) {
    if (!in_bounds(c)) throw OutOfBounds("cell " + to_string(c) + " out of bounds");
    cells_[static_cast<std::size_t>(index_of(c))] = static_cast<std::uint8_t>(color) + 1;
}

void Grid::clear(const Cell& c) {
    if (!in_bounds(c)) throw OutOfBounds("cell " + to_string(c) + " out of bounds");
    cells_[static_cast<std::size_t>(index_of(c))] = 0;
}

int Grid::block_count() const {
    int n = 0;
    for (std::uint8_t v : cells_) n += v != 0;
    return n;
}

std::vector<std::pair<Cell, BlockColor>> Grid::blocks() const {
    std::vector<std::pair<Cell, BlockColor>> out;
    for (int i = 0; i < dims_.cells(); ++i) {
        const std::uint8_t v = cells_[static_cast<std::size_t>(i)];
        if (v != 0) out.emplace_back(cell_at(i), static_cast<BlockColor>(v - 1));
    }
    return out;
}

std::string to_string(const Action& a) {
    switch (a.kind) {
        case ActionKind::Stop: return "stop";
        case ActionKind::Place:
            return std::string("place ") + color_name(a.color) + " " + to_string(a.cell);
        case ActionKind::Remove: return "remove " + to_string(a.cell);
    }
    return "?";
}

std::vector<Action> feasible(const Grid& grid) {
    std::vector<Action> out;
    out.push_back(Action::stop());
    const int n = grid.dims().cells();
    for (int i = 0; i < n; ++i) {
        const Cell c = grid.cell_at(i);
        if (!grid.occupied(c) && grid.supported(c)) {
            for (int col = 0; col < kNumBlockColors; ++col) {
                out.push_back(Action::place(static_cast<BlockColor>(col), c));
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        const Cell c = grid.cell_at(i);
        if (grid.occupied(c)) out.push_back(Action::remove(c));
    }
    return out;
}

Grid apply(const Grid& grid, const Action& action) {
    Grid next = grid;
    switch (action.kind) {
        case ActionKind::Stop:
            break;
        case ActionKind::Place: {
            const Cell& c = action.cell;
            if (!next.in_bounds(c)) throw OutOfBounds("place at " + to_string(c) + " out of bounds");
            if (next.occupied(c)) throw OccupiedCell("place onto occupied cell " + to_string(c));
            if (!next.supported(c)) {
                throw UnsupportedPlacement("place at " + to_string(c) +
                                           " is neither on the ground nor face-adjacent to a block");
            }
            next.set(c, action.color);
            break;
        }
        case ActionKind::Remove: {
            const Cell& c = action.cell;
            if (!next.in_bounds(c)) throw OutOfBounds("remove at " + to_string(c) + " out of bounds");
            if (!next.occupied(c)) throw EmptyCell("remove from empty cell " + to_string(c));
            next.clear(c);
            break;
        }
    }
    return next;
}

NetChange diff(const Grid& before, const Grid& after) {
    if (before.dims() != after.dims()) {
        throw DimsMismatch("diff over grids with different dims");
    }
    NetChange out;
    const int n = before.dims().cells();
    for (int i = 0; i < n; ++i) {
        const Cell c = before.cell_at(i);
        const bool b = before.occupied(c);
        const bool a = after.occupied(c);
        if (b && a) {
            const BlockColor cb = before.color_at(c);
            const BlockColor ca = after.color_at(c);
            if (cb != ca) {
                // Recolor counts as remove(old) + add(new), but a cell must
                // not appear on both sides of a NetChange; keep the pair as
                // the two directed entries the metric counts.
                out.removed.emplace_back(c, cb);
                out.added.emplace_back(c, ca);
            }
        } else if (!b && a) {
            out.added.emplace_back(c, after.color_at(c));
        } else if (b && !a) {
            out.removed.emplace_back(c, before.color_at(c));
        }
    }
    return out;
}

Grid replay(const Grid& initial, const ActionSeq& actions) {
    Grid g = initial;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        try {
            g = apply(g, actions[i]);
        } catch (const DataError& e) {
            throw ReplayError(i, e.what());
        }
    }
    return g;
}

} // namespace blockbuild
