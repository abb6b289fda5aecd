#pragma once

#include "blockbuild/errors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace blockbuild {

// ---------------------------------------------------------------------------
// Colors and cells
// ---------------------------------------------------------------------------

enum class BlockColor : std::uint8_t { Red, Orange, Yellow, Green, Blue, Purple };

inline constexpr int kNumBlockColors = 6;

struct UnknownColor : DataError {
    using DataError::DataError;
};

BlockColor parse_color(const std::string& name);
const char* color_name(BlockColor c);

struct Cell {
    int x = 0;
    int y = 0;
    int z = 0;

    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

std::string to_string(const Cell& c);

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

struct Dims {
    int w = 11;
    int h = 9;
    int d = 11;

    friend bool operator==(const Dims&, const Dims&) = default;

    int cells() const { return w * h * d; }
};

struct OutOfBounds : DataError {
    using DataError::DataError;
};
struct OccupiedCell : DataError {
    using DataError::DataError;
};
struct EmptyCell : DataError {
    using DataError::DataError;
};
struct UnsupportedPlacement : DataError {
    using DataError::DataError;
};
struct DimsMismatch : DataError {
    using DataError::DataError;
};

// Voxel occupancy map with value semantics. Internally a flat byte grid:
// 0 = empty, 1 + color otherwise.
class Grid {
public:
    Grid() : Grid(Dims{}) {}
    explicit Grid(Dims dims);

    const Dims& dims() const { return dims_; }

    bool in_bounds(const Cell& c) const;
    bool occupied(const Cell& c) const;
    /// Color at an occupied cell; throws EmptyCell otherwise.
    BlockColor color_at(const Cell& c) const;

    /// Canonical flat index: x-major, then y, then z.
    int index_of(const Cell& c) const;
    Cell cell_at(int index) const;

    /// Ground (y = 0) or at least one face-adjacent occupied neighbor.
    bool supported(const Cell& c) const;

    void set(const Cell& c, BlockColor color); // unchecked support; bounds checked
    void clear(const Cell& c);

    int block_count() const;
    /// Occupied cells in canonical index order.
    std::vector<std::pair<Cell, BlockColor>> blocks() const;

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Dims dims_;
    std::vector<std::uint8_t> cells_;
};

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

enum class ActionKind : std::uint8_t { Stop, Place, Remove };

struct Action {
    ActionKind kind = ActionKind::Stop;
    Cell cell{};
    BlockColor color = BlockColor::Red; // meaningful for Place only

    static Action stop() { return Action{}; }
    static Action place(BlockColor c, const Cell& at) { return {ActionKind::Place, at, c}; }
    static Action remove(const Cell& at) { return {ActionKind::Remove, at, BlockColor::Red}; }

    friend bool operator==(const Action& a, const Action& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case ActionKind::Stop: return true;
            case ActionKind::Remove: return a.cell == b.cell;
            case ActionKind::Place: return a.cell == b.cell && a.color == b.color;
        }
        return false;
    }
};

using ActionSeq = std::vector<Action>;

std::string to_string(const Action& a);

/// All actions applicable to `grid`, in canonical order: Stop first, then
/// Place by cell index then color, then Remove by cell index.
std::vector<Action> feasible(const Grid& grid);

/// Pure transition; the input grid is copied, never mutated.
Grid apply(const Grid& grid, const Action& action);

// ---------------------------------------------------------------------------
// Net changes
// ---------------------------------------------------------------------------

struct NetChange {
    // Sorted by canonical cell order; a cell appears at most once per side
    // and never on both sides.
    std::vector<std::pair<Cell, BlockColor>> added;
    std::vector<std::pair<Cell, BlockColor>> removed;

    bool empty() const { return added.empty() && removed.empty(); }

    friend bool operator==(const NetChange&, const NetChange&) = default;
};

NetChange diff(const Grid& before, const Grid& after);

struct ReplayError : DataError {
    ReplayError(std::size_t step, const std::string& what)
        : DataError("step " + std::to_string(step) + ": " + what), step_index(step) {}
    std::size_t step_index;
};

/// Left-fold of apply. Support is checked only at placement time; blocks may
/// end up floating after their support is removed.
Grid replay(const Grid& initial, const ActionSeq& actions);

} // namespace blockbuild
