#include "synth.hpp"

#include "blockbuild/tokenizer.hpp"

namespace blockbuild::synth {

namespace {

const std::vector<std::string> kPrefixes = {"", "please", "now", "next"};
const std::vector<std::string> kPlaceVerbs = {"place", "put", "add"};
const std::vector<std::string> kAcks = {"ok", "done", "got it", "okay"};

template <class T>
const T& pick(const std::vector<T>& v, RandomSource& rng) {
    return v[static_cast<std::size_t>(rng.below(static_cast<int>(v.size())))];
}

std::string cell_phrase(const Cell& c) {
    return "column " + std::to_string(c.x) + " height " + std::to_string(c.y) + " depth " +
           std::to_string(c.z);
}

std::string place_sentence(BlockColor color, const Cell& cell, RandomSource& rng) {
    std::string s = pick(kPrefixes, rng);
    if (!s.empty()) s += ' ';
    s += pick(kPlaceVerbs, rng);
    s += " a ";
    s += color_name(color);
    s += " block at ";
    s += cell_phrase(cell);
    return s;
}

std::string remove_sentence(const Cell& cell, RandomSource& rng) {
    std::string s = pick(kPrefixes, rng);
    if (!s.empty()) s += ' ';
    s += "remove the block at ";
    s += cell_phrase(cell);
    return s;
}

std::vector<Cell> placeable_cells(const Grid& g) {
    std::vector<Cell> out;
    for (int i = 0; i < g.dims().cells(); ++i) {
        const Cell c = g.cell_at(i);
        if (!g.occupied(c) && g.supported(c)) out.push_back(c);
    }
    return out;
}

std::vector<Cell> occupied_cells(const Grid& g) {
    std::vector<Cell> out;
    for (int i = 0; i < g.dims().cells(); ++i) {
        const Cell c = g.cell_at(i);
        if (g.occupied(c)) out.push_back(c);
    }
    return out;
}

// One gold action plus the sentence describing it; mutates the grid.
std::pair<Action, std::string> sample_step(Grid& g, RandomSource& rng) {
    const std::vector<Cell> occupied = occupied_cells(g);
    const bool do_remove = !occupied.empty() && rng.uniform() < 0.2;
    if (do_remove) {
        const Cell cell = pick(occupied, rng);
        const Action a = Action::remove(cell);
        g = apply(g, a);
        return {a, remove_sentence(cell, rng)};
    }
    const std::vector<Cell> open = placeable_cells(g);
    const Cell cell = pick(open, rng);
    const BlockColor color = static_cast<BlockColor>(rng.below(kNumBlockColors));
    const Action a = Action::place(color, cell);
    g = apply(g, a);
    return {a, place_sentence(color, cell, rng)};
}

} // namespace

std::vector<Episode> make_episodes(const Spec& spec) {
    SplitMix rng(spec.seed);
    std::vector<Episode> out;
    out.reserve(static_cast<std::size_t>(spec.episodes));
    for (int e = 0; e < spec.episodes; ++e) {
        Episode ep;
        ep.id = "synth-" + std::to_string(e);
        ep.initial_world = Grid(spec.dims);

        // a few seed blocks so removals show up
        const int seeds = rng.below(4);
        for (int s = 0; s < seeds; ++s) {
            const std::vector<Cell> open = placeable_cells(ep.initial_world);
            if (open.empty()) break;
            ep.initial_world.set(pick(open, rng), static_cast<BlockColor>(rng.below(kNumBlockColors)));
        }

        Grid g = ep.initial_world;
        const int turns = 1 + rng.below(spec.max_turns);
        for (int t = 0; t < turns; ++t) {
            const int actions = 1 + rng.below(spec.max_actions_per_turn);
            GoldTurn turn;
            std::string instruction;
            for (int a = 0; a < actions; ++a) {
                auto [action, sentence] = sample_step(g, rng);
                turn.actions.push_back(action);
                if (!instruction.empty()) instruction += " then ";
                instruction += sentence;
            }
            Utterance architect;
            architect.speaker = Speaker::Architect;
            architect.text = normalize_text(instruction);
            architect.turn_index = static_cast<int>(ep.dialogue.size());
            ep.dialogue.push_back(architect);

            Utterance builder;
            builder.speaker = Speaker::Builder;
            builder.text = normalize_text(pick(kAcks, rng));
            builder.turn_index = static_cast<int>(ep.dialogue.size());
            ep.dialogue.push_back(builder);

            turn.turn_index = builder.turn_index;
            ep.gold_turns.push_back(std::move(turn));
        }

        const double frac = (static_cast<double>(e) + 0.5) / static_cast<double>(spec.episodes);
        ep.split = frac < spec.train_fraction                         ? Split::Train
                   : frac < spec.train_fraction + spec.valid_fraction ? Split::Valid
                                                                      : Split::Test;
        out.push_back(std::move(ep));
    }
    return out;
}

std::vector<std::string> make_sentences(int count, const Dims& dims, std::uint64_t seed) {
    SplitMix rng(seed);
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const Cell cell{rng.below(dims.w), rng.below(dims.h), rng.below(dims.d)};
        const double kind = rng.uniform();
        std::string s;
        if (kind < 0.75) {
            s = place_sentence(static_cast<BlockColor>(rng.below(kNumBlockColors)), cell, rng);
        } else if (kind < 0.9) {
            s = remove_sentence(cell, rng);
        } else {
            s = pick(kAcks, rng);
        }
        out.push_back(normalize_text(s));
    }
    return out;
}

} // namespace blockbuild::synth
