#pragma once

#include "blockbuild/corpus.hpp"
#include "blockbuild/gridworld.hpp"
#include "blockbuild/rng.hpp"

#include <string>
#include <vector>

namespace blockbuild::synth {

// Templated color/position instruction language over a small grid. Episodes
// pair each architect instruction with the builder actions it describes, so
// gold sequences always replay cleanly.
struct Spec {
    Dims dims{5, 4, 5};
    int episodes = 50;
    int max_turns = 3;            // builder turns per episode, >= 1
    int max_actions_per_turn = 2; // actions per turn, >= 1
    double train_fraction = 0.8;
    double valid_fraction = 0.1; // remainder is the test split
    std::uint64_t seed = 7;
};

std::vector<Episode> make_episodes(const Spec& spec);

/// Standalone sentences from the same templates (for MLM pretraining text).
std::vector<std::string> make_sentences(int count, const Dims& dims, std::uint64_t seed);

} // namespace blockbuild::synth
