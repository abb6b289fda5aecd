#pragma once

#include "blockbuild/gridworld.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace blockbuild {

enum class Speaker : std::uint8_t { Architect, Builder };
enum class Split : std::uint8_t { Train, Valid, Test };

Speaker parse_speaker(const std::string& s);
const char* speaker_name(Speaker s);
Split parse_split(const std::string& s);
const char* split_name(Split s);

struct Utterance {
    Speaker speaker = Speaker::Architect;
    std::string text;   // normalized
    int turn_index = 0;
};

struct GoldTurn {
    int turn_index = 0;
    ActionSeq actions;
};

struct Episode {
    std::string id;
    Split split = Split::Train;
    std::vector<Utterance> dialogue;
    Grid initial_world;
    std::vector<GoldTurn> gold_turns;
};

struct MalformedRecord : DataError {
    using DataError::DataError;
};

struct InfeasibleGoldAction : DataError {
    using DataError::DataError;
};

/// Lowercase, split punctuation into separate tokens, collapse whitespace.
std::string normalize_text(const std::string& raw);

/// Loads episodes of `split` from a JSONL corpus file, in file order.
/// Validates every episode invariant, including gold-action feasibility via
/// replay. With lenient=true, invalid episodes are skipped with a warning on
/// stderr instead of aborting the load.
std::vector<Episode> load_corpus(const std::filesystem::path& path, Split split, const Dims& dims,
                                 bool lenient = false);

/// All splits at once, same validation.
std::vector<Episode> load_corpus_all(const std::filesystem::path& path, const Dims& dims,
                                     bool lenient = false);

/// Writes episodes in the same JSONL record format load_corpus reads.
void save_corpus(const std::vector<Episode>& episodes, const std::filesystem::path& path);

/// One string per utterance, episode-major then turn order. Both speakers.
std::vector<std::string> extract_mlm_texts(const std::vector<Episode>& episodes);

} // namespace blockbuild
