#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blockbuild/corpus.hpp"

#include "support/synth.hpp"
#include "support/test_util.hpp"

using namespace blockbuild;
namespace tu = blockbuild::testutil;

namespace {

const Dims kDims{4, 3, 4};

std::string episode_line(const std::string& id, const std::string& split,
                         const std::string& gold_turns) {
    return R"({"id":")" + id + R"(","split":")" + split + R"(",)" +
           R"("dialogue":[{"speaker":"architect","text":"Place a RED block."},)" +
           R"({"speaker":"builder","text":"ok"}],)" +
           R"("initial_blocks":[],"gold_turns":)" + gold_turns + "}";
}

} // namespace

TEST_CASE("normalize_text lowercases, splits punctuation, collapses spaces") {
    CHECK(normalize_text("Place a RED block.") == "place a red block .");
    CHECK(normalize_text("  hello   world ") == "hello world");
    CHECK(normalize_text("don't") == "don ' t");
    CHECK(normalize_text("") == "");
    CHECK(normalize_text("  \t ") == "");
}

TEST_CASE("load_corpus returns requested split in file order") {
    const auto dir = tu::temp_dir("corpus_order");
    const std::string gold = R"([{"turn":1,"actions":[{"type":"place","x":0,"y":0,"z":0,"color":"red"}]}])";
    tu::write_file(dir / "c.jsonl", episode_line("a", "train", gold) + "\n" +
                                        episode_line("b", "test", gold) + "\n" +
                                        episode_line("c", "train", gold) + "\n" +
                                        episode_line("d", "train", gold) + "\n");
    const std::vector<Episode> eps = load_corpus(dir / "c.jsonl", Split::Train, kDims);
    REQUIRE(eps.size() == 3);
    CHECK(eps[0].id == "a");
    CHECK(eps[1].id == "c");
    CHECK(eps[2].id == "d");
    CHECK(eps[0].dialogue[0].text == "place a red block .");
    CHECK(eps[0].dialogue[0].speaker == Speaker::Architect);
    CHECK(eps[0].dialogue[1].turn_index == 1);

    CHECK(load_corpus(dir / "c.jsonl", Split::Valid, kDims).empty());
}

TEST_CASE("empty file loads to an empty list") {
    const auto dir = tu::temp_dir("corpus_empty");
    tu::write_file(dir / "empty.jsonl", "");
    CHECK(load_corpus(dir / "empty.jsonl", Split::Train, kDims).empty());
}

TEST_CASE("gold remove from empty cell is an InfeasibleGoldAction") {
    const auto dir = tu::temp_dir("corpus_infeasible");
    const std::string gold = R"([{"turn":1,"actions":[{"type":"remove","x":0,"y":0,"z":0}]}])";
    tu::write_file(dir / "c.jsonl", episode_line("bad", "train", gold) + "\n");
    CHECK_THROWS_AS(load_corpus(dir / "c.jsonl", Split::Train, kDims), InfeasibleGoldAction);

    // lenient mode skips the episode instead
    CHECK(load_corpus(dir / "c.jsonl", Split::Train, kDims, true).empty());
}

TEST_CASE("malformed records carry line diagnostics") {
    const auto dir = tu::temp_dir("corpus_malformed");

    tu::write_file(dir / "missing.jsonl", R"({"id":"x","split":"train"})" "\n");
    CHECK_THROWS_WITH_AS(load_corpus(dir / "missing.jsonl", Split::Train, kDims),
                         doctest::Contains("line 1"), MalformedRecord);

    tu::write_file(dir / "color.jsonl",
                   episode_line("x", "train",
                                R"([{"turn":1,"actions":[{"type":"place","x":0,"y":0,"z":0,"color":"mauve"}]}])") +
                       "\n");
    CHECK_THROWS_AS(load_corpus(dir / "color.jsonl", Split::Train, kDims), UnknownColor);

    tu::write_file(dir / "turn.jsonl", episode_line("x", "train", R"([{"turn":7,"actions":[]}])") + "\n");
    CHECK_THROWS_AS(load_corpus(dir / "turn.jsonl", Split::Train, kDims), MalformedRecord);

    tu::write_file(dir / "oob.jsonl",
                   R"({"id":"x","split":"train","dialogue":[{"speaker":"builder","text":"hi"}],)"
                   R"("initial_blocks":[{"x":9,"y":0,"z":0,"color":"red"}],"gold_turns":[]})" "\n");
    CHECK_THROWS_AS(load_corpus(dir / "oob.jsonl", Split::Train, kDims), MalformedRecord);

    tu::write_file(dir / "speaker.jsonl",
                   R"({"id":"x","split":"train","dialogue":[{"speaker":"narrator","text":"hi"}],)"
                   R"("initial_blocks":[],"gold_turns":[]})" "\n");
    CHECK_THROWS_AS(load_corpus(dir / "speaker.jsonl", Split::Train, kDims), MalformedRecord);
}

TEST_CASE("load-serialize-load is identity on the typed representation") {
    synth::Spec spec;
    spec.dims = kDims;
    spec.episodes = 8;
    spec.seed = 99;
    const std::vector<Episode> original = synth::make_episodes(spec);

    const auto dir = tu::temp_dir("corpus_roundtrip");
    save_corpus(original, dir / "c.jsonl");
    const std::vector<Episode> loaded = load_corpus_all(dir / "c.jsonl", kDims);
    REQUIRE(loaded.size() == original.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].id == original[i].id);
        CHECK(loaded[i].split == original[i].split);
        CHECK(loaded[i].initial_world == original[i].initial_world);
        REQUIRE(loaded[i].dialogue.size() == original[i].dialogue.size());
        for (std::size_t u = 0; u < loaded[i].dialogue.size(); ++u) {
            CHECK(loaded[i].dialogue[u].speaker == original[i].dialogue[u].speaker);
            CHECK(loaded[i].dialogue[u].text == original[i].dialogue[u].text);
            CHECK(loaded[i].dialogue[u].turn_index == original[i].dialogue[u].turn_index);
        }
        REQUIRE(loaded[i].gold_turns.size() == original[i].gold_turns.size());
        for (std::size_t t = 0; t < loaded[i].gold_turns.size(); ++t) {
            CHECK(loaded[i].gold_turns[t].turn_index == original[i].gold_turns[t].turn_index);
            CHECK(loaded[i].gold_turns[t].actions == original[i].gold_turns[t].actions);
        }
    }

    // second serialization is byte-identical
    save_corpus(loaded, dir / "c2.jsonl");
    CHECK(tu::read_file_bytes(dir / "c.jsonl") == tu::read_file_bytes(dir / "c2.jsonl"));
}

TEST_CASE("gold sequences of loaded episodes replay cleanly") {
    synth::Spec spec;
    spec.dims = kDims;
    spec.episodes = 10;
    spec.seed = 4;
    const auto dir = tu::temp_dir("corpus_replayable");
    save_corpus(synth::make_episodes(spec), dir / "c.jsonl");
    for (const Episode& ep : load_corpus_all(dir / "c.jsonl", kDims)) {
        Grid g = ep.initial_world;
        for (const GoldTurn& turn : ep.gold_turns) CHECK_NOTHROW(g = replay(g, turn.actions));
    }
}

TEST_CASE("extract_mlm_texts is episode-major, turn order, one string per utterance") {
    synth::Spec spec;
    spec.dims = kDims;
    spec.episodes = 5;
    spec.seed = 12;
    const std::vector<Episode> eps = synth::make_episodes(spec);
    const std::vector<std::string> texts = extract_mlm_texts(eps);

    std::size_t total = 0;
    for (const Episode& ep : eps) total += ep.dialogue.size();
    CHECK(texts.size() == total);

    std::size_t k = 0;
    for (const Episode& ep : eps) {
        for (const Utterance& u : ep.dialogue) CHECK(texts[k++] == u.text);
    }

    CHECK(extract_mlm_texts({}).empty());
}
