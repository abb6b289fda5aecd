#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blockbuild/tokenizer.hpp"

#include "support/test_util.hpp"

#include <cmath>

using namespace blockbuild;
namespace tu = blockbuild::testutil;

namespace {

// forces the selection and branch draws
struct StubRng final : RandomSource {
    std::vector<double> values;
    std::size_t next = 0;
    double uniform() override {
        const double v = values[next % values.size()];
        ++next;
        return v;
    }
};

} // namespace

TEST_CASE("build_vocab orders by frequency then lexicographically") {
    const Vocabulary v = build_vocab({"a a b"}, 1, 100);
    CHECK(v.size() == 7);
    CHECK(v.id_of("a") == 5);
    CHECK(v.id_of("b") == 6);

    const Vocabulary filtered = build_vocab({"a b"}, 2, 100);
    CHECK(filtered.size() == Vocabulary::kNumSpecials);

    const Vocabulary ties = build_vocab({"b a"}, 1, 100);
    CHECK(ties.id_of("a") == 5);
    CHECK(ties.id_of("b") == 6);

    CHECK_THROWS_AS(build_vocab({}, 1, 100), EmptyCorpus);
}

TEST_CASE("build_vocab truncates to max_size minus the specials") {
    const Vocabulary v = build_vocab({"a a a b b c"}, 1, 7);
    CHECK(v.size() == 7);
    CHECK(v.id_of("a") == 5);
    CHECK(v.id_of("b") == 6);
    CHECK(v.id_of("c") == Vocabulary::kUnk);
}

TEST_CASE("vocabulary file roundtrip is bit-exact") {
    const Vocabulary v = build_vocab({"delta alpha alpha bravo bravo bravo"}, 1, 100);
    const auto dir = tu::temp_dir("vocab_io");
    save_vocab(v, dir / "vocab.txt");
    const Vocabulary loaded = load_vocab(dir / "vocab.txt");
    CHECK(loaded.size() == v.size());
    for (int i = 0; i < v.size(); ++i) CHECK(loaded.token(i) == v.token(i));

    save_vocab(loaded, dir / "vocab2.txt");
    CHECK(tu::read_file_bytes(dir / "vocab.txt") == tu::read_file_bytes(dir / "vocab2.txt"));

    const std::string bytes = tu::read_file_bytes(dir / "vocab.txt");
    CHECK(bytes.substr(0, 6) == "[PAD]\n");
}

TEST_CASE("encode lays out CLS tokens SEP and pads to max_len") {
    const Vocabulary v = build_vocab({"a a b"}, 1, 100);

    const Encoding e = encode(v, "a b", 5);
    CHECK(e.ids == std::vector<int>{2, 5, 6, 3, 0});
    CHECK(e.attention_mask == std::vector<int>{1, 1, 1, 1, 0});

    const Encoding empty = encode(v, "", 4);
    CHECK(empty.ids == std::vector<int>{2, 3, 0, 0});

    const Encoding unk = encode(v, "zzz", 4);
    CHECK(unk.ids[1] == Vocabulary::kUnk);

    const Encoding truncated = encode(v, "a b a b a b", 5);
    CHECK(truncated.ids == std::vector<int>{2, 5, 6, 5, 3});

    CHECK_THROWS_AS(encode(v, "a", 1), DataError);
}

TEST_CASE("decode recovers in-vocabulary tokens exactly") {
    const Vocabulary v = build_vocab({"red block place a the"}, 1, 100);
    SplitMix rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        std::string text;
        std::vector<std::string> expected;
        const int n = 1 + rng.below(6);
        for (int i = 0; i < n; ++i) {
            const std::string tok = v.token(Vocabulary::kNumSpecials +
                                            rng.below(v.size() - Vocabulary::kNumSpecials));
            if (!text.empty()) text += ' ';
            text += tok;
            expected.push_back(tok);
        }
        CHECK(decode(v, encode(v, text, 16)) == expected);
    }
}

TEST_CASE("mask_tokens with prob 0 is the identity with all labels ignored") {
    const Vocabulary v = build_vocab({"a b c d"}, 1, 100);
    const Encoding e = encode(v, "a b c d", 8);
    SplitMix rng(5);
    const MaskingOutput out = mask_tokens(e, 0.0, rng, v);
    CHECK(out.masked_ids == e.ids);
    for (int l : out.labels) CHECK(l == kIgnoreLabel);
}

TEST_CASE("mask_tokens with prob 1 and a forced MASK branch masks every content token") {
    const Vocabulary v = build_vocab({"a b c d"}, 1, 100);
    const Encoding e = encode(v, "a b c d", 8);
    StubRng rng;
    rng.values = {0.0, 0.0}; // always select, always take the 80% branch
    const MaskingOutput out = mask_tokens(e, 1.0, rng, v);
    for (std::size_t i = 0; i < e.ids.size(); ++i) {
        const int id = e.ids[i];
        if (id == Vocabulary::kCls || id == Vocabulary::kSep || id == Vocabulary::kPad) {
            CHECK(out.masked_ids[i] == id);
            CHECK(out.labels[i] == kIgnoreLabel);
        } else {
            CHECK(out.masked_ids[i] == Vocabulary::kMask);
            CHECK(out.labels[i] == id);
        }
    }
}

TEST_CASE("mask_tokens leaves unselected positions untouched and is seed-deterministic") {
    const Vocabulary v = build_vocab({"a b c d e f g h"}, 1, 100);
    const Encoding e = encode(v, "a b c d e f g h a b c d", 16);

    SplitMix r1(77);
    SplitMix r2(77);
    const MaskingOutput a = mask_tokens(e, 0.3, r1, v);
    const MaskingOutput b = mask_tokens(e, 0.3, r2, v);
    CHECK(a.masked_ids == b.masked_ids);
    CHECK(a.labels == b.labels);

    for (std::size_t i = 0; i < e.ids.size(); ++i) {
        if (a.labels[i] == kIgnoreLabel) CHECK(a.masked_ids[i] == e.ids[i]);
    }
}

TEST_CASE("masking statistics land on 0.15 and the 80/10/10 branch split") {
    // vocabulary large enough that random-replacement collisions are noise
    std::vector<std::string> words;
    for (int i = 0; i < 1000; ++i) words.push_back("w" + std::to_string(i));
    std::string joined;
    for (const std::string& w : words) joined += w + " ";
    const Vocabulary v = build_vocab({joined}, 1, 2000);

    const int seq_len = 102; // 100 content tokens per sequence
    std::string text;
    SplitMix word_rng(1);
    for (int i = 0; i < seq_len - 2; ++i) {
        text += words[static_cast<std::size_t>(word_rng.below(1000))] + " ";
    }
    const Encoding e = encode(v, text, seq_len);

    SplitMix rng(42);
    long long selected = 0, masked = 0, unchanged = 0, randomized = 0, content = 0;
    for (int round = 0; round < 1000; ++round) { // 100k content-token draws
        const MaskingOutput out = mask_tokens(e, 0.15, rng, v);
        for (std::size_t i = 0; i < e.ids.size(); ++i) {
            const int id = e.ids[i];
            if (id == Vocabulary::kCls || id == Vocabulary::kSep || id == Vocabulary::kPad) continue;
            ++content;
            if (out.labels[i] == kIgnoreLabel) continue;
            ++selected;
            if (out.masked_ids[i] == Vocabulary::kMask) {
                ++masked;
            } else if (out.masked_ids[i] == id) {
                ++unchanged;
            } else {
                ++randomized;
            }
        }
    }
    CHECK(content == 100000);
    const double sel = static_cast<double>(selected) / static_cast<double>(content);
    CHECK(sel > 0.14);
    CHECK(sel < 0.16);
    const double m = static_cast<double>(masked) / static_cast<double>(selected);
    const double r = static_cast<double>(randomized) / static_cast<double>(selected);
    const double u = static_cast<double>(unchanged) / static_cast<double>(selected);
    CHECK(std::abs(m - 0.8) < 0.02);
    CHECK(std::abs(r - 0.1) < 0.02);
    CHECK(std::abs(u - 0.1) < 0.02);
}
