#pragma once

#include "blockbuild/errors.hpp"
#include "blockbuild/rng.hpp"

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace blockbuild {

struct EmptyCorpus : DataError {
    using DataError::DataError;
};

// Word-level vocabulary with a fixed special-token header.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumSpecials = 5;

    Vocabulary();

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }
    /// kUnk for out-of-vocabulary tokens.
    int id_of(const std::string& token) const;
    bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

    int min_freq = 1;
    int max_size = 30000;

    void append(const std::string& token); // build-time only; rejects duplicates

    friend bool operator==(const Vocabulary&, const Vocabulary&);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

std::vector<std::string> split_tokens(const std::string& text);

/// Tokens with frequency >= min_freq, most frequent first, lexicographic
/// tie-break, truncated to max_size - 5, specials prepended.
Vocabulary build_vocab(const std::vector<std::string>& texts, int min_freq, int max_size);

/// One token per line; the first five lines are the specials.
void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocab(const std::filesystem::path& path);

struct Encoding {
    std::vector<int> ids;
    std::vector<int> attention_mask; // 1 = real token, 0 = PAD
};

/// [CLS] tokens [SEP], tail-truncated to max_len, PAD-filled. max_len >= 2.
Encoding encode(const Vocabulary& vocab, const std::string& text, int max_len);

/// Content tokens of an encoding (drops CLS/SEP/PAD, keeps UNK markers).
std::vector<std::string> decode(const Vocabulary& vocab, const Encoding& enc);

struct MaskingOutput {
    std::vector<int> masked_ids;
    std::vector<int> labels; // original id at selected positions, -1 elsewhere
};

inline constexpr int kIgnoreLabel = -1;

/// BERT-style dynamic masking: each content position selected independently
/// with probability mask_prob; selected positions become MASK with p=0.8, a
/// uniformly random non-special id with p=0.1, or stay unchanged with p=0.1.
/// CLS/SEP/PAD are never selected. Deterministic given the rng state.
MaskingOutput mask_tokens(const Encoding& encoding, double mask_prob, RandomSource& rng,
                          const Vocabulary& vocab);

} // namespace blockbuild
