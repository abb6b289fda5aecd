#include "blockbuild/tokenizer.hpp"

#include <algorithm>
#include <cassert>
#include <fstream>
#include <map>
#include <sstream>

namespace blockbuild {

namespace {
const char* kSpecialTokens[Vocabulary::kNumSpecials] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
}

Vocabulary::Vocabulary() {
    for (const char* t : kSpecialTokens) append(t);
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

void Vocabulary::append(const std::string& token) {
    auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
    if (!inserted) throw DataError("duplicate vocabulary token \"" + token + "\"");
    tokens_.push_back(token);
}

bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.min_freq == b.min_freq && a.max_size == b.max_size;
}

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

Vocabulary build_vocab(const std::vector<std::string>& texts, int min_freq, int max_size) {
    if (texts.empty()) throw EmptyCorpus("no texts to build a vocabulary from");
    if (max_size < Vocabulary::kNumSpecials) {
        throw DataError("max_size must be at least " + std::to_string(Vocabulary::kNumSpecials));
    }

    // std::map so equal-frequency ordering falls out lexicographic.
    std::map<std::string, long long> freq;
    for (const std::string& t : texts) {
        for (const std::string& tok : split_tokens(t)) ++freq[tok];
    }

    std::vector<std::pair<std::string, long long>> entries;
    for (const auto& [tok, n] : freq) {
        if (n >= min_freq) entries.emplace_back(tok, n);
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    const std::size_t cap = static_cast<std::size_t>(max_size - Vocabulary::kNumSpecials);
    if (entries.size() > cap) entries.resize(cap);

    Vocabulary vocab;
    vocab.min_freq = min_freq;
    vocab.max_size = max_size;
    for (const auto& [tok, n] : entries) vocab.append(tok);
    return vocab;
}

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary file " + path.string());
    for (int i = 0; i < vocab.size(); ++i) out << vocab.token(i) << "\n";
}

Vocabulary load_vocab(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file " + path.string());
    Vocabulary vocab;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no < Vocabulary::kNumSpecials) {
            if (line != kSpecialTokens[line_no]) {
                throw DataError("vocabulary file " + path.string() + ": line " +
                                std::to_string(line_no + 1) + " must be " + kSpecialTokens[line_no]);
            }
        } else {
            vocab.append(line);
        }
        ++line_no;
    }
    if (line_no < Vocabulary::kNumSpecials) {
        throw DataError("vocabulary file " + path.string() + ": missing special-token header");
    }
    return vocab;
}

Encoding encode(const Vocabulary& vocab, const std::string& text, int max_len) {
    if (max_len < 2) throw DataError("encode requires max_len >= 2");
    std::vector<std::string> tokens = split_tokens(text);
    const std::size_t budget = static_cast<std::size_t>(max_len - 2);
    if (tokens.size() > budget) tokens.resize(budget);

    Encoding enc;
    enc.ids.reserve(static_cast<std::size_t>(max_len));
    enc.ids.push_back(Vocabulary::kCls);
    for (const std::string& t : tokens) enc.ids.push_back(vocab.id_of(t));
    enc.ids.push_back(Vocabulary::kSep);
    const std::size_t real = enc.ids.size();
    enc.ids.resize(static_cast<std::size_t>(max_len), Vocabulary::kPad);
    enc.attention_mask.assign(static_cast<std::size_t>(max_len), 0);
    for (std::size_t i = 0; i < real; ++i) enc.attention_mask[i] = 1;
    return enc;
}

std::vector<std::string> decode(const Vocabulary& vocab, const Encoding& enc) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < enc.ids.size(); ++i) {
        const int id = enc.ids[i];
        if (enc.attention_mask[i] == 0) break;
        if (id == Vocabulary::kCls || id == Vocabulary::kSep || id == Vocabulary::kPad) continue;
        out.push_back(vocab.token(id));
    }
    return out;
}

MaskingOutput mask_tokens(const Encoding& encoding, double mask_prob, RandomSource& rng,
                          const Vocabulary& vocab) {
    assert(mask_prob >= 0.0 && mask_prob <= 1.0);
    MaskingOutput out;
    out.masked_ids = encoding.ids;
    out.labels.assign(encoding.ids.size(), kIgnoreLabel);

    const int content_ids = vocab.size() - Vocabulary::kNumSpecials;
    for (std::size_t i = 0; i < encoding.ids.size(); ++i) {
        const int id = encoding.ids[i];
        if (encoding.attention_mask[i] == 0) continue;
        if (id == Vocabulary::kCls || id == Vocabulary::kSep || id == Vocabulary::kPad) continue;
        if (rng.uniform() >= mask_prob) continue;

        out.labels[i] = id;
        const double branch = rng.uniform();
        if (branch < 0.8) {
            out.masked_ids[i] = Vocabulary::kMask;
        } else if (branch < 0.9 && content_ids > 0) {
            out.masked_ids[i] = Vocabulary::kNumSpecials + rng.below(content_ids);
        }
        // else: left unchanged
    }
    return out;
}

} // namespace blockbuild
