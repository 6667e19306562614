#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "astrolm/corpus.hpp"

namespace astrolm {

inline constexpr uint32_t kPadId = 0;
inline constexpr uint32_t kUnkId = 1;
inline constexpr uint32_t kClsId = 2;
inline constexpr uint32_t kSepId = 3;
inline constexpr uint32_t kMaskId = 4;
inline constexpr std::size_t kNumSpecials = 5;

inline constexpr std::array<std::string_view, kNumSpecials> kSpecialTokens = {
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

inline constexpr std::string_view kContinuationPrefix = "##";

// Ordered WordPiece token table. The five special tokens always occupy
// ids 0-4; everything else is either a word-initial piece or a "##" piece.
class Vocabulary {
public:
    Vocabulary() = default;
    // `tokens` is the full ordered table including the leading specials.
    explicit Vocabulary(std::vector<std::string> tokens, bool lowercase = false);

    // Convenience for tests and synthetic pipelines: specials are prepended.
    static Vocabulary with_words(std::vector<std::string> words, bool lowercase = false);

    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    std::size_t size() const { return tokens_.size(); }
    const std::string& token(uint32_t id) const;
    std::optional<uint32_t> id_of(std::string_view token) const;
    const std::vector<std::string>& tokens() const { return tokens_; }
    bool lowercase() const { return lowercase_; }
    void set_lowercase(bool v) { lowercase_ = v; }

    static bool is_special_id(uint32_t id) { return id < kNumSpecials; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string_view, uint32_t> ids_;  // views into tokens_
    bool lowercase_ = false;

    void build_index();
};

struct Encoding {
    std::vector<uint32_t> ids;
    std::vector<uint8_t> segment_ids;      // 0 for segment A (and padding), 1 for B
    std::vector<uint8_t> attention_mask;   // 1 exactly on non-[PAD] positions
    std::vector<uint8_t> special_mask;     // 1 on [CLS]/[SEP]/[PAD]
    std::vector<std::string> tokens;

    std::size_t length() const { return ids.size(); }
    std::size_t used_length() const;  // number of attended positions
};

struct WordpieceTrainOptions {
    uint32_t vocab_size = 0;
    uint32_t min_frequency = 1;
    bool lowercase = false;
};

// Trains a vocabulary by iterative pair merging; the merged pair maximizes
// freq(pair) / (freq(left) * freq(right)), ties broken by the merged string.
// Deterministic for a fixed corpus and options.
Vocabulary train_wordpiece(const Corpus& corpus, const WordpieceTrainOptions& options);

// Whitespace split, then ASCII punctuation split off as single tokens.
std::vector<std::string> pre_tokenize(std::string_view text, bool lowercase);

// Greedy longest-match-first segmentation of a single word. A word with no
// valid segmentation comes back as a single [UNK].
std::vector<std::string> wordpiece_pieces(std::string_view word, const Vocabulary& vocab);

// Full text to subword tokens; no specials, no truncation.
std::vector<std::string> segment_text(std::string_view text, const Vocabulary& vocab);

// [CLS] tokens [SEP], padded to max_len; truncation drops tokens from the
// right before [SEP]. Requires max_len >= 2.
Encoding encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len);

// [CLS] a [SEP] b [SEP]; when over-long the longer segment loses tokens
// first, one at a time. Requires max_len >= 3.
Encoding encode_pair(std::string_view a, std::string_view b, const Vocabulary& vocab,
                     std::size_t max_len);

// Drops specials, joins "##" pieces, separates words by single spaces.
std::string decode(std::span<const uint32_t> ids, const Vocabulary& vocab);

}  // namespace astrolm
