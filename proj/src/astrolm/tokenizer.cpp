#include "astrolm/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "astrolm/error.hpp"
#include "astrolm/io.hpp"
#include "astrolm/utf8.hpp"

namespace astrolm {

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> tokens, bool lowercase)
    : tokens_(std::move(tokens)), lowercase_(lowercase) {
    if (tokens_.size() < kNumSpecials) {
        raise(ErrorCode::invalid_argument,
              "vocabulary must contain at least the 5 special tokens");
    }
    for (std::size_t i = 0; i < kNumSpecials; ++i) {
        if (tokens_[i] != kSpecialTokens[i]) {
            raise(ErrorCode::invalid_argument,
                  "special token at id " + std::to_string(i) + " must be " +
                      std::string(kSpecialTokens[i]) + ", got \"" + tokens_[i] + "\"");
        }
    }
    for (const auto& t : tokens_) {
        if (t.empty()) {
            raise(ErrorCode::invalid_argument, "vocabulary contains an empty token");
        }
        if (t == kContinuationPrefix) {
            raise(ErrorCode::invalid_argument,
                  "bare continuation prefix is not a valid token");
        }
    }
    build_index();
}

Vocabulary Vocabulary::with_words(std::vector<std::string> words, bool lowercase) {
    std::vector<std::string> all;
    all.reserve(kNumSpecials + words.size());
    for (auto s : kSpecialTokens) all.emplace_back(s);
    for (auto& w : words) all.push_back(std::move(w));
    return Vocabulary(std::move(all), lowercase);
}

void Vocabulary::build_index() {
    ids_.clear();
    ids_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!ids_.emplace(tokens_[i], static_cast<uint32_t>(i)).second) {
            raise(ErrorCode::invalid_argument, "duplicate token: " + tokens_[i]);
        }
    }
}

const std::string& Vocabulary::token(uint32_t id) const {
    if (id >= tokens_.size()) {
        raise(ErrorCode::invalid_argument,
              "token id " + std::to_string(id) + " out of range for vocabulary of size " +
                  std::to_string(tokens_.size()));
    }
    return tokens_[id];
}

std::optional<uint32_t> Vocabulary::id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

Vocabulary Vocabulary::load(const std::string& path) {
    const std::string content = io::read_text_file(path);
    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (start < content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        std::string line = content.substr(start, end - start);
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && start >= content.size()) break;  // trailing newline
        tokens.push_back(std::move(line));
    }
    try {
        return Vocabulary(std::move(tokens));
    } catch (const Error& e) {
        raise(ErrorCode::parse, path + ": " + e.what());
    }
}

void Vocabulary::save(const std::string& path) const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

std::size_t Encoding::used_length() const {
    std::size_t n = 0;
    for (uint8_t m : attention_mask) n += m;
    return n;
}

// ---------------------------------------------------------------------------
// Pre-tokenization and segmentation
// ---------------------------------------------------------------------------

std::vector<std::string> pre_tokenize(std::string_view text, bool lowercase) {
    std::vector<std::string> words;
    std::u32string current;
    auto flush = [&]() {
        if (!current.empty()) {
            words.push_back(utf8::encode(current));
            current.clear();
        }
    };
    for (char32_t c : utf8::decode(text)) {
        if (lowercase) c = utf8::ascii_lower(c);
        if (utf8::is_space(c)) {
            flush();
        } else if (utf8::is_split_punct(c)) {
            flush();
            words.push_back(utf8::encode(c));
        } else {
            current.push_back(c);
        }
    }
    flush();
    return words;
}

std::vector<std::string> wordpiece_pieces(std::string_view word, const Vocabulary& vocab) {
    const std::u32string cps = utf8::decode(word);
    std::vector<std::string> pieces;
    std::size_t pos = 0;
    while (pos < cps.size()) {
        std::size_t len = cps.size() - pos;
        std::string match;
        while (len > 0) {
            std::string candidate;
            if (pos > 0) candidate = std::string(kContinuationPrefix);
            candidate += utf8::encode(std::u32string_view(cps).substr(pos, len));
            if (vocab.id_of(candidate)) {
                match = std::move(candidate);
                break;
            }
            --len;
        }
        if (len == 0) {
            return {std::string(kSpecialTokens[kUnkId])};
        }
        pieces.push_back(std::move(match));
        pos += len;
    }
    return pieces;
}

std::vector<std::string> segment_text(std::string_view text, const Vocabulary& vocab) {
    std::vector<std::string> out;
    for (const auto& word : pre_tokenize(text, vocab.lowercase())) {
        for (auto& piece : wordpiece_pieces(word, vocab)) {
            out.push_back(std::move(piece));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

namespace {

void append_token(Encoding& enc, const Vocabulary& vocab, const std::string& token,
                  uint8_t segment) {
    const auto id = vocab.id_of(token);
    enc.ids.push_back(*id);
    enc.segment_ids.push_back(segment);
    enc.attention_mask.push_back(1);
    enc.special_mask.push_back(0);
    enc.tokens.push_back(token);
}

void append_special(Encoding& enc, uint32_t id, uint8_t segment, uint8_t attended) {
    enc.ids.push_back(id);
    enc.segment_ids.push_back(segment);
    enc.attention_mask.push_back(attended);
    enc.special_mask.push_back(1);
    enc.tokens.emplace_back(kSpecialTokens[id]);
}

void pad_to(Encoding& enc, std::size_t max_len) {
    while (enc.ids.size() < max_len) {
        append_special(enc, kPadId, 0, 0);
    }
}

}  // namespace

Encoding encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
    if (max_len < 2) {
        raise(ErrorCode::invalid_argument, "encode requires max_len >= 2");
    }
    auto pieces = segment_text(text, vocab);
    if (pieces.size() > max_len - 2) {
        pieces.resize(max_len - 2);
    }
    Encoding enc;
    append_special(enc, kClsId, 0, 1);
    for (const auto& p : pieces) append_token(enc, vocab, p, 0);
    append_special(enc, kSepId, 0, 1);
    pad_to(enc, max_len);
    return enc;
}

Encoding encode_pair(std::string_view a, std::string_view b, const Vocabulary& vocab,
                     std::size_t max_len) {
    if (max_len < 3) {
        raise(ErrorCode::invalid_argument, "encode_pair requires max_len >= 3");
    }
    auto pieces_a = segment_text(a, vocab);
    auto pieces_b = segment_text(b, vocab);
    const std::size_t budget = max_len - 3;
    while (pieces_a.size() + pieces_b.size() > budget) {
        if (pieces_a.size() > pieces_b.size()) {
            pieces_a.pop_back();
        } else {
            pieces_b.pop_back();
        }
    }
    Encoding enc;
    append_special(enc, kClsId, 0, 1);
    for (const auto& p : pieces_a) append_token(enc, vocab, p, 0);
    append_special(enc, kSepId, 0, 1);
    for (const auto& p : pieces_b) append_token(enc, vocab, p, 1);
    append_special(enc, kSepId, 1, 1);
    pad_to(enc, max_len);
    return enc;
}

std::string decode(std::span<const uint32_t> ids, const Vocabulary& vocab) {
    std::string out;
    bool word_open = false;
    for (uint32_t id : ids) {
        const std::string& tok = vocab.token(id);  // validates the id
        if (Vocabulary::is_special_id(id)) continue;
        std::string_view piece = tok;
        const bool continuation = piece.starts_with(kContinuationPrefix);
        if (continuation) piece.remove_prefix(kContinuationPrefix.size());
        if (word_open && continuation) {
            out += piece;
        } else {
            if (word_open) out += ' ';
            out += piece;
        }
        word_open = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// WordPiece training
// ---------------------------------------------------------------------------

namespace {

struct TrainWord {
    std::vector<std::string> symbols;
    uint64_t freq = 0;
};

using PairKey = std::pair<std::string, std::string>;

std::string merge_symbols(const std::string& left, const std::string& right) {
    std::string_view suffix = right;
    if (suffix.starts_with(kContinuationPrefix)) {
        suffix.remove_prefix(kContinuationPrefix.size());
    }
    return left + std::string(suffix);
}

// Exact comparison of count_a/(l_a*r_a) vs count_b/(l_b*r_b).
bool score_greater(uint64_t count_a, uint64_t la, uint64_t ra, uint64_t count_b, uint64_t lb,
                   uint64_t rb) {
    const unsigned __int128 lhs =
        static_cast<unsigned __int128>(count_a) * lb * rb;
    const unsigned __int128 rhs =
        static_cast<unsigned __int128>(count_b) * la * ra;
    return lhs > rhs;
}

bool score_equal(uint64_t count_a, uint64_t la, uint64_t ra, uint64_t count_b, uint64_t lb,
                 uint64_t rb) {
    const unsigned __int128 lhs =
        static_cast<unsigned __int128>(count_a) * lb * rb;
    const unsigned __int128 rhs =
        static_cast<unsigned __int128>(count_b) * la * ra;
    return lhs == rhs;
}

}  // namespace

Vocabulary train_wordpiece(const Corpus& corpus, const WordpieceTrainOptions& options) {
    if (options.min_frequency < 1) {
        raise(ErrorCode::invalid_argument, "min_frequency must be >= 1");
    }

    // Word counts over every text field.
    std::map<std::string, uint64_t> word_counts;
    auto count_text = [&](const std::string& text) {
        for (auto& w : pre_tokenize(text, options.lowercase)) {
            ++word_counts[w];
        }
    };
    for (const auto& doc : corpus.documents) {
        count_text(doc.title);
        count_text(doc.abstract_text);
        for (const auto& p : doc.paragraphs) count_text(p);
    }
    if (word_counts.empty()) {
        raise(ErrorCode::invalid_argument, "cannot train a vocabulary on an empty corpus");
    }

    // Alphabet: characters seen at least min_frequency times, in both the
    // word-initial and continuation form.
    std::map<char32_t, uint64_t> char_counts;
    for (const auto& [word, freq] : word_counts) {
        for (char32_t c : utf8::decode(word)) char_counts[c] += freq;
    }
    std::set<char32_t> alphabet;
    for (const auto& [c, n] : char_counts) {
        if (n >= options.min_frequency) alphabet.insert(c);
    }

    std::vector<std::string> tokens;
    for (auto s : kSpecialTokens) tokens.emplace_back(s);
    for (char32_t c : alphabet) {
        tokens.push_back(utf8::encode(c));
        tokens.push_back(std::string(kContinuationPrefix) + utf8::encode(c));
    }
    if (options.vocab_size < tokens.size()) {
        raise(ErrorCode::invalid_argument,
              "vocab_size " + std::to_string(options.vocab_size) +
                  " too small to hold specials + alphabet (" + std::to_string(tokens.size()) +
                  " tokens)");
    }
    std::set<std::string> in_vocab(tokens.begin(), tokens.end());

    // Words containing out-of-alphabet characters cannot be represented and
    // are left out of merge training.
    std::vector<TrainWord> words;
    for (const auto& [word, freq] : word_counts) {
        const std::u32string cps = utf8::decode(word);
        bool representable = true;
        for (char32_t c : cps) {
            if (alphabet.find(c) == alphabet.end()) {
                representable = false;
                break;
            }
        }
        if (!representable) continue;
        TrainWord tw;
        tw.freq = freq;
        tw.symbols.reserve(cps.size());
        for (std::size_t i = 0; i < cps.size(); ++i) {
            std::string sym = i == 0 ? "" : std::string(kContinuationPrefix);
            sym += utf8::encode(cps[i]);
            tw.symbols.push_back(std::move(sym));
        }
        words.push_back(std::move(tw));
    }

    // Pair statistics, updated incrementally as merges are applied. std::map
    // keeps the scan order (and therefore tie handling) deterministic.
    std::map<PairKey, uint64_t> pair_counts;
    std::map<PairKey, std::set<std::size_t>> pair_words;
    std::map<std::string, uint64_t> symbol_counts;

    auto add_word_stats = [&](std::size_t wi, int sign) {
        const TrainWord& w = words[wi];
        for (std::size_t i = 0; i < w.symbols.size(); ++i) {
            auto& sc = symbol_counts[w.symbols[i]];
            sc = sign > 0 ? sc + w.freq : sc - w.freq;
            if (i + 1 < w.symbols.size()) {
                PairKey key(w.symbols[i], w.symbols[i + 1]);
                auto& pc = pair_counts[key];
                pc = sign > 0 ? pc + w.freq : pc - w.freq;
                if (sign > 0) {
                    pair_words[key].insert(wi);
                } else if (pc == 0) {
                    pair_counts.erase(key);
                    pair_words.erase(key);
                }
            }
        }
    };
    for (std::size_t wi = 0; wi < words.size(); ++wi) add_word_stats(wi, +1);

    while (tokens.size() < options.vocab_size && !pair_counts.empty()) {
        // Best-scoring pair with frequency >= min_frequency.
        bool found = false;
        PairKey best;
        uint64_t best_count = 0, best_l = 1, best_r = 1;
        std::string best_merged;
        for (const auto& [key, count] : pair_counts) {
            if (count < options.min_frequency) continue;
            const uint64_t l = symbol_counts[key.first];
            const uint64_t r = symbol_counts[key.second];
            std::string merged = merge_symbols(key.first, key.second);
            if (!found || score_greater(count, l, r, best_count, best_l, best_r) ||
                (score_equal(count, l, r, best_count, best_l, best_r) && merged < best_merged)) {
                found = true;
                best = key;
                best_count = count;
                best_l = l;
                best_r = r;
                best_merged = std::move(merged);
            }
        }
        if (!found) break;

        if (in_vocab.insert(best_merged).second) {
            tokens.push_back(best_merged);
        }

        // Re-segment only the words that contain the merged pair.
        const std::set<std::size_t> affected = pair_words[best];
        for (std::size_t wi : affected) {
            add_word_stats(wi, -1);
            auto& syms = words[wi].symbols;
            std::vector<std::string> merged_syms;
            merged_syms.reserve(syms.size());
            for (std::size_t i = 0; i < syms.size();) {
                if (i + 1 < syms.size() && syms[i] == best.first && syms[i + 1] == best.second) {
                    merged_syms.push_back(best_merged);
                    i += 2;
                } else {
                    merged_syms.push_back(std::move(syms[i]));
                    i += 1;
                }
            }
            syms = std::move(merged_syms);
            add_word_stats(wi, +1);
        }
    }

    return Vocabulary(std::move(tokens), options.lowercase);
}

}  // namespace astrolm
