#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace astrolm {

class Vocabulary;

enum class SectionTag { fulltext, acknowledgment };

const char* section_tag_name(SectionTag tag);
std::optional<SectionTag> parse_section_tag(std::string_view name);

struct Citation {
    std::string target_doc_id;
    std::size_t paragraph_index = 0;
    // Position of the citation marker inside the paragraph, in code points.
    std::size_t char_offset = 0;
};

struct Document {
    std::string doc_id;
    std::string title;
    std::string abstract_text;  // may be empty; such docs are pair-mining-ineligible
    std::vector<std::string> paragraphs;
    std::vector<Citation> citations;
    // One tag per paragraph; empty means every paragraph is fulltext.
    std::vector<SectionTag> section_tags;

    SectionTag section_of(std::size_t paragraph_index) const;
};

struct Corpus {
    std::vector<Document> documents;
    std::unordered_map<std::string, std::size_t> index;  // doc_id -> position

    const Document* find(const std::string& doc_id) const;
    void rebuild_index();  // rejects duplicate doc ids
};

// One JSON object per line; see README for the schema. Unknown keys ignored.
Corpus load_corpus(const std::string& path);
Corpus parse_corpus_jsonl(std::string_view content, const std::string& origin);

std::string corpus_to_jsonl(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::string& path);

struct ValidationReport {
    struct DanglingCitation {
        std::string doc_id;
        std::size_t paragraph_index;
        std::string target_doc_id;
    };
    std::vector<DanglingCitation> dangling_citations;
    // Docs with an empty abstract; ineligible as pair-mining targets.
    std::vector<std::string> empty_abstracts;
    std::vector<std::pair<std::string, std::size_t>> empty_paragraphs;

    bool clean() const {
        return dangling_citations.empty() && empty_abstracts.empty() &&
               empty_paragraphs.empty();
    }
    nlohmann::ordered_json to_json() const;
};

// Never throws and never mutates; everything it finds goes in the report.
ValidationReport validate(const Corpus& corpus);

struct CorpusStats {
    uint64_t document_count = 0;
    uint64_t paragraph_count = 0;
    uint64_t token_count = 0;  // over paragraph text; title/abstract excluded
};

// token_count uses WordPiece segmentation when a vocabulary is given,
// whitespace tokens otherwise.
CorpusStats corpus_stats(const Corpus& corpus, const Vocabulary* vocab = nullptr);

}  // namespace astrolm
