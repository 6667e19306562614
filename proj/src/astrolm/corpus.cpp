#include "astrolm/corpus.hpp"

#include <sstream>

#include "astrolm/error.hpp"
#include "astrolm/io.hpp"
#include "astrolm/tokenizer.hpp"
#include "astrolm/utf8.hpp"

namespace astrolm {

using nlohmann::json;
using nlohmann::ordered_json;

const char* section_tag_name(SectionTag tag) {
    return tag == SectionTag::acknowledgment ? "acknowledgment" : "fulltext";
}

std::optional<SectionTag> parse_section_tag(std::string_view name) {
    if (name == "fulltext") return SectionTag::fulltext;
    if (name == "acknowledgment") return SectionTag::acknowledgment;
    return std::nullopt;
}

SectionTag Document::section_of(std::size_t paragraph_index) const {
    if (paragraph_index < section_tags.size()) return section_tags[paragraph_index];
    return SectionTag::fulltext;
}

const Document* Corpus::find(const std::string& doc_id) const {
    auto it = index.find(doc_id);
    if (it == index.end()) return nullptr;
    return &documents[it->second];
}

void Corpus::rebuild_index() {
    index.clear();
    index.reserve(documents.size());
    for (std::size_t i = 0; i < documents.size(); ++i) {
        const auto& id = documents[i].doc_id;
        if (id.empty()) {
            raise(ErrorCode::invalid_argument, "document at position " +
                                                   std::to_string(i) + " has an empty doc_id");
        }
        if (!index.emplace(id, i).second) {
            raise(ErrorCode::invalid_argument, "duplicate doc_id: " + id);
        }
    }
}

namespace {

std::string line_context(const std::string& origin, std::size_t line_no) {
    return origin + ":" + std::to_string(line_no);
}

Document parse_document(const json& obj, const std::string& origin, std::size_t line_no) {
    const std::string where = line_context(origin, line_no);
    if (!obj.is_object()) {
        raise(ErrorCode::parse, where + ": expected a JSON object");
    }
    Document doc;
    try {
        doc.doc_id = obj.at("doc_id").get<std::string>();
        doc.title = obj.value("title", std::string());
        doc.abstract_text = obj.value("abstract", std::string());
        if (obj.contains("paragraphs")) {
            doc.paragraphs = obj.at("paragraphs").get<std::vector<std::string>>();
        }
        if (obj.contains("citations")) {
            for (const auto& c : obj.at("citations")) {
                Citation cit;
                cit.target_doc_id = c.at("target_doc_id").get<std::string>();
                const auto pi = c.at("paragraph_index").get<long long>();
                const auto off = c.at("char_offset").get<long long>();
                if (pi < 0) {
                    raise(ErrorCode::parse,
                          where + ": citations.paragraph_index must be nonnegative");
                }
                if (off < 0) {
                    raise(ErrorCode::parse, where + ": citations.char_offset must be nonnegative");
                }
                cit.paragraph_index = static_cast<std::size_t>(pi);
                cit.char_offset = static_cast<std::size_t>(off);
                doc.citations.push_back(std::move(cit));
            }
        }
        if (obj.contains("section_tags")) {
            for (const auto& t : obj.at("section_tags")) {
                const auto name = t.get<std::string>();
                const auto tag = parse_section_tag(name);
                if (!tag) {
                    raise(ErrorCode::parse, where + ": unknown section tag \"" + name + "\"");
                }
                doc.section_tags.push_back(*tag);
            }
        }
    } catch (const json::exception& e) {
        raise(ErrorCode::parse, where + ": " + e.what());
    }
    if (doc.doc_id.empty()) {
        raise(ErrorCode::parse, where + ": doc_id must be nonempty");
    }
    if (!doc.section_tags.empty() && doc.section_tags.size() != doc.paragraphs.size()) {
        raise(ErrorCode::parse,
              where + ": section_tags length " + std::to_string(doc.section_tags.size()) +
                  " does not match paragraphs length " + std::to_string(doc.paragraphs.size()));
    }
    for (const auto& cit : doc.citations) {
        if (cit.target_doc_id.empty()) {
            raise(ErrorCode::parse, where + ": citations.target_doc_id must be nonempty");
        }
        if (cit.paragraph_index >= doc.paragraphs.size()) {
            raise(ErrorCode::parse,
                  where + ": citations.paragraph_index " + std::to_string(cit.paragraph_index) +
                      " out of range for " + std::to_string(doc.paragraphs.size()) +
                      " paragraphs");
        }
        const std::size_t para_len = utf8::length(doc.paragraphs[cit.paragraph_index]);
        if (cit.char_offset > para_len) {
            raise(ErrorCode::parse,
                  where + ": citations.char_offset " + std::to_string(cit.char_offset) +
                      " exceeds paragraph length " + std::to_string(para_len));
        }
    }
    return doc;
}

}  // namespace

Corpus parse_corpus_jsonl(std::string_view content, const std::string& origin) {
    Corpus corpus;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= content.size()) {
        if (start == content.size()) break;
        std::size_t end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        std::string_view line = content.substr(start, end - start);
        ++line_no;
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        // Skip blank lines.
        bool blank = true;
        for (char c : line) {
            if (c != ' ' && c != '\t') {
                blank = false;
                break;
            }
        }
        if (blank) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded()) {
            raise(ErrorCode::parse, line_context(origin, line_no) + ": malformed JSON");
        }
        corpus.documents.push_back(parse_document(obj, origin, line_no));
    }
    try {
        corpus.rebuild_index();
    } catch (const Error& e) {
        raise(ErrorCode::parse, origin + ": " + e.what());
    }
    return corpus;
}

Corpus load_corpus(const std::string& path) {
    return parse_corpus_jsonl(io::read_text_file(path), path);
}

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& doc : corpus.documents) {
        ordered_json obj;
        obj["doc_id"] = doc.doc_id;
        obj["title"] = doc.title;
        obj["abstract"] = doc.abstract_text;
        obj["paragraphs"] = doc.paragraphs;
        ordered_json cits = ordered_json::array();
        for (const auto& c : doc.citations) {
            cits.push_back({{"target_doc_id", c.target_doc_id},
                            {"paragraph_index", c.paragraph_index},
                            {"char_offset", c.char_offset}});
        }
        obj["citations"] = std::move(cits);
        if (!doc.section_tags.empty()) {
            ordered_json tags = ordered_json::array();
            for (const auto t : doc.section_tags) tags.push_back(section_tag_name(t));
            obj["section_tags"] = std::move(tags);
        }
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    io::write_file_atomic(path, corpus_to_jsonl(corpus));
}

ordered_json ValidationReport::to_json() const {
    ordered_json j;
    ordered_json dangling = ordered_json::array();
    for (const auto& d : dangling_citations) {
        dangling.push_back({{"doc_id", d.doc_id},
                            {"paragraph_index", d.paragraph_index},
                            {"target_doc_id", d.target_doc_id}});
    }
    j["dangling_citations"] = std::move(dangling);
    j["empty_abstracts"] = empty_abstracts;
    ordered_json empties = ordered_json::array();
    for (const auto& [id, idx] : empty_paragraphs) {
        empties.push_back({{"doc_id", id}, {"paragraph_index", idx}});
    }
    j["empty_paragraphs"] = std::move(empties);
    return j;
}

ValidationReport validate(const Corpus& corpus) {
    ValidationReport report;
    for (const auto& doc : corpus.documents) {
        if (doc.abstract_text.empty()) {
            report.empty_abstracts.push_back(doc.doc_id);
        }
        for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
            if (doc.paragraphs[i].empty()) {
                report.empty_paragraphs.emplace_back(doc.doc_id, i);
            }
        }
        for (const auto& cit : doc.citations) {
            if (corpus.index.find(cit.target_doc_id) == corpus.index.end()) {
                report.dangling_citations.push_back(
                    {doc.doc_id, cit.paragraph_index, cit.target_doc_id});
            }
        }
    }
    return report;
}

namespace {

uint64_t whitespace_token_count(const std::string& text) {
    const std::u32string cps = utf8::decode(text);
    uint64_t count = 0;
    bool in_token = false;
    for (char32_t c : cps) {
        if (utf8::is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

}  // namespace

CorpusStats corpus_stats(const Corpus& corpus, const Vocabulary* vocab) {
    CorpusStats stats;
    stats.document_count = corpus.documents.size();
    for (const auto& doc : corpus.documents) {
        stats.paragraph_count += doc.paragraphs.size();
        for (const auto& para : doc.paragraphs) {
            if (vocab != nullptr) {
                stats.token_count += segment_text(para, *vocab).size();
            } else {
                stats.token_count += whitespace_token_count(para);
            }
        }
    }
    return stats;
}

}  // namespace astrolm
