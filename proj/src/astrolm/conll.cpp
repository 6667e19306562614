#include "astrolm/conll.hpp"

#include "astrolm/error.hpp"
#include "astrolm/io.hpp"

namespace astrolm {

namespace {

bool is_valid_label_shape(std::string_view label) {
    if (label == "O") return true;
    return label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-';
}

std::string_view label_type(std::string_view label) {
    return label == "O" ? std::string_view() : label.substr(2);
}

void check_iob2(const LabeledSequence& seq, const std::string& origin,
                std::span<const std::size_t> line_numbers) {
    std::string_view prev_type;
    for (std::size_t i = 0; i < seq.labels.size(); ++i) {
        const std::string_view label = seq.labels[i];
        if (label[0] == 'I') {
            const std::string_view type = label_type(label);
            if (prev_type != type) {
                raise(ErrorCode::parse,
                      origin + ":" + std::to_string(line_numbers[i]) + ": " + std::string(label) +
                          " continues nothing (IOB2 requires B-" + std::string(type) +
                          " or I-" + std::string(type) + " before it)");
            }
        }
        prev_type = label_type(label);
    }
}

}  // namespace

std::vector<LabeledSequence> parse_conll(std::string_view content, const std::string& origin) {
    std::vector<LabeledSequence> sequences;
    LabeledSequence current;
    std::vector<std::size_t> current_lines;
    SectionTag pending_section = SectionTag::fulltext;

    std::size_t line_no = 0;
    std::size_t start = 0;
    auto flush = [&]() {
        if (current.tokens.empty()) return;
        current.section = pending_section;
        check_iob2(current, origin, current_lines);
        sequences.push_back(std::move(current));
        current = LabeledSequence{};
        current_lines.clear();
        pending_section = SectionTag::fulltext;
    };

    while (start <= content.size()) {
        if (start == content.size()) break;
        std::size_t end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        std::string_view line = content.substr(start, end - start);
        ++line_no;
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (line.empty()) {
            flush();
            continue;
        }
        if (line.starts_with('#')) {
            constexpr std::string_view kSectionKey = "#section=";
            if (line.starts_with(kSectionKey)) {
                const auto tag = parse_section_tag(line.substr(kSectionKey.size()));
                if (!tag) {
                    raise(ErrorCode::parse, origin + ":" + std::to_string(line_no) +
                                                ": unknown section \"" +
                                                std::string(line.substr(kSectionKey.size())) +
                                                "\"");
                }
                pending_section = *tag;
            }
            continue;  // other comments are ignored
        }
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0 || tab + 1 >= line.size()) {
            raise(ErrorCode::parse, origin + ":" + std::to_string(line_no) +
                                        ": expected token<TAB>label, got \"" +
                                        std::string(line) + "\"");
        }
        const std::string_view token = line.substr(0, tab);
        const std::string_view label = line.substr(tab + 1);
        if (!is_valid_label_shape(label)) {
            raise(ErrorCode::parse, origin + ":" + std::to_string(line_no) +
                                        ": bad label \"" + std::string(label) + "\"");
        }
        current.tokens.emplace_back(token);
        current.labels.emplace_back(label);
        current_lines.push_back(line_no);
    }
    flush();
    return sequences;
}

std::vector<LabeledSequence> load_conll(const std::string& path) {
    return parse_conll(io::read_text_file(path), path);
}

std::string conll_to_string(std::span<const LabeledSequence> sequences) {
    std::string out;
    for (const auto& seq : sequences) {
        out += "#section=";
        out += section_tag_name(seq.section);
        out += '\n';
        for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
            out += seq.tokens[i];
            out += '\t';
            out += seq.labels[i];
            out += '\n';
        }
        out += '\n';
    }
    return out;
}

void save_conll(std::span<const LabeledSequence> sequences, const std::string& path) {
    io::write_file_atomic(path, conll_to_string(sequences));
}

}  // namespace astrolm
