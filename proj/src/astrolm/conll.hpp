#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "astrolm/corpus.hpp"

namespace astrolm {

struct LabeledSequence {
    std::vector<std::string> tokens;
    std::vector<std::string> labels;  // IOB2, validated at load
    SectionTag section = SectionTag::fulltext;
};

// token<TAB>label, one per line; blank line between sequences; an optional
// "#section=fulltext|acknowledgment" comment precedes a sequence.
std::vector<LabeledSequence> parse_conll(std::string_view content, const std::string& origin);
std::vector<LabeledSequence> load_conll(const std::string& path);

std::string conll_to_string(std::span<const LabeledSequence> sequences);
void save_conll(std::span<const LabeledSequence> sequences, const std::string& path);

}  // namespace astrolm
