#include "astrolm/tagset.hpp"

#include "astrolm/error.hpp"
#include "astrolm/io.hpp"

namespace astrolm {

TagSet TagSet::from_types(std::vector<std::string> types) {
    if (types.empty()) {
        raise(ErrorCode::invalid_argument, "a tag set needs at least one entity type");
    }
    TagSet ts;
    ts.types_ = std::move(types);
    ts.labels_.reserve(1 + 2 * ts.types_.size());
    ts.labels_.emplace_back("O");
    for (const auto& t : ts.types_) {
        if (t.empty()) {
            raise(ErrorCode::invalid_argument, "entity type names must be nonempty");
        }
        ts.labels_.push_back("B-" + t);
        ts.labels_.push_back("I-" + t);
    }
    for (std::size_t i = 0; i < ts.labels_.size(); ++i) {
        if (!ts.ids_.emplace(ts.labels_[i], static_cast<uint32_t>(i)).second) {
            raise(ErrorCode::invalid_argument, "duplicate entity type: " + ts.labels_[i]);
        }
    }
    return ts;
}

TagSet TagSet::load(const std::string& path) {
    const std::string content = io::read_text_file(path);
    std::vector<std::string> types;
    std::size_t start = 0;
    while (start < content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        std::string line = content.substr(start, end - start);
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
        std::size_t lead = 0;
        while (lead < line.size() && (line[lead] == ' ' || line[lead] == '\t')) ++lead;
        line.erase(0, lead);
        if (line.empty()) continue;
        types.push_back(std::move(line));
    }
    if (types.empty()) {
        raise(ErrorCode::parse, path + ": no entity types found");
    }
    try {
        return from_types(std::move(types));
    } catch (const Error& e) {
        raise(ErrorCode::parse, path + ": " + e.what());
    }
}

const std::string& TagSet::label(uint32_t id) const {
    if (id >= labels_.size()) {
        raise(ErrorCode::invalid_argument,
              "label id " + std::to_string(id) + " out of range");
    }
    return labels_[id];
}

std::optional<uint32_t> TagSet::label_id(std::string_view label) const {
    auto it = ids_.find(std::string(label));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> TagSet::type_of(uint32_t label_id) const {
    if (label_id == 0 || label_id >= labels_.size()) return std::nullopt;
    return (label_id - 1) / 2;
}

}  // namespace astrolm
