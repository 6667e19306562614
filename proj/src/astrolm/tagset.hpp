#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace astrolm {

// Entity types plus the derived IOB2 label table:
// id 0 = O, then B-t / I-t per type in order.
class TagSet {
public:
    TagSet() = default;
    static TagSet from_types(std::vector<std::string> types);
    // One type name per line; '#' starts a comment.
    static TagSet load(const std::string& path);

    std::size_t num_types() const { return types_.size(); }
    std::size_t num_labels() const { return 1 + 2 * types_.size(); }
    const std::vector<std::string>& types() const { return types_; }

    const std::string& label(uint32_t id) const;
    std::optional<uint32_t> label_id(std::string_view label) const;

    // Type index behind a label; nullopt for O.
    std::optional<std::size_t> type_of(uint32_t label_id) const;
    bool is_begin(uint32_t label_id) const { return label_id != 0 && label_id % 2 == 1; }
    bool is_inside(uint32_t label_id) const { return label_id != 0 && label_id % 2 == 0; }
    uint32_t begin_label(std::size_t type_index) const {
        return static_cast<uint32_t>(1 + 2 * type_index);
    }
    uint32_t inside_label(std::size_t type_index) const {
        return static_cast<uint32_t>(2 + 2 * type_index);
    }

    bool operator==(const TagSet& other) const { return types_ == other.types_; }

private:
    std::vector<std::string> types_;
    std::vector<std::string> labels_;
    std::unordered_map<std::string, uint32_t> ids_;
};

}  // namespace astrolm
