#include "surveyforge/items.hpp"

#include "surveyforge/error.hpp"

namespace surveyforge {

std::string_view to_string(ViolenceType type) noexcept {
    switch (type) {
    case ViolenceType::Emotional:
        return "emotional";
    case ViolenceType::Physical:
        return "physical";
    case ViolenceType::Sexual:
        return "sexual";
    }
    return "?";
}

std::string_view to_string(Window window) noexcept {
    return window == Window::Lifetime ? "lifetime" : "12months";
}

ViolenceType parse_violence_type(std::string_view text) {
    for (auto type : kViolenceTypes) {
        if (to_string(type) == text) {
            return type;
        }
    }
    throw ConfigError("unknown violence type '" + std::string(text) + "'");
}

Window parse_window(std::string_view text) {
    for (auto window : kWindows) {
        if (to_string(window) == text) {
            return window;
        }
    }
    throw ConfigError("unknown recall window '" + std::string(text) + "'");
}

ItemAnswers ItemAnswers::complete(const std::array<std::uint16_t, kNumCells> &yes_masks) noexcept {
    ItemAnswers answers;
    for (std::size_t c = 0; c < kNumCells; ++c) {
        const auto all = static_cast<std::uint16_t>((1u << items_in_cell(c)) - 1u);
        answers.present[c] = all;
        answers.yes[c] = yes_masks[c] & all;
    }
    return answers;
}

std::optional<int> ItemAnswers::item(std::size_t cell, int index) const noexcept {
    const auto bit = static_cast<std::uint16_t>(1u << index);
    if (!(present[cell] & bit)) {
        return std::nullopt;
    }
    return (yes[cell] & bit) ? 1 : 0;
}

void ItemAnswers::set_item(std::size_t cell, int index, std::optional<int> value) noexcept {
    const auto bit = static_cast<std::uint16_t>(1u << index);
    if (!value) {
        present[cell] &= static_cast<std::uint16_t>(~bit);
        yes[cell] &= static_cast<std::uint16_t>(~bit);
        return;
    }
    present[cell] |= bit;
    if (*value) {
        yes[cell] |= bit;
    } else {
        yes[cell] &= static_cast<std::uint16_t>(~bit);
    }
}

std::string item_column_name(std::size_t cell, int index) {
    return std::string(to_string(cell_type(cell))) + "_" + std::string(to_string(cell_window(cell))) + "_" +
           std::to_string(index + 1);
}

std::vector<std::string> item_column_names() {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < kNumCells; ++c) {
        for (int i = 0; i < items_in_cell(c); ++i) {
            names.push_back(item_column_name(c, i));
        }
    }
    return names;
}

} // namespace surveyforge
