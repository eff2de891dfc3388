#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace surveyforge {

enum class ViolenceType : std::uint8_t { Emotional, Physical, Sexual };
enum class Window : std::uint8_t { Lifetime, Last12Months };

inline constexpr std::array<ViolenceType, 3> kViolenceTypes = {
    ViolenceType::Emotional, ViolenceType::Physical, ViolenceType::Sexual};
inline constexpr std::array<Window, 2> kWindows = {Window::Lifetime, Window::Last12Months};

/// Number of yes/no items on the WHO scale for each violence type.
inline constexpr std::array<int, 3> kItemsPerType = {4, 8, 3};

/// Six (type, window) outcome cells, type-major.
inline constexpr std::size_t kNumCells = 6;

constexpr std::size_t cell_index(ViolenceType type, Window window) noexcept {
    return static_cast<std::size_t>(type) * 2 + static_cast<std::size_t>(window);
}
constexpr ViolenceType cell_type(std::size_t cell) noexcept { return static_cast<ViolenceType>(cell / 2); }
constexpr Window cell_window(std::size_t cell) noexcept { return static_cast<Window>(cell % 2); }
constexpr int items_in_cell(std::size_t cell) noexcept { return kItemsPerType[cell / 2]; }

std::string_view to_string(ViolenceType type) noexcept;
std::string_view to_string(Window window) noexcept;
ViolenceType parse_violence_type(std::string_view text);
Window parse_window(std::string_view text);

/// Per-cell item answers as bit masks: bit i of `yes` is item i answered
/// "yes", bit i of `present` marks item i as answered at all.
struct ItemAnswers {
    std::array<std::uint16_t, kNumCells> yes{};
    std::array<std::uint16_t, kNumCells> present{};

    /// All items answered, with the given yes masks.
    static ItemAnswers complete(const std::array<std::uint16_t, kNumCells> &yes_masks) noexcept;
    /// Nothing answered.
    static ItemAnswers missing() noexcept { return {}; }

    std::optional<int> item(std::size_t cell, int index) const noexcept;
    void set_item(std::size_t cell, int index, std::optional<int> value) noexcept;

    bool operator==(const ItemAnswers &) const = default;
};

/// Item column names in observation files, e.g. "emotional_lifetime_1".
std::vector<std::string> item_column_names();
std::string item_column_name(std::size_t cell, int index);

} // namespace surveyforge
