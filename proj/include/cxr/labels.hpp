#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cxr {

/// The three diagnostic classes, with fixed integer codes.
enum class ClassLabel : std::uint8_t {
  normal = 0,
  pneumonia = 1,
  covid19 = 2,
};

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {
    ClassLabel::normal, ClassLabel::pneumonia, ClassLabel::covid19};

constexpr std::size_t class_index(ClassLabel c) { return static_cast<std::size_t>(c); }

ClassLabel class_from_index(std::size_t i);

/// Lower-case name used in manifests and reports ("normal", "pneumonia", "covid19").
std::string_view class_name(ClassLabel c);

/// Parses a manifest label; nullopt for unknown strings.
std::optional<ClassLabel> parse_class(std::string_view name);

}  // namespace cxr
