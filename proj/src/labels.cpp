#include "cxr/labels.hpp"

#include "cxr/error.hpp"

namespace cxr {

ClassLabel class_from_index(std::size_t i) {
  if (i >= kNumClasses) fail_data("class index out of range: " + std::to_string(i));
  return static_cast<ClassLabel>(i);
}

std::string_view class_name(ClassLabel c) {
  switch (c) {
    case ClassLabel::normal: return "normal";
    case ClassLabel::pneumonia: return "pneumonia";
    case ClassLabel::covid19: return "covid19";
  }
  return "?";
}

std::optional<ClassLabel> parse_class(std::string_view name) {
  for (ClassLabel c : kAllClasses) {
    if (class_name(c) == name) return c;
  }
  return std::nullopt;
}

}  // namespace cxr
