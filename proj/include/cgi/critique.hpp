#pragma once

#include <compare>
#include <optional>
#include <string>

#include "cgi/errors.hpp"

namespace cgi {

// Five-level grade, totally ordered from worst to best.
enum class Grade { VeryPoor = 0, Poor = 1, Neutral = 2, Good = 3, Excellent = 4 };

inline std::strong_ordering operator<=>(Grade a, Grade b) {
  return static_cast<int>(a) <=> static_cast<int>(b);
}

std::string to_string(Grade g);

// Structured critique of one candidate action: three analysis texts, an
// overall grade, and an optional suggested revision.
struct Critique {
  std::string contribution;
  std::string feasibility;
  std::string efficiency;
  Grade grade = Grade::Neutral;
  std::optional<std::string> suggested_revision;
  std::string raw;  // verbatim critique text

  bool operator==(const Critique&) const = default;
};

// Renders the canonical five-section critique text. make_critique builds a
// Critique whose raw field is this rendering, so parse(render(c)) == c.
std::string render_critique(const Critique& c);

Critique make_critique(std::string contribution, std::string feasibility,
                       std::string efficiency, Grade grade,
                       std::optional<std::string> suggested_revision);

// Extracts the "## " sections by header name (case-insensitive, order
// independent). Missing analysis sections become empty strings; a missing
// or unreadable grade throws MissingGrade. "Very Poor" always wins over
// the contained "Poor".
Critique parse_critique(const std::string& raw);

}  // namespace cgi
