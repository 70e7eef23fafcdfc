#include "cgi/critique.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>
#include <utility>
#include <vector>

namespace cgi {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Scale words checked in listed order at each position, so the longer
// "very poor" wins over the "poor" it contains.
constexpr std::array<std::pair<std::string_view, Grade>, 5> kGradeWords = {{
    {"very poor", Grade::VeryPoor},
    {"excellent", Grade::Excellent},
    {"neutral", Grade::Neutral},
    {"good", Grade::Good},
    {"poor", Grade::Poor},
}};

std::optional<Grade> find_grade_word(const std::string& text) {
  const std::string hay = lower(text);
  std::size_t best_pos = std::string::npos;
  Grade best = Grade::Neutral;
  for (const auto& [word, grade] : kGradeWords) {
    std::size_t pos = hay.find(word);
    if (pos == std::string::npos) continue;
    if (pos < best_pos) {
      best_pos = pos;
      best = grade;
    }
    // Equal position can only happen for "very poor" vs "poor" offsets,
    // which never coincide; listed order settles hypothetical ties.
  }
  if (best_pos == std::string::npos) return std::nullopt;
  return best;
}

struct Section {
  std::string name;  // lowered header name
  std::string content;
};

std::vector<Section> split_sections(const std::string& raw) {
  std::vector<Section> sections;
  std::istringstream in(raw);
  std::string line;
  Section* current = nullptr;
  while (std::getline(in, line)) {
    if (line.rfind("## ", 0) == 0) {
      std::size_t colon = line.find(':', 3);
      std::string name = colon == std::string::npos ? line.substr(3)
                                                    : line.substr(3, colon - 3);
      std::string rest = colon == std::string::npos ? std::string()
                                                    : line.substr(colon + 1);
      sections.push_back({lower(trim(name)), rest});
      current = &sections.back();
    } else if (current != nullptr) {
      current->content += '\n';
      current->content += line;
    }
  }
  for (auto& s : sections) s.content = trim(s.content);
  return sections;
}

bool revision_absent(const std::string& text) {
  std::string t = lower(trim(text));
  while (!t.empty() && t.back() == '.') t.pop_back();
  return t.empty() || t == "none" || t == "n/a" || t == "na";
}

}  // namespace

std::string to_string(Grade g) {
  switch (g) {
    case Grade::Excellent: return "Excellent";
    case Grade::Good: return "Good";
    case Grade::Neutral: return "Neutral";
    case Grade::Poor: return "Poor";
    case Grade::VeryPoor: return "Very Poor";
  }
  return "Neutral";
}

std::string render_critique(const Critique& c) {
  std::string out;
  out += "## Contribution: " + c.contribution;
  out += "\n\n## Feasibility: " + c.feasibility;
  out += "\n\n## Efficiency: " + c.efficiency;
  out += "\n\n## Overall Grading: " + to_string(c.grade);
  out += "\n\n## Suggested Revision: ";
  out += c.suggested_revision ? *c.suggested_revision : std::string("None");
  return out;
}

Critique make_critique(std::string contribution, std::string feasibility,
                       std::string efficiency, Grade grade,
                       std::optional<std::string> suggested_revision) {
  Critique c;
  c.contribution = std::move(contribution);
  c.feasibility = std::move(feasibility);
  c.efficiency = std::move(efficiency);
  c.grade = grade;
  c.suggested_revision = std::move(suggested_revision);
  c.raw = render_critique(c);
  return c;
}

Critique parse_critique(const std::string& raw) {
  Critique c;
  c.raw = raw;
  bool grade_seen = false;
  for (const auto& section : split_sections(raw)) {
    if (section.name == "contribution") {
      c.contribution = section.content;
    } else if (section.name == "feasibility") {
      c.feasibility = section.content;
    } else if (section.name == "efficiency") {
      c.efficiency = section.content;
    } else if (section.name == "overall grading") {
      auto g = find_grade_word(section.content);
      if (!g) throw MissingGrade("no grade word in Overall Grading section");
      c.grade = *g;
      grade_seen = true;
    } else if (section.name == "suggested revision") {
      if (revision_absent(section.content)) {
        c.suggested_revision.reset();
      } else {
        c.suggested_revision = section.content;
      }
    }
  }
  if (!grade_seen) throw MissingGrade("no Overall Grading section");
  return c;
}

}  // namespace cgi
