#include <string>
#include <vector>

#include "doctest.h"

#include "cgi/critique.hpp"
#include "cgi/rng.hpp"

using namespace cgi;

namespace {

// Sample critique of a web-shopping search action, as a trained critic
// would emit it.
const std::string kShoppingCritique =
    "## Contribution: The candidate's action contributes to the task by attempting to "
    "perform a search for the specified product. It includes most of the necessary "
    "attributes such as material, sleeve length, color, size, and price, which are "
    "crucial for finding the desired item.\n\n"
    "## Feasibility: The action is feasible as it uses the allowed action type "
    "\"search[KEYWORDS]\". However, there are some discrepancies in the keywords used. "
    "The candidate action uses \"XXL\" instead of \"xx-large\" and \"price: under 50\" "
    "instead of \"price < 50.00\". While these variations might still yield relevant "
    "results, they do not exactly match the specified format.\n\n"
    "## Efficiency: The action is relatively efficient as it attempts to gather "
    "relevant search results in one step. However, the slight variations in keyword "
    "formatting could potentially lead to less precise search results, which might "
    "require additional steps to refine the search.\n\n"
    "## Overall Grading: Good\n\n"
    "## Suggested Revision: Modify the search keywords to exactly match the specified "
    "format: search[machine wash moisture wicking men's t-shirts & tanks polyester "
    "spandex long sleeve red blue size xx-large price < 50.00]. This ensures "
    "consistency and potentially more accurate search results.";

// Random critique whose section texts survive the parser's trimming and
// section splitting (no leading/trailing whitespace, no line starting with
// "## ", no grade word collisions in free text are needed since only the
// grading section is scanned for grades).
Critique fuzz_critique(Rng& rng) {
  static const std::vector<std::string> words = {
      "the",   "action", "moves",   "inventory", "toward", "goal",   "step",
      "craft", "get",    "because", "missing",   "extra",  "useful", "redundant"};
  auto text = [&rng](int max_words) {
    int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_words)));
    std::string out;
    for (int i = 0; i < n; ++i) {
      if (i > 0) out += rng.below(7) == 0 ? "\n" : " ";
      out += words[static_cast<std::size_t>(rng.below(words.size()))];
    }
    return out;
  };
  Grade grade = static_cast<Grade>(rng.below(5));
  std::optional<std::string> revision;
  if (rng.below(2) == 0) revision = text(8);
  return make_critique(text(12), text(12), text(12), grade, revision);
}

}  // namespace

TEST_CASE("grade labels round trip and order totally") {
  const Grade all[] = {Grade::VeryPoor, Grade::Poor, Grade::Neutral, Grade::Good,
                       Grade::Excellent};
  CHECK(to_string(Grade::VeryPoor) == "Very Poor");
  CHECK(to_string(Grade::Excellent) == "Excellent");
  // antisymmetry + transitivity over all 25 pairs
  for (Grade a : all) {
    for (Grade b : all) {
      if (a < b) CHECK_FALSE(b < a);
      if (a == b) {
        CHECK_FALSE(a < b);
        CHECK_FALSE(b < a);
      }
      for (Grade c : all) {
        if (a < b && b < c) CHECK(a < c);
      }
    }
  }
  CHECK(Grade::Excellent > Grade::Good);
  CHECK(Grade::Good > Grade::Neutral);
  CHECK(Grade::Neutral > Grade::Poor);
  CHECK(Grade::Poor > Grade::VeryPoor);
}

TEST_CASE("parses the shopping critique sample") {
  Critique c = parse_critique(kShoppingCritique);
  CHECK(c.grade == Grade::Good);
  REQUIRE(c.suggested_revision.has_value());
  CHECK(c.suggested_revision->rfind("Modify the search keywords", 0) == 0);
  CHECK(c.contribution.find("necessary") != std::string::npos);
  CHECK(c.feasibility.find("search[KEYWORDS]") != std::string::npos);
  CHECK_FALSE(c.efficiency.empty());
  CHECK(c.raw == kShoppingCritique);
}

TEST_CASE("Very Poor never parses as Poor") {
  CHECK(parse_critique("## Overall Grading: Very Poor").grade == Grade::VeryPoor);
  CHECK(parse_critique("## Overall Grading: very poor").grade == Grade::VeryPoor);
  CHECK(parse_critique("## Overall Grading: VERY POOR").grade == Grade::VeryPoor);
  CHECK(parse_critique("## Overall Grading: [Very Poor]").grade == Grade::VeryPoor);
  CHECK(parse_critique("## Overall Grading:\nVery Poor.").grade == Grade::VeryPoor);
  CHECK(parse_critique("## Overall Grading: Poor").grade == Grade::Poor);
}

TEST_CASE("grade is the first scale word in the grading section") {
  CHECK(parse_critique("## Overall Grading: Good, borderline Neutral").grade == Grade::Good);
  CHECK(parse_critique("## Overall Grading: Neutral (not Good)").grade == Grade::Neutral);
  // scale words outside the grading section are ignored
  Critique c = parse_critique(
      "## Contribution: Excellent work here\n## Overall Grading: Poor");
  CHECK(c.grade == Grade::Poor);
}

TEST_CASE("missing grade rejects the critique") {
  CHECK_THROWS_AS(parse_critique("no headers at all"), MissingGrade);
  CHECK_THROWS_AS(parse_critique("## Contribution: fine\n## Feasibility: ok"),
                  MissingGrade);
  CHECK_THROWS_AS(parse_critique("## Overall Grading: magnificent"), MissingGrade);
}

TEST_CASE("missing analysis sections tolerated as empty") {
  Critique c = parse_critique("## Overall Grading: Neutral");
  CHECK(c.contribution.empty());
  CHECK(c.feasibility.empty());
  CHECK(c.efficiency.empty());
  CHECK_FALSE(c.suggested_revision.has_value());
}

TEST_CASE("absent revision spellings") {
  for (const char* spelling : {"None", "none", "N/A", "n/a", "NA", "None.", ""}) {
    Critique c = parse_critique(std::string("## Overall Grading: Good\n## Suggested Revision: ") +
                                spelling);
    CHECK_FALSE(c.suggested_revision.has_value());
  }
}

TEST_CASE("sections parse order-independently and case-insensitively") {
  Critique c = parse_critique(
      "## suggested revision: get log\n## OVERALL GRADING: Poor\n## Efficiency: slow\n"
      "## contribution: none to speak of\n## Feasibility: fine");
  CHECK(c.grade == Grade::Poor);
  CHECK(c.suggested_revision == "get log");
  CHECK(c.efficiency == "slow");
  CHECK(c.contribution == "none to speak of");
  CHECK(c.feasibility == "fine");
}

TEST_CASE("render -> parse round trip on the canonical template") {
  Critique c = make_critique("helps a lot", "valid command", "no waste", Grade::Excellent,
                             std::nullopt);
  Critique back = parse_critique(c.raw);
  CHECK(back == c);

  Critique with_rev = make_critique("partial", "valid", "detour", Grade::Neutral,
                                    std::string("get 2 oak log"));
  CHECK(parse_critique(with_rev.raw) == with_rev);
}

TEST_CASE("round trip holds on 1000 fuzzed critiques") {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(hash64(seed, "critique-fuzz"));
    Critique c = fuzz_critique(rng);
    Critique back = parse_critique(render_critique(c));
    if (!(back == c)) ++failures;
  }
  CHECK(failures == 0);
}
