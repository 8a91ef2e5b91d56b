#include "uigauge/templates.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "uigauge/error.hpp"
#include "uigauge/numfmt.hpp"

namespace uigauge {

namespace {

struct TemplateEntry {
  TemplateId id;
  std::string_view name;
  PlaceholderSyntax syntax;
  std::string_view text;
};

// Texts are kept byte-for-byte; tests/golden/templates holds the reference copies.
const TemplateEntry kTemplates[] = {
    {TemplateId::InferTestAction, "infer_test_action", PlaceholderSyntax::Brace,
     R"TPL(Identify and point to the UI element that corresponds to this test action:
{test_action}.
)TPL"},
    {TemplateId::InferExpectedResult, "infer_expected_result", PlaceholderSyntax::Brace,
     R"TPL(Evaluate this statement about the image:
'{expectation}'
Think step by step, conclude whether the evaluation is 'PASSED' or 'FAILED' and point to the UI element that corresponds to this evaluation.
)TPL"},
    {TemplateId::RespondTestAction, "respond_test_action", PlaceholderSyntax::Brace,
     R"TPL({reasoning}
<point x="{center_x:.1f}" y="{center_y:.1f}" alt="{test_action}">{test_action}</point>
)TPL"},
    {TemplateId::RespondExpectedResult, "respond_expected_result", PlaceholderSyntax::Brace,
     R"TPL({reasoning}
Conclusion: {evaluation_result}
<point x="{center_x:.1f}" y="{center_y:.1f}" alt="{expectation}">{expectation} {evaluation_result}</point>
)TPL"},
    {TemplateId::TeacherTestAction, "teacher_test_action", PlaceholderSyntax::Angle,
     R"TPL(Write test actions for the UI of automotive infotainment software.
These actions must be declarative, concise, and tailored to verify the software's functionality accurately.
Test actions should cover marked user interface elements and interactions relevant to the infotainment system.

# Steps
1. Understand UI Element: 
    - Identify the position of the UI element marked by a <color> <marker_type>.
    - Identify the semantic meaning based on its text or icon.
    - Identify any parent elements crucial for semantic or functional meaning.
    - Identify any related elements crucial for semantic or functional meaning (e.g., text corresponding to a checkbox or switch).

2. Reasoning if UI Element is interactive:
    - Determine why the element is interactive or not. Grayed out elements could either mean that they are just disabled or not interactive at all.
    - If it is not interactive set the utterance to "none".

3. Specify Test Action Utterance: 
    - Write a deterministic and declarative action simulating a user interaction with the UI element.
    - Use unique identifiers for the UI element, and mention a parent element if necessary.
    - Do not use the <color> <marker_type> in the test action utterance.
    - Use verbs like tap, click, enter, open, enable, disable, activate, deactivate, select, press, collapse, navigate, cancel, refresh, ...
    - Try to choose the verb that is most applicable for the type of UI Element (e.g., enable for switch, choose for radio buttons, open for submenu etc.)


# Required Output Structure
```
REASONING:
1. [First step in thinking process]
2. [Second step in thinking process]
[Continue with numbered steps as needed]
    
UTTERANCE:
[Describing the test action utterance as a single sentence without using the <color> <marker_type>]
```)TPL"},
    {TemplateId::TeacherExpectedPassed, "teacher_expected_passed", PlaceholderSyntax::Angle,
     R"TPL(As a test engineer for automotive infotainment systems, formulate result evaluations based on the current screen and determine if the test has passed or failed.

# Steps

0. Understand the UI Element:
    - Analyze the current context and active menu of the infotainment system.
    - Identify the position of the UI element marked by a <color> <marker_type>.
    - Determine the semantic meaning based on its text or icon.
    - Identify any parent elements crucial for semantic or functional meaning.
    - Identify any related elements crucial for semantic or functional meaning (e.g., text corresponding to a checkbox or switch).

1. Performed Test Action:
    - Think of a possible test action which was done and can be evaluation with the element marked by the <color> <marker_type>.

2. Reasoning:
    - Conduct reasoning for reaching the result evaluation by examining UI semantics with step-by-step thinking.

3. Determine Evaluation/Expected Result:
    - Provide a short and general description of the expected result of the test action that led to the current screen or highlighted UI element.
    - The expected result must be based solely on the current screen, not on previous or next screens.
    - Include presence, color, positional, semantic, state, and visual information as needed. Do not include the <color> <marker_type>.
    - The expected result can also just check the presence of the marked UI element

4. Incorporate Evaluation:
    - Assess why the expected result is met or not. Conclude with "FAILED" or "PASSED."

# Critical Rules
1. Never reference <color> <marker_type> in test action or expected result
2. Evaluate only current screen state
3. No assumptions about previous/future states
4. Use objective, verifiable statements
5. Document all reasoning steps
6. Provide clear pass/fail criteria
7. Valid evaluations include checking the presence, visibility, position, and properties of the UI element.

# Required Output Structure
```
TEST ACTION:
[Single sentence describing the specific test action performed]
    
REASONING:
1. [First step in thinking process]
2. [Second step in thinking process]
[Continue with numbered steps as needed]
    
EXPECTED RESULT:
[Describing the evaluated result as a single sentence without using the <color> <marker_type>]
    
CONCLUSION:
[PASSED/FAILED]
```)TPL"},
    {TemplateId::TeacherExpectedFailed, "teacher_expected_failed", PlaceholderSyntax::Angle,
     R"TPL(As a test engineer for automotive infotainment systems, formulate result evaluations based on the current screen and determine if the test has passed or failed.

# Steps

1. Understand the UI Element:
    - Analyze the current context and active menu of the infotainment system.
    - Identify the position of the UI element marked by a <color> <marker_type>.
    - Determine the semantic meaning based on its text or icon.
    - Identify any parent elements crucial for semantic or functional meaning.
    - Identify any related elements crucial for semantic or functional meaning (e.g., text corresponding to a checkbox or switch).


2. Determine Evaluation/Expected Result that is wrong for the current screen:
    - Provide a short and general description of the failed expected result of the test action that led to the current screen or highlighted UI element.
    - You should think of an expectation that is wrong or not in the screen.
    - The expected result must be based solely on the current screen, not on previous or next screens.
    - Include absence, different color, wrong positional, semantic, and wrong state information as needed. Do not include the <color> <marker_type>.
    - The expected result can also just check the absence of the marked UI element or if the screen shows the wrong context menue.

3. Reasoning:
    - Conduct reasoning for reaching the result evaluation by examining UI semantics with step-by-step thinking.

4. Incorporate Evaluation:
    - Assess why the expected result is met or not. Conclude with "FAILED" or "PASSED."

# Critical Rules
1. Never reference <color> <marker_type> in test action or expected result
2. The Expectation must be generated for elements within the <color> <marker_type>
3. No assumptions about previous/future states
4. Use objective, verifiable statements
5. Document all reasoning steps
6. Provide clear pass/fail criteria
7. Valid evaluations include checking the presence, visibility, position, and properties of the UI element

# Required Output Structure
```
REASONING:
1. [First step in thinking process]
2. [Second step in thinking process]
[Continue with numbered steps as needed]
    
EXPECTED RESULT:
[Describing the evaluated result as a single sentence without using the <color> <marker_type>]
    
CONCLUSION:
[PASSED/FAILED]
```)TPL"},
    {TemplateId::Rephrase, "rephrase", PlaceholderSyntax::Brace,
     R"TPL(Rephrase the following text, preserving its exact meaning, all UI element names, and the final PASSED/FAILED verdict if present: {text})TPL"},
};

const TemplateEntry& entry(TemplateId id) {
  for (const auto& e : kTemplates) {
    if (e.id == id) return e;
  }
  throw Error(ErrorCode::NotApplicable, "unknown template id");
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct Placeholder {
  std::size_t begin;  // offset of the opening delimiter
  std::size_t end;    // one past the closing delimiter
  std::string name;
  std::string format;  // "" or ".1f"
};

// Finds the next placeholder at or after `pos`, or returns false.
bool next_placeholder(std::string_view text, PlaceholderSyntax syntax, std::size_t pos, Placeholder& out) {
  const char open = syntax == PlaceholderSyntax::Brace ? '{' : '<';
  const char close = syntax == PlaceholderSyntax::Brace ? '}' : '>';
  while ((pos = text.find(open, pos)) != std::string_view::npos) {
    std::size_t i = pos + 1;
    if (i < text.size() && ident_start(text[i])) {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      const std::size_t name_end = j;
      std::string format;
      if (syntax == PlaceholderSyntax::Brace && j < text.size() && text[j] == ':') {
        std::size_t k = text.find(close, j);
        if (k == std::string_view::npos) return false;
        format = std::string(text.substr(j + 1, k - j - 1));
        j = k;
      }
      if (j < text.size() && text[j] == close) {
        out = {pos, j + 1, std::string(text.substr(i, name_end - i)), format};
        return true;
      }
    }
    pos = pos + 1;
  }
  return false;
}

std::string substitute(std::string_view text, PlaceholderSyntax syntax, const Bindings& bindings) {
  std::string out;
  out.reserve(text.size() + 64);
  std::set<std::string, std::less<>> used;
  std::size_t pos = 0;
  Placeholder ph;
  while (next_placeholder(text, syntax, pos, ph)) {
    out.append(text.substr(pos, ph.begin - pos));
    auto it = bindings.find(ph.name);
    if (it == bindings.end()) throw Error(ErrorCode::MissingBinding, ph.name);
    used.insert(ph.name);
    if (ph.format.empty()) {
      out += it->second;
    } else if (ph.format == ".1f") {
      auto rounded = round_decimal_text(it->second, 1);
      if (!rounded) throw Error(ErrorCode::MissingBinding, ph.name + " (value '" + it->second + "' is not numeric)");
      out += *rounded;
    } else {
      throw Error(ErrorCode::UnknownPlaceholder, ph.name + ":" + ph.format);
    }
    pos = ph.end;
  }
  out.append(text.substr(pos));
  for (const auto& [name, value] : bindings) {
    if (!used.count(name)) throw Error(ErrorCode::UnknownPlaceholder, name);
  }
  return out;
}

std::string replace_all(std::string_view text, std::string_view from, std::string_view to) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    std::size_t hit = text.find(from, pos);
    if (hit == std::string_view::npos) break;
    out.append(text.substr(pos, hit - pos));
    out.append(to);
    pos = hit + from.size();
  }
  out.append(text.substr(pos));
  return out;
}

}  // namespace

std::string_view template_name(TemplateId id) { return entry(id).name; }
std::string_view template_text(TemplateId id) { return entry(id).text; }
PlaceholderSyntax template_syntax(TemplateId id) { return entry(id).syntax; }

std::vector<std::string> template_placeholders(TemplateId id) {
  const auto& e = entry(id);
  std::vector<std::string> names;
  std::size_t pos = 0;
  Placeholder ph;
  while (next_placeholder(e.text, e.syntax, pos, ph)) {
    if (std::find(names.begin(), names.end(), ph.name) == names.end()) names.push_back(ph.name);
    pos = ph.end;
  }
  return names;
}

std::string render(TemplateId id, const Bindings& bindings) {
  const auto& e = entry(id);
  return substitute(e.text, e.syntax, bindings);
}

std::string strip_reasoning_phrase(std::string_view text) {
  return replace_all(text, kReasoningPhrase, kNoReasoningPhrase);
}

std::string no_reasoning_variant(TemplateId id) {
  if (id != TemplateId::InferExpectedResult) {
    throw Error(ErrorCode::NotApplicable, std::string(template_name(id)) + " has no reasoning variant");
  }
  return strip_reasoning_phrase(template_text(id));
}

std::string render_no_reasoning(TemplateId id, const Bindings& bindings) {
  return substitute(no_reasoning_variant(id), template_syntax(id), bindings);
}

nlohmann::json template_catalog() {
  nlohmann::json list = nlohmann::json::array();
  for (TemplateId id : kAllTemplates) {
    const auto& e = entry(id);
    list.push_back({{"name", e.name},
                    {"syntax", e.syntax == PlaceholderSyntax::Brace ? "brace" : "angle"},
                    {"placeholders", template_placeholders(id)},
                    {"text", e.text}});
  }
  return {{"templates", list}};
}

}  // namespace uigauge
