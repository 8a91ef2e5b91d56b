#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace uigauge {

enum class TemplateId {
  InferTestAction,
  InferExpectedResult,
  RespondTestAction,
  RespondExpectedResult,
  TeacherTestAction,
  TeacherExpectedPassed,
  TeacherExpectedFailed,
  Rephrase,
};

inline constexpr std::array<TemplateId, 8> kAllTemplates = {
    TemplateId::InferTestAction,       TemplateId::InferExpectedResult,   TemplateId::RespondTestAction,
    TemplateId::RespondExpectedResult, TemplateId::TeacherTestAction,     TemplateId::TeacherExpectedPassed,
    TemplateId::TeacherExpectedFailed, TemplateId::Rephrase,
};

/// `{name}` / `{name:.1f}` for inference-time templates, `<name>` for the
/// teacher prompts (which use angle-bracket placeholders).
enum class PlaceholderSyntax { Brace, Angle };

std::string_view template_name(TemplateId id);
std::string_view template_text(TemplateId id);
PlaceholderSyntax template_syntax(TemplateId id);

/// Distinct placeholder names in order of first appearance.
std::vector<std::string> template_placeholders(TemplateId id);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Substitutes every placeholder. Values are inserted verbatim except for
/// `:.1f` placeholders, whose (numeric) value is rounded half-up to one decimal.
/// Throws MissingBinding for an unbound placeholder and UnknownPlaceholder for
/// a binding the template does not use.
std::string render(TemplateId id, const Bindings& bindings);

inline constexpr std::string_view kReasoningPhrase = "Think step by step, conclude";
inline constexpr std::string_view kNoReasoningPhrase = "Determine";

/// Template text with the step-by-step phrase replaced; only defined for
/// InferExpectedResult (NotApplicable otherwise).
std::string no_reasoning_variant(TemplateId id);

/// Renders the no-reasoning prompt variant with the same bindings.
std::string render_no_reasoning(TemplateId id, const Bindings& bindings);

/// Replaces the reasoning phrase in arbitrary text (idempotent).
std::string strip_reasoning_phrase(std::string_view text);

nlohmann::json template_catalog();

}  // namespace uigauge
