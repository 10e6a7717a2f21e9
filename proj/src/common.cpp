#include "awi/common.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

namespace awi {

namespace {

constexpr std::array<std::pair<SourceCategory, std::string_view>, 6> kCategoryNames{{
    {SourceCategory::Issue, "Issue"},
    {SourceCategory::PullRequest, "PullRequest"},
    {SourceCategory::CommentReview, "CommentReview"},
    {SourceCategory::BranchCommit, "BranchCommit"},
    {SourceCategory::SerializedEvent, "SerializedEvent"},
    {SourceCategory::ScriptCollaborationRead, "ScriptCollaborationRead"},
}};

constexpr std::array<std::pair<ActionKind, std::string_view>, 3> kKindNames{{
    {ActionKind::Agentic, "Agentic"},
    {ActionKind::LlmAssisted, "LlmAssisted"},
    {ActionKind::NonLlm, "NonLlm"},
}};

constexpr std::array<std::pair<SinkEffect, std::string_view>, 4> kEffectNames{{
    {SinkEffect::GithubWriteApi, "GithubWriteApi"},
    {SinkEffect::ShellToolExec, "ShellToolExec"},
    {SinkEffect::FileWrite, "FileWrite"},
    {SinkEffect::NetworkEgress, "NetworkEgress"},
}};

constexpr std::array<std::pair<GuardStatus, std::string_view>, 4> kStatusNames{{
    {GuardStatus::Effective, "Effective"},
    {GuardStatus::Permissive, "Permissive"},
    {GuardStatus::Missing, "Missing"},
    {GuardStatus::Unknown, "Unknown"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
  for (const auto& [e, name] : table) {
    if (e == value) return name;
  }
  return "?";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const std::array<std::pair<E, std::string_view>, N>& table,
                          std::string_view text) {
  auto lowered = to_lower(text);
  for (const auto& [e, name] : table) {
    if (to_lower(name) == lowered) return e;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(SourceCategory c) { return name_of(kCategoryNames, c); }
std::string_view to_string(ActionKind k) { return name_of(kKindNames, k); }
std::string_view to_string(SinkEffect e) { return name_of(kEffectNames, e); }
std::string_view to_string(GuardStatus s) { return name_of(kStatusNames, s); }
std::string_view to_string(Pattern p) { return p == Pattern::P2A ? "P2A" : "P2S"; }

std::optional<SourceCategory> parse_source_category(std::string_view text) {
  return value_of(kCategoryNames, text);
}
std::optional<ActionKind> parse_action_kind(std::string_view text) {
  return value_of(kKindNames, text);
}
std::optional<SinkEffect> parse_sink_effect(std::string_view text) {
  return value_of(kEffectNames, text);
}
std::optional<GuardStatus> parse_guard_status(std::string_view text) {
  return value_of(kStatusNames, text);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

}  // namespace awi
