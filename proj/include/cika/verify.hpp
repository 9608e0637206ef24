#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cika {

/// Content of the last balanced \boxed{...} group, if any.
std::optional<std::string> extract_boxed(std::string_view completion);

/// Canonical answer form: \text{...} groups removed, whitespace trimmed and
/// collapsed to single spaces.
std::string normalize_answer(std::string_view raw);

/// True when the normalized answers agree, numerically at 1e-9 relative
/// tolerance if both parse as numbers (fractions like "3/4" included),
/// by exact string equality otherwise. Symmetric and reflexive.
bool answers_match(std::string_view a, std::string_view b);

struct VerifyResult {
    /// What was compared: the last boxed group, or the whole completion when
    /// no boxed group exists.
    std::string extracted;
    /// Raw string equality of the extracted answer against gold.
    bool strict = false;
    /// answers_match verdict after normalization. Trials score on this.
    bool normalized = false;
};

VerifyResult verify_answer(std::string_view completion, std::string_view gold);

} // namespace cika
