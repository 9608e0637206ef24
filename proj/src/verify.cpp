#include "cika/verify.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace cika {

namespace {

/// Index one past the matching close brace for the group opening at `open`,
/// or npos when the braces never balance.
std::size_t balanced_end(std::string_view text, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < text.size(); ++i) {
        if (text[i] == '{') ++depth;
        if (text[i] == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

std::optional<long double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* begin = s.c_str();
    char* end = nullptr;
    long double v = std::strtold(begin, &end);
    if (end != begin + s.size()) return std::nullopt;
    if (!std::isfinite(static_cast<double>(v))) return std::nullopt;
    return v;
}

/// Numbers and simple fractions "p/q"; anything else is non-numeric.
std::optional<long double> parse_numeric_answer(const std::string& s) {
    if (auto plain = parse_number(s)) return plain;
    auto slash = s.find('/');
    if (slash == std::string::npos || s.find('/', slash + 1) != std::string::npos) {
        return std::nullopt;
    }
    auto num = parse_number(s.substr(0, slash));
    auto den = parse_number(s.substr(slash + 1));
    if (!num || !den || *den == 0.0L) return std::nullopt;
    return *num / *den;
}

} // namespace

std::optional<std::string> extract_boxed(std::string_view completion) {
    static constexpr std::string_view kMarker = "\\boxed";
    std::optional<std::string> found;
    std::size_t pos = 0;
    while ((pos = completion.find(kMarker, pos)) != std::string_view::npos) {
        std::size_t open = pos + kMarker.size();
        pos = open;
        if (open >= completion.size() || completion[open] != '{') continue;
        std::size_t close = balanced_end(completion, open);
        if (close == std::string_view::npos) continue;
        found = std::string(completion.substr(open + 1, close - open - 2));
        pos = close;
    }
    return found;
}

std::string normalize_answer(std::string_view raw) {
    std::string stripped;
    stripped.reserve(raw.size());
    static constexpr std::string_view kText = "\\text";
    std::size_t i = 0;
    while (i < raw.size()) {
        if (raw.compare(i, kText.size(), kText) == 0) {
            std::size_t open = i + kText.size();
            if (open < raw.size() && raw[open] == '{') {
                std::size_t close = balanced_end(raw, open);
                if (close != std::string_view::npos) {
                    i = close;
                    continue;
                }
            }
        }
        stripped.push_back(raw[i]);
        ++i;
    }

    std::string out;
    out.reserve(stripped.size());
    bool pending_space = false;
    for (char c : stripped) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

bool answers_match(std::string_view a, std::string_view b) {
    std::string na = normalize_answer(a);
    std::string nb = normalize_answer(b);
    if (na == nb) return true;
    auto va = parse_numeric_answer(na);
    auto vb = parse_numeric_answer(nb);
    if (!va || !vb) return false;
    long double diff = std::fabs(*va - *vb);
    long double scale = std::max(std::fabs(*va), std::fabs(*vb));
    return diff <= 1e-9L * scale;
}

VerifyResult verify_answer(std::string_view completion, std::string_view gold) {
    VerifyResult r;
    auto boxed = extract_boxed(completion);
    r.extracted = boxed ? *boxed : std::string(completion);
    r.strict = r.extracted == gold;
    r.normalized = answers_match(r.extracted, gold);
    return r;
}

} // namespace cika
