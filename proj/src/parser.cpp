#include "gvl/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>

#include "gvl/errors.hpp"

namespace gvl {

std::string_view to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::ok: return "ok";
        case ParseStatus::mismatch: return "mismatch";
        case ParseStatus::empty: return "empty";
    }
    return "empty";
}

ParseStatus parse_status_from_string(std::string_view s) {
    if (s == "ok") return ParseStatus::ok;
    if (s == "mismatch") return ParseStatus::mismatch;
    if (s == "empty") return ParseStatus::empty;
    throw DomainError("unknown parse status: " + std::string(s));
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Markdown decoration commonly wrapped around answer lines: bold/italic
// markers, headers, bullets, blockquotes, code ticks.
bool is_noise(char c) {
    return c == ' ' || c == '\t' || c == '*' || c == '#' || c == '>' || c == '-' || c == '+' ||
           c == '`' || c == '_';
}

// Matches [noise]* "Frame" WS+ DIGIT+ and reports the frame number plus the
// offset just past the digits. Case-sensitive on purpose: the response format
// asks for a capital F, and lowercase "frame" in prose must not trigger.
std::optional<std::pair<int, std::size_t>> match_frame_header(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && is_noise(line[i])) ++i;
    static constexpr std::string_view kWord = "Frame";
    if (line.compare(i, kWord.size(), kWord) != 0) return std::nullopt;
    i += kWord.size();
    std::size_t ws = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
        ++i;
        ++ws;
    }
    if (ws == 0 || i >= line.size() || !is_digit(line[i])) return std::nullopt;
    long number = 0;
    while (i < line.size() && is_digit(line[i])) {
        number = number * 10 + (line[i] - '0');
        if (number > 1000000) return std::nullopt; // absurd header, not an answer line
        ++i;
    }
    return std::make_pair(static_cast<int>(number), i);
}

// Consumes a numeric token starting at `i` (a digit). Thousands separators are
// accepted when grouped by three; a malformed comma run invalidates the whole
// token. Returns the value and whether the token is well-formed; always
// advances `i` past everything consumed.
std::optional<double> consume_number(std::string_view s, std::size_t& i) {
    std::string digits;
    bool valid = true;
    std::size_t group = 0; // digits since the last comma (0 = no comma yet)
    bool saw_comma = false;
    std::size_t leading = 0;
    while (i < s.size() && is_digit(s[i])) {
        digits += s[i];
        ++leading;
        ++i;
    }
    while (i < s.size() && s[i] == ',' && i + 1 < s.size() && is_digit(s[i + 1])) {
        if (!saw_comma && leading > 3) valid = false;
        saw_comma = true;
        ++i; // comma
        group = 0;
        while (i < s.size() && is_digit(s[i])) {
            digits += s[i];
            ++group;
            ++i;
        }
        if (group != 3) valid = false;
    }
    if (i < s.size() && s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1])) {
        digits += '.';
        ++i;
        while (i < s.size() && is_digit(s[i])) {
            digits += s[i];
            ++i;
        }
    }
    if (!valid) return std::nullopt;
    return std::strtod(digits.c_str(), nullptr);
}

bool ends_with_percentage_label(std::string_view before) {
    std::size_t e = before.size();
    while (e > 0 && (before[e - 1] == ' ' || before[e - 1] == '\t')) --e;
    before = before.substr(0, e);
    for (std::string_view label : {"Percentage:", "Percentages:"}) {
        if (before.size() >= label.size() &&
            before.substr(before.size() - label.size()) == label)
            return true;
    }
    return false;
}

// Last number on the line that reads like a percentage: either followed by an
// optional-space "%" or directly after a "Percentage(s):" label. A sign glued
// to the number disqualifies it (negative percentages are never answers).
std::optional<double> last_percent_value(std::string_view rest) {
    std::optional<double> found;
    std::size_t i = 0;
    while (i < rest.size()) {
        if (!is_digit(rest[i])) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        const std::optional<double> value = consume_number(rest, i);
        if (!value) continue;
        if (start > 0 && (rest[start - 1] == '+' || rest[start - 1] == '-')) continue;
        std::size_t after = i;
        while (after < rest.size() && (rest[after] == ' ' || rest[after] == '\t')) ++after;
        const bool percent_sign = after < rest.size() && rest[after] == '%';
        if (percent_sign || ends_with_percentage_label(rest.substr(0, start))) found = value;
    }
    return found;
}

std::string extract_description(std::string_view rest) {
    static constexpr std::string_view kLabel = "Description:";
    const std::size_t pos = rest.find(kLabel);
    if (pos == std::string_view::npos) return {};
    std::string_view d = rest.substr(pos + kLabel.size());
    const std::size_t stop = d.find(", Task Completion");
    if (stop != std::string_view::npos) d = d.substr(0, stop);
    while (!d.empty() && (d.front() == ' ' || d.front() == '\t')) d.remove_prefix(1);
    while (!d.empty() && (d.back() == ' ' || d.back() == '\t' || d.back() == '\r')) d.remove_suffix(1);
    return std::string(d);
}

} // namespace

PredictionSet parse_predictions(const std::string& raw, int expected_first, int expected_count) {
    if (expected_count < 1) throw DomainError("expected_count must be >= 1");
    PredictionSet out;
    out.expected_first = expected_first;
    out.expected_count = expected_count;
    out.raw_text = raw;

    std::map<int, FramePrediction> by_frame;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t eol = raw.find('\n', pos);
        if (eol == std::string::npos) eol = raw.size();
        std::string_view line(raw.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;

        const auto header = match_frame_header(line);
        if (!header) continue;
        std::string_view rest = line.substr(header->second);
        const auto value = last_percent_value(rest);
        if (!value) continue;
        FramePrediction p;
        p.frame_number = header->first;
        p.description = extract_description(rest);
        p.value = *value;
        by_frame[p.frame_number] = std::move(p); // later lines override earlier drafts
    }

    if (by_frame.empty()) {
        out.status = ParseStatus::empty;
        return out;
    }
    bool exact = static_cast<int>(by_frame.size()) == expected_count;
    if (exact) {
        int want = expected_first;
        for (const auto& [frame, _] : by_frame) {
            if (frame != want++) {
                exact = false;
                break;
            }
        }
    }
    if (!exact) {
        out.status = ParseStatus::mismatch;
        return out;
    }
    out.status = ParseStatus::ok;
    out.predictions.reserve(by_frame.size());
    for (auto& [_, p] : by_frame) out.predictions.push_back(std::move(p));
    return out;
}

std::vector<double> values_in_presentation_order(const PredictionSet& p) {
    if (p.status != ParseStatus::ok)
        throw StatusError("values_in_presentation_order requires an ok prediction set");
    std::vector<double> values;
    values.reserve(p.predictions.size());
    for (const auto& pred : p.predictions) values.push_back(pred.value);
    return values;
}

} // namespace gvl
