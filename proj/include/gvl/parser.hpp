#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gvl {

enum class ParseStatus { ok, mismatch, empty };

std::string_view to_string(ParseStatus s);
ParseStatus parse_status_from_string(std::string_view s);

struct FramePrediction {
    int frame_number = 0;
    std::string description;
    double value = 0.0; // percent; out-of-range values kept as-is
};

struct PredictionSet {
    ParseStatus status = ParseStatus::empty;
    std::vector<FramePrediction> predictions; // sorted by frame_number; filled only when ok
    int expected_first = 0;
    int expected_count = 0;
    std::string raw_text;
};

// Extracts "Frame N: ... X%" lines from free-form model output. Lines are
// scanned top to bottom; a later line for the same frame number replaces the
// earlier one (reasoning models emit drafts before the final answer block).
// status is ok only when the parsed frame numbers are exactly
// {expected_first .. expected_first+expected_count-1}.
PredictionSet parse_predictions(const std::string& raw, int expected_first, int expected_count);

// Values ordered by ascending frame number, i.e. prompt presentation order.
// Throws StatusError unless p.status == ok.
std::vector<double> values_in_presentation_order(const PredictionSet& p);

} // namespace gvl
