#pragma once

#include <string>
#include <vector>

#include "gvl/ingest.hpp"
#include "gvl/sampler.hpp"

namespace gvl {

struct EvalTask {
    std::string instruction;
    FrameRef starting_frame; // timestep 0 of the eval episode
    std::vector<ShuffledSelection> context_episodes; // k fully labeled selections
    ShuffledSelection eval_selection;                 // labels present, never rendered
    int shots = 0;
};

struct PromptPart {
    enum class Kind { text, image };
    Kind kind = Kind::text;
    std::string text; // kind == text
    FrameRef image;   // kind == image
};

struct PromptSequence {
    std::vector<PromptPart> parts;
    int image_count() const;
    int first_eval_frame_number() const { return first_eval_number; }
    int first_eval_number = 1;
};

// Renders the interleaved text/image prompt: preamble, initial-scene anchor,
// one labeled block per context frame (numbered 1..k*n_ctx across episodes),
// the response-format instructions, then unlabeled eval frames numbered from
// k*n_ctx+1.
PromptSequence build_prompt(const EvalTask& task);

// Text rendering for golden files: text parts verbatim, each image as an
// "[IMAGE]" sentinel line.
std::string render_with_sentinels(const PromptSequence& prompt);

// Stable content digest of the rendered prompt (image slots included as
// sentinels, pixels excluded).
std::string golden_digest(const PromptSequence& prompt);

// "{:.1f}"-style fixed one-decimal percent formatting used for context labels.
std::string format_percent(double value);

} // namespace gvl
