#include "gvl/promptgen.hpp"

#include <cstdio>

#include "gvl/rng.hpp"

namespace gvl {
namespace {

constexpr const char* kPreambleA =
    "You are an expert roboticist tasked to predict task completion percentages for frames of a "
    "robot for the task of ";
constexpr const char* kPreambleB =
    ". The task completion percentages are between 0 and 100, where 100 corresponds to full task "
    "completion. We provide several examples of the robot performing the task at various stages "
    "and their corresponding task completion percentages. Note that these frames are in random "
    "order, so please pay attention to the individual frames when reasoning about task completion "
    "percentage.";
constexpr const char* kInitialAnchor =
    "In the initial robot scene, the task completion percentage is 0.";
constexpr const char* kEvalInstructionA = "Now, for the task of ";
constexpr const char* kEvalInstructionB =
    ", output the task completion percentage for the following frames that are presented in "
    "random order.\n"
    "For each frame, format your response as follows: \n"
    "Frame {i}: Description:{}, Task Completion Percentages: {}%\n"
    "\n"
    "Be rigorous, precise and remember that the task completion percentage is the percentage of "
    "the task that has been completed.\n"
    "\n"
    "Remember that the frames are presented in random order.";

void push_text(PromptSequence& seq, std::string text) {
    PromptPart part;
    part.kind = PromptPart::Kind::text;
    part.text = std::move(text);
    seq.parts.push_back(std::move(part));
}

void push_image(PromptSequence& seq, const FrameRef& frame) {
    PromptPart part;
    part.kind = PromptPart::Kind::image;
    part.image = frame;
    seq.parts.push_back(std::move(part));
}

std::string frame_header(int number) { return "Frame " + std::to_string(number) + ":\n"; }

} // namespace

int PromptSequence::image_count() const {
    int count = 0;
    for (const auto& part : parts)
        if (part.kind == PromptPart::Kind::image) ++count;
    return count;
}

std::string format_percent(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", value);
    return buf;
}

PromptSequence build_prompt(const EvalTask& task) {
    PromptSequence seq;
    std::string text = kPreambleA + task.instruction + kPreambleB;
    text += "\n\nInitial robot scene:\n";
    push_text(seq, std::move(text));
    push_image(seq, task.starting_frame);

    // Context frames carry a running number across all context episodes.
    std::string pending = std::string(kInitialAnchor) + "\n\n";
    int number = 1;
    for (const ShuffledSelection& ctx : task.context_episodes) {
        for (const LabeledFrame& lf : ctx.frames) {
            push_text(seq, pending + frame_header(number++));
            push_image(seq, lf.frame);
            pending = "Task Completion Percentage: " + format_percent(lf.true_progress) + "%\n\n";
        }
    }

    pending += kEvalInstructionA + task.instruction + kEvalInstructionB + "\n\n";
    seq.first_eval_number = number;
    bool first = true;
    for (const LabeledFrame& lf : task.eval_selection.frames) {
        push_text(seq, first ? pending + frame_header(number++) : "\n" + frame_header(number++));
        push_image(seq, lf.frame);
        first = false;
    }
    if (task.eval_selection.frames.empty()) push_text(seq, pending);
    return seq;
}

std::string render_with_sentinels(const PromptSequence& prompt) {
    std::string out;
    for (const auto& part : prompt.parts) {
        if (part.kind == PromptPart::Kind::text)
            out += part.text;
        else
            out += "[IMAGE]\n";
    }
    return out;
}

std::string golden_digest(const PromptSequence& prompt) {
    const std::uint64_t h = rng::hash64(render_with_sentinels(prompt));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace gvl
