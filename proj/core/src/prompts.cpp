#include "tikzkit/prompts.hpp"

#include "tikzkit/text.hpp"

namespace tikzkit {
namespace {

constexpr std::string_view kRepairInstruction =
    "I will provide you with some TikZ code and the corresponding LaTeX error log. Fix the "
    "TikZ code so that it compiles without errors. Only output the corrected TikZ code.";

constexpr std::string_view kDescribeParagraphs[] = {
    "You are a scientific illustrator describing images for precise redrawing in TikZ.",
    "Your task is to describe the image in precise, continuous prose without bullet points, "
    "lists, or line breaks.",
    "Start directly with the main object or scene. Avoid introductory phrases like "
    "'Certainly!', 'The image depicts...', 'Here is a precise description.'.",
    "Use clear, active language focused on geometry, labels, colors, spatial relationships, "
    "coordinates, and other visible properties.",
    "Describe all visible elements such as shapes, lines, arrows, and labels, including their "
    "relative or absolute positions, dimensions, and orientation.",
    "Use consistent, minimal naming for objects (e.g., 'circle A', 'line L1') and specify "
    "label positions relative to shapes precisely.",
    "Only describe exact, concrete visual elements that enable precise image reconstruction "
    "in TikZ.",
    "Avoid vague, interpretive, or inferential language, and exclude summaries, conclusions, "
    "or commentary about the image's meaning, function, or aesthetics.",
    "Here are a few examples:",
    "A thin black horizontal line centered in the middle, containing nine evenly spaced black "
    "dots, and labeled $x_2$ at the left. Each dot is connected by a thin black line in an "
    "alternating pattern to either $x_0$ (placed at the top middle) or $x_1$ (placed at the "
    "bottom middle).",
    "A line chart has different instruction scales of 1/10, 1/4, 1/2, and 1 on the x-axis. On "
    "the y-axis it shows BLEU scores between 20 and 50, with steps of 5. The chart contains "
    "three lines with Zh-En in blue, De-En in red, and Fr-En in brown. All BLEU scores are "
    "initially 20 at the lowest instruction scale. As the instruction scale increases, BLEU "
    "scores improve for all pairs. De-En is the highest, closely followed by Fr-En and then "
    "Zh-En far below. The increase is largest from 1/10 to 1/4 and only marginally above an "
    "instruction scale of 1/4. The legend is placed inside the chart at the top left.",
    "Write a description in this exact style for the given image.",
};

}  // namespace

std::string build_repair_prompt(std::string_view code, std::string_view log,
                                std::size_t max_log_bytes) {
  std::string embedded;
  if (trim(log).empty()) {
    embedded = kEmptyLogPlaceholder;
  } else if (log.size() > max_log_bytes) {
    auto tail = log.substr(log.size() - max_log_bytes);
    // Do not start in the middle of a UTF-8 sequence.
    while (!tail.empty() && (static_cast<unsigned char>(tail.front()) & 0xC0) == 0x80) {
      tail.remove_prefix(1);
    }
    embedded = std::string(kLogTruncationMarker) + std::string(tail);
  } else {
    embedded = log;
  }
  std::string out;
  out.reserve(kRepairInstruction.size() + code.size() + embedded.size() + 64);
  out += kRepairInstruction;
  out += "\n\n";
  out += kRepairCodeHeader;
  out += code;
  out += "\n\n";
  out += kRepairLogHeader;
  out += embedded;
  return out;
}

std::optional<RepairPromptParts> parse_repair_prompt(std::string_view prompt) {
  const std::string head = std::string(kRepairInstruction) + "\n\n" + std::string(kRepairCodeHeader);
  if (!prompt.starts_with(head)) return std::nullopt;
  prompt.remove_prefix(head.size());
  const std::string sep = "\n\n" + std::string(kRepairLogHeader);
  const auto at = prompt.rfind(sep);
  if (at == std::string_view::npos) return std::nullopt;
  return RepairPromptParts{std::string(prompt.substr(0, at)),
                           std::string(prompt.substr(at + sep.size()))};
}

const std::string& describe_prompt() {
  static const std::string text = [] {
    std::string s;
    for (auto p : kDescribeParagraphs) {
      if (!s.empty()) s += "\n\n";
      s += p;
    }
    return s;
  }();
  return text;
}

std::string build_generation_prompt(std::string_view figure_description) {
  std::string out =
      "Generate a complete LaTeX document that contains a TikZ figure according to the "
      "following requirements:\n";
  out += figure_description;
  out +=
      "\nWrap your code using \\documentclass[tikz]{standalone}, and include "
      "\\begin{document}...\\end{document}. Only output valid LaTeX code with no extra text.";
  return out;
}

}  // namespace tikzkit
