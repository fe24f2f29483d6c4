#include <gtest/gtest.h>

#include "test_support.hpp"
#include "tikzkit/chat_client.hpp"
#include "tikzkit/errors.hpp"
#include "tikzkit/prompts.hpp"
#include "tikzkit/raster.hpp"
#include "tikzkit/vlm_describe.hpp"

using namespace tikzkit;

namespace {

const std::string kGood =
    "A black circle labeled A sits at the center, with a thin red line L1 running from its right "
    "edge to a blue square labeled B two units to the right. A small arrow points from square B "
    "toward the upper left corner, and the label $x_0$ is placed directly above circle A.";

std::filesystem::path tiny_png(const std::filesystem::path& dir) {
  Raster r(8, 8, 255);
  r.pixel(3, 3)[0] = 0;
  const auto p = dir / "img.png";
  write_png(p, r);
  return p;
}

}  // namespace

TEST(DescribeValidation, Categories) {
  const DescribeConfig c;
  EXPECT_EQ(validate_description(kGood, c), DescriptionValidation::ok);
  EXPECT_EQ(validate_description("Certainly! " + kGood, c), DescriptionValidation::contains_banned_preamble);
  EXPECT_EQ(validate_description("\"The image depicts " + kGood, c), DescriptionValidation::contains_banned_preamble);
  EXPECT_EQ(validate_description("- " + kGood, c), DescriptionValidation::contains_list_markup);
  EXPECT_EQ(validate_description(kGood + "\nSecond line.", c), DescriptionValidation::contains_list_markup);
  EXPECT_EQ(validate_description("1. " + kGood, c), DescriptionValidation::contains_list_markup);
  EXPECT_EQ(validate_description("A circle.", c), DescriptionValidation::too_short);
  EXPECT_EQ(validate_description(std::string(250, 'a'), c), DescriptionValidation::too_short);
}

TEST(DescribeValidation, BoundaryLength) {
  DescribeConfig c;
  std::string s = "A line.";
  while (s.size() < 199) s.insert(0, "a");
  EXPECT_EQ(validate_description(s, c), DescriptionValidation::too_short);
  s.insert(0, "a");
  EXPECT_EQ(validate_description(s, c), DescriptionValidation::ok);
}

TEST(Describe, SendsPromptAndImageAndAcceptsValidText) {
  tikzkit::testing::ScratchDir dir("describe");
  const auto img = tiny_png(dir.path());
  ScriptedChatClient client({kGood}, "vlm");
  const auto r = describe("rec", img, client, DescribeConfig{});
  EXPECT_EQ(r.validation, DescriptionValidation::ok);
  EXPECT_EQ(r.description, kGood);
  EXPECT_EQ(r.requests, 1);
  const auto parts = client.requests().at(0).messages.at(0).parts;
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].text, describe_prompt());
  EXPECT_EQ(parts[1].kind, ContentPart::Kind::image);
  EXPECT_EQ(parts[1].media_type, "image/png");
  EXPECT_FALSE(parts[1].data_base64.empty());
}

TEST(Describe, RetriesOnceThenReportsTheCategory) {
  tikzkit::testing::ScratchDir dir("describe-retry");
  const auto img = tiny_png(dir.path());
  ScriptedChatClient fixes({"Sure, here it is.", kGood});
  EXPECT_EQ(describe("r", img, fixes, DescribeConfig{}).validation, DescriptionValidation::ok);
  EXPECT_EQ(fixes.calls(), 2u);

  ScriptedChatClient never({"* bullet one"});
  const auto r = describe("r", img, never, DescribeConfig{});
  EXPECT_EQ(r.validation, DescriptionValidation::contains_list_markup);
  EXPECT_EQ(r.requests, 2);
}

TEST(Describe, TransportFailureIsItsOwnCategory) {
  tikzkit::testing::ScratchDir dir("describe-transport");
  const auto img = tiny_png(dir.path());
  ScriptedChatClient down({std::nullopt});
  const auto r = describe("r", img, down, DescribeConfig{});
  EXPECT_EQ(r.validation, DescriptionValidation::transport_error);
  EXPECT_FALSE(r.error.empty());
}

TEST(Describe, UndecodableImageIsAnInputError) {
  tikzkit::testing::ScratchDir dir("describe-bad");
  write_text_file(dir.path() / "x.png", "not a png");
  ScriptedChatClient client({kGood});
  EXPECT_THROW(describe("r", dir.path() / "x.png", client, DescribeConfig{}), InputError);
  EXPECT_EQ(client.calls(), 0u);
}

TEST(DescribePrompt, ShapeAndExemplars) {
  const auto& p = describe_prompt();
  EXPECT_EQ(p.rfind("You are a scientific illustrator describing images for precise redrawing in TikZ.\n\n", 0), 0u);
  const std::string tail = "Write a description in this exact style for the given image.";
  EXPECT_EQ(p.substr(p.size() - tail.size()), tail);
  EXPECT_NE(p.find("Here are a few examples:\n\nA thin black horizontal line"), std::string::npos);
  EXPECT_NE(p.find("The legend is placed inside the chart at the top left.\n\n"), std::string::npos);
}

TEST(GenerationPrompt, ExactTemplate) {
  EXPECT_EQ(build_generation_prompt("a red circle"),
            "Generate a complete LaTeX document that contains a TikZ figure according to the "
            "following requirements:\na red circle\nWrap your code using "
            "\\documentclass[tikz]{standalone}, and include \\begin{document}...\\end{document}. "
            "Only output valid LaTeX code with no extra text.");
}

TEST(DescribeConfig, JsonRoundTrip) {
  DescribeConfig c;
  c.min_chars = 50;
  c.temperature = 0.2;
  const auto back = describe_config_from_json(to_json(c));
  EXPECT_EQ(back.min_chars, 50u);
  EXPECT_EQ(back.temperature, 0.2);
  EXPECT_EQ(back.banned_openers, c.banned_openers);
}
