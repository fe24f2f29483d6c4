// Stand-in TeX engine for tests. Usage: fake_tex <file.tex>
//
// Writes <stem>.log and, on success, <stem>.pdf. Deterministic rules:
//   missing \begin{document} / \end{document}   -> fatal, exit 1
//   control sequence named \bogus... or \undefined... -> "Undefined control sequence", exit 1
//   unbalanced braces                          -> "Missing } inserted" / "Too many }'s", exit 1
//   \fakesleep{N}                              -> sleeps N seconds first
//   \fakeempty                                 -> exit 0 without a PDF
//   \fakeblank                                 -> PDF that rasterizes to a blank page
//   \fakecorrupt                               -> PDF the rasterizer rejects
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tikzkit/digest.hpp"

namespace fs = std::filesystem;

namespace {

std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\') {
      ++i;
    } else if (line[i] == '%') {
      return line.substr(0, i);
    }
  }
  return line;
}

int fail(std::ofstream& log, const std::string& message) {
  log << message << "\n! Emergency stop.\nNo pages of output.\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: fake_tex <file.tex>\n";
    return 2;
  }
  const fs::path input = argv[argc - 1];
  std::ifstream in(input, std::ios::binary);
  if (!in) {
    std::cerr << "! I can't find file `" << input.string() << "'.\n";
    return 1;
  }
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  const fs::path stem = input.parent_path() / input.stem();
  std::ofstream log(stem.string() + ".log");
  log << "This is fakeTeX, Version 0.1\n(" << input.filename().string() << "\n";

  std::string all;
  for (const auto& l : lines) all += strip_comment(l) + "\n";

  if (const auto p = all.find("\\fakesleep{"); p != std::string::npos) {
    const int secs = std::atoi(all.c_str() + p + 11);
    std::this_thread::sleep_for(std::chrono::seconds(secs));
  }
  if (all.find("\\begin{document}") == std::string::npos) {
    return fail(log, "! LaTeX Error: Missing \\begin{document}.");
  }
  if (all.find("\\end{document}") == std::string::npos) {
    log << "*** (job aborted, no legal \\end found)\n";
    return fail(log, "! Emergency stop.");
  }

  int depth = 0;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string line = strip_comment(lines[n]);
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (c == '\\') {
        std::size_t j = i + 1;
        while (j < line.size() && std::isalpha(static_cast<unsigned char>(line[j]))) ++j;
        const std::string name = line.substr(i + 1, j - i - 1);
        if (name.rfind("bogus", 0) == 0 || name.rfind("undefined", 0) == 0) {
          log << "! Undefined control sequence.\nl." << n + 1 << " " << line.substr(0, j) << "\n";
          return fail(log, "?");
        }
        i = j > i + 1 ? j - 1 : i + 1;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth < 0) {
          log << "! Too many }'s.\nl." << n + 1 << " " << line.substr(0, i + 1) << "\n";
          return fail(log, "?");
        }
      }
    }
  }
  if (depth != 0) {
    log << "! Missing } inserted.\n<inserted text>\n}\n";
    return fail(log, "?");
  }

  if (all.find("\\fakeempty") != std::string::npos) {
    log << "No pages of output.\n";
    return 0;
  }
  std::ofstream pdf(stem.string() + ".pdf", std::ios::binary);
  pdf << "%PDF-1.4\n";
  if (all.find("\\fakecorrupt") != std::string::npos) {
    pdf << "CORRUPT\n";
  } else if (all.find("\\fakeblank") != std::string::npos) {
    pdf << "BLANK\n";
  } else {
    const auto b = all.find("\\begin{document}");
    const auto e = all.rfind("\\end{document}");
    pdf << "INK " << tikzkit::sha256_hex(std::string_view(all).substr(b, e - b)) << "\n";
  }
  log << "Output written on " << stem.filename().string() << ".pdf (1 page).\n";
  return 0;
}
