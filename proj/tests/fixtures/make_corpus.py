#!/usr/bin/env python3
"""Writes the deterministic 200-document fixture corpus (manifest.jsonl)."""
import json
import random
import sys
from pathlib import Path

KINDS = ["arxiv", "github", "texse", "synthetic", "curated"]
LICENSES = ["permissive_cc", "nonexclusive_dist", "unknown"]
SHAPES = ["circle ({a})", "rectangle ({a},{b})", "ellipse ({a} and {b})", "-- ({a},{b})", "grid ({a},{b})"]
COLORS = ["red", "blue", "black", "teal", "orange"]


def num(rng):
    return f"{rng.uniform(0, 9):.2f}"


def picture(rng, lines):
    out = [f"\\begin{{tikzpicture}}[scale={rng.uniform(0.5, 2):.2f}, x={num(rng)}cm]"]
    for _ in range(lines):
        x, y = num(rng), num(rng)
        shape = rng.choice(SHAPES).format(a=num(rng), b=num(rng))
        # Every run of 8 tokens holds a random number, as in hand-drawn figures.
        out.append(f"\\draw[xshift={num(rng)}pt, {rng.choice(COLORS)}] ({x},{y}) {shape};")
        if rng.random() < 0.4:
            out.append(f"\\node at ({x},{y}) [above] {{${rng.randint(0, 999)}$}};")
    out.append("\\end{tikzpicture}")
    return "\n".join(out)


def commutative(rng):
    k = [rng.randint(0, 999) for _ in range(9)]
    rows = [f"{{{k[3 * r]}}} \\arrow[r] & {{{k[3 * r + 1]}}} \\arrow[d] & {{{k[3 * r + 2]}}}" for r in range(3)]
    return (f"\\begin{{tikzcd}}[sep={num(rng)}em]\n" + " \\\\\n".join(rows) + "\n\\end{tikzcd}")


def circuit(rng):
    x, y = num(rng), num(rng)
    return (f"\\begin{{circuitikz}}[scale={rng.uniform(0.5, 2):.2f}]\n"
            f"\\draw ({x},{y}) to[R=${rng.randint(1, 999)}$] ++({num(rng)},{num(rng)})"
            f" to[C=${rng.randint(1, 999)}$] ++({num(rng)},{num(rng)})"
            f" to[L=${rng.randint(1, 999)}$] ++(-{num(rng)},-{num(rng)});\n"
            "\\end{circuitikz}")


def document(i, rng):
    blocks = []
    n = rng.choice([1, 1, 1, 2, 3])
    for _ in range(n):
        r = rng.random()
        if r < 0.12:
            blocks.append(commutative(rng))
        elif r < 0.2:
            blocks.append(circuit(rng))
        elif r < 0.27:
            # Body below the minimum length.
            blocks.append("\\begin{tikzpicture}\\draw (0,0);\\end{tikzpicture}")
        elif r < 0.31:
            # Body above the maximum length.
            blocks.append(picture(rng, 130))
        elif r < 0.36:
            blocks.append("\\begin{tikzpicture}\n\\node {\\includegraphics{photo.png}};\n"
                          + "\\draw (0,0) -- (4,4) -- (8,0) -- cycle;\n" * 3 + "\\end{tikzpicture}")
        elif r < 0.58:
            # Undefined command: the stand-in model deletes the line.
            p = picture(rng, rng.randint(2, 5)).split("\n")
            p.insert(rng.randint(1, len(p) - 1), f"\\bogus{rng.choice(['Arrow', 'Fill', 'Node'])}[x]")
            blocks.append("\n".join(p))
        elif r < 0.66:
            # Brace error the stand-in model cannot fix.
            blocks.append(picture(rng, rng.randint(2, 4)).replace("\\end{tikzpicture}",
                                                                 f"\\node at ({num(rng)},{num(rng)}) {{oops;\n\\end{{tikzpicture}}"))
        else:
            blocks.append(picture(rng, rng.randint(2, 6)))
    if rng.random() < 0.1:
        # Exact duplicate of a shared figure.
        blocks.append("\\begin{tikzpicture}\n" + "\\draw[->] (0,0) -- (3,0) node[right] {$x$};\n"
                      "\\draw[->] (0,0) -- (0,3) node[above] {$y$};\n\\end{tikzpicture}")
    parts = ["\\documentclass{article}", "\\usepackage{tikz}", "\\begin{document}",
             f"Section {i}. Some prose % with a comment \\begin{{tikzpicture}}"]
    for b in blocks:
        parts.append("\\begin{figure}\n\\centering\n" + b + "\n\\caption{Figure.}\n\\end{figure}")
    parts.append("\\end{document}")
    return "\n".join(parts) + "\n"


def main(out_dir):
    rng = random.Random(20250531)
    rows = []
    for i in range(200):
        month, day = rng.choice([(1, 8), (2, 14), (3, 1), (4, 12), (5, 30), (5, 31), (6, 1), (7, 9), (9, 20)] + [(2, 2)] * 5)
        date = None if rng.random() < 0.05 else f"2025-{month:02d}-{day:02d}"
        rows.append({
            "id": f"doc-{i:03d}",
            "source_kind": rng.choice(KINDS),
            "license": rng.choice(LICENSES),
            "origin_key": f"origin-{rng.randint(0, 179):03d}",
            "date": date,
            "raw_text": document(i, rng),
        })
    path = Path(out_dir) / "manifest.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "corpus")
