"""Regenerate the bundled embedding file from the shipped vocabulary.

Vectors are random but fixed by seed; rerunning reproduces the committed
file byte for byte.
"""

import re
from pathlib import Path

import numpy as np

from tidyup import gamegen, kg

DIM = 32
SEED = 20240601

TEMPLATE_WORDS = """
you are in the on a an of and some pair nothing see closed is there exit exits
to east west north south floor take put insert into from go open look inventory
carrying your score has gone up by one point . , - =
""".split()


def vocabulary() -> list[str]:
    words: set[str] = set(TEMPLATE_WORDS)
    dataset = gamegen.bundled_dataset()
    for name in dataset.rooms:
        words.update(name.split())
    for fixture in dataset.fixtures:
        words.update(fixture.name.split())
    for entry in dataset.objects:
        words.update(entry.name.split())
        for slot in entry.attributes:
            words.update(slot)
    graph = kg.bundled_graph()
    for node in graph.nodes:
        words.update(node.split("_"))
    return sorted(w for w in words if w)


def main() -> None:
    words = vocabulary()
    rng = np.random.default_rng(SEED)
    out = Path(__file__).resolve().parent.parent / "src" / "tidyup" / "data" / "embeddings.txt"
    with open(out, "w", encoding="utf-8") as handle:
        for word in words:
            vec = rng.uniform(-0.5, 0.5, DIM)
            values = " ".join(f"{v:.5f}" for v in vec)
            handle.write(f"{word} {values}\n")
    print(f"wrote {len(words)} x {DIM} vectors to {out}")


if __name__ == "__main__":
    main()
