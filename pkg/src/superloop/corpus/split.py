"""Leakage-safe dataset splitting over the file-hash / track-id graph.

MIDI files matched to the same external track (directly or through a
chain of matches) must land in the same split, so assignment works on
connected components of the bipartite match graph.  Components are
placed greedily by size against the target ratios; hashes without any
match are assigned by an independent weighted draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPLIT_NAMES = ("train", "valid", "test")
DEFAULT_RATIOS = (0.81, 0.09, 0.10)


@dataclass
class SplitGraph:
    """Bipartite match graph: edges pair a file hash with a track id."""

    edges: list[tuple[str, str]] = field(default_factory=list)
    unmatched_hashes: list[str] = field(default_factory=list)

    def matched_hashes(self) -> list[str]:
        seen = {}
        for file_hash, _ in self.edges:
            seen.setdefault(file_hash, None)
        return list(seen)


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self):
        self.parent: dict = {}
        self.size: dict = {}

    def find(self, item):
        if item not in self.parent:
            self.parent[item] = item
            self.size[item] = 1
            return item
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def connected_hash_components(graph: SplitGraph) -> list[list[str]]:
    """Group matched file hashes by connected component.

    Track-id nodes participate in connectivity but are not reported.
    Deterministic: components and their members follow first-seen order.
    """
    uf = UnionFind()
    for file_hash, track_id in graph.edges:
        uf.union(("h", file_hash), ("t", track_id))
    members: dict = {}
    for file_hash in graph.matched_hashes():
        root = uf.find(("h", file_hash))
        members.setdefault(root, []).append(file_hash)
    return list(members.values())


def split_dataset(
    graph: SplitGraph,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    rng: np.random.Generator | None = None,
) -> dict[str, str]:
    """Assign every file hash to train/valid/test.

    Components are sorted by descending size and each goes to the split
    with the largest remaining deficit against its target count, so all
    hashes of a component share a split.  Unmatched hashes are drawn
    independently with the ratio weights.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    rng = rng if rng is not None else np.random.default_rng(0)
    assignment: dict[str, str] = {}

    components = connected_hash_components(graph)
    total_matched = sum(len(c) for c in components)
    targets = [r * total_matched for r in ratios]
    filled = [0.0, 0.0, 0.0]
    for component in sorted(components, key=lambda c: (-len(c), c[0])):
        deficits = [targets[i] - filled[i] for i in range(3)]
        split = int(np.argmax(deficits))
        for file_hash in component:
            assignment[file_hash] = SPLIT_NAMES[split]
        filled[split] += len(component)

    for file_hash in graph.unmatched_hashes:
        split = int(rng.choice(3, p=list(ratios)))
        assignment[file_hash] = SPLIT_NAMES[split]
    return assignment
