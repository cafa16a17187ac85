"""Directed causal graph with integer lags.

Vertices are 0-based in memory. Every file format (JSON, DOT, CSV) numbers
series from 1, so ``src=1`` in a file is vertex 0 here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    delay: int | None = None
    score: float | None = None


@dataclass
class CausalGraph:
    n: int
    edges: dict[tuple[int, int], Edge] = field(default_factory=dict)
    labels: list[str] | None = None
    meta: dict = field(default_factory=dict)

    def add_edge(self, src: int, dst: int, delay: int | None = None, score: float | None = None) -> None:
        if not (0 <= src < self.n and 0 <= dst < self.n):
            raise ValueError(f"edge {src + 1}->{dst + 1} out of range for {self.n} series")
        if delay is not None and delay < 0:
            raise ValueError(f"negative delay {delay} on edge {src + 1}->{dst + 1}")
        if (src, dst) in self.edges:
            raise ValueError(f"duplicate edge {src + 1}->{dst + 1}")
        self.edges[(src, dst)] = Edge(src, dst, delay, score)

    def pairs(self, self_loops: bool = True) -> set[tuple[int, int]]:
        return {k for k in self.edges if self_loops or k[0] != k[1]}

    def sorted_edges(self) -> list[Edge]:
        return [self.edges[k] for k in sorted(self.edges, key=lambda e: (e[1], e[0]))]

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.edges

    @classmethod
    def from_edges(cls, n: int, edges, **kw) -> "CausalGraph":
        g = cls(n, **kw)
        for e in edges:
            g.add_edge(*e)
        return g

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "n": self.n,
            "edges": [
                {"src": e.src + 1, "dst": e.dst + 1, "delay": e.delay, "score": e.score}
                for e in self.sorted_edges()
            ],
        }
        if self.labels:
            doc["labels"] = list(self.labels)
        if self.meta:
            doc["meta"] = self.meta
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "CausalGraph":
        g = cls(int(doc["n"]), labels=doc.get("labels"), meta=doc.get("meta", {}))
        for e in doc["edges"]:
            g.add_edge(int(e["src"]) - 1, int(e["dst"]) - 1, e.get("delay"), e.get("score"))
        return g

    def save_json(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load_json(cls, path) -> "CausalGraph":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dot(self, name: str = "causal") -> str:
        lines = [f"digraph {name} {{"]
        for v in range(self.n):
            label = self.labels[v] if self.labels else f"S{v + 1}"
            lines.append(f'  {v + 1} [label="{label}"];')
        for e in self.sorted_edges():
            attrs = [f'label="{e.delay if e.delay is not None else "?"}"']
            if e.score is not None:
                attrs.append(f'score="{e.score:.6g}"')
            lines.append(f"  {e.src + 1} -> {e.dst + 1} [{', '.join(attrs)}];")
        lines.append("}")
        return "\n".join(lines) + "\n"
