"""Line-oriented text format for graphs.

::

    nodes: A,B,C,D
    kind: PAG
    A o-> B
    B <-> C
    C -- D

The edge token's first character is the mark at the left node (``-`` tail,
``<`` arrow, ``o`` circle) and its last character the mark at the right node
(``-``, ``>``, ``o``); an optional ``-`` may sit in between.  ``kind`` is
optional on input and always written on output.  ``#`` starts a comment.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .types import CPDAG, PAG, CausalDag, GraphError, Mag, Mark, Pattern

_LEFT = {"-": Mark.TAIL, "<": Mark.ARROW, "o": Mark.CIRCLE}
_RIGHT = {"-": Mark.TAIL, ">": Mark.ARROW, "o": Mark.CIRCLE}
_LEFT_CH = {v: k for k, v in _LEFT.items()}
_RIGHT_CH = {v: k for k, v in _RIGHT.items()}
KINDS = ("DAG", "MAG", CPDAG, PAG)
# written with arrowheads pointing right
_FLIP = {(Mark.ARROW, Mark.TAIL), (Mark.ARROW, Mark.CIRCLE), (Mark.CIRCLE, Mark.TAIL)}


def format_edge(names, edge) -> str:
    i, j, mi, mj = edge
    if (mi, mj) in _FLIP:
        i, j, mi, mj = j, i, mj, mi
    left, right = _LEFT_CH[mi], _RIGHT_CH[mj]
    token = left + right if mi == Mark.TAIL else left + "-" + right
    return f"{names[i]} {token} {names[j]}"


def graph_kind(g) -> str:
    if isinstance(g, CausalDag):
        return "DAG"
    if isinstance(g, Mag):
        return "MAG"
    return g.kind


def dumps(g) -> str:
    for n in g.names:
        if not n or any(ch.isspace() for ch in n) or "," in n:
            raise GraphError(f"node name {n!r} cannot be written in the graph format")
    lines = ["nodes: " + ",".join(g.names), f"kind: {graph_kind(g)}"]
    lines += [format_edge(g.names, e) for e in g.edges()]
    return "\n".join(lines) + "\n"


def loads(text: str):
    names = None
    kind = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("nodes:"):
            names = [n.strip() for n in line[len("nodes:"):].split(",") if n.strip()]
            continue
        if line.startswith("kind:"):
            kind = line[len("kind:"):].strip().upper()
            if kind not in KINDS:
                raise GraphError(f"line {lineno}: unknown graph kind {kind!r}")
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GraphError(f"line {lineno}: expected '<node> <edge> <node>', got {raw!r}")
        a, token, b = parts
        if len(token) not in (2, 3) or token[0] not in _LEFT or token[-1] not in _RIGHT \
                or (len(token) == 3 and token[1] != "-"):
            raise GraphError(f"line {lineno}: malformed edge token {token!r}")
        edges.append((lineno, a, b, _LEFT[token[0]], _RIGHT[token[-1]]))
    if names is None:
        raise GraphError("missing 'nodes:' header")
    index = {n: i for i, n in enumerate(names)}
    if len(index) != len(names):
        raise GraphError("duplicate node names in header")
    d = len(names)
    M = np.zeros((d, d), dtype=np.int8)
    for lineno, a, b, ma, mb in edges:
        if a not in index or b not in index:
            raise GraphError(f"line {lineno}: unknown node in edge {a} {b}")
        i, j = index[a], index[b]
        if i == j or M[i, j] != Mark.NONE:
            raise GraphError(f"line {lineno}: self-loop or repeated edge {a} {b}")
        M[j, i], M[i, j] = ma, mb
    if kind is None:
        kind = _infer_kind(M)
    if kind == "DAG":
        directed = (M == Mark.ARROW) & (M.T == Mark.TAIL)
        if np.count_nonzero(directed) * 2 != np.count_nonzero(M):
            raise GraphError("a DAG may only contain directed edges")
        return CausalDag.from_adjacency(directed, names)
    if kind == "MAG":
        return Mag(M, names)
    return Pattern(M, kind, names)


def _infer_kind(M) -> str:
    if np.any(M == Mark.CIRCLE):
        return PAG
    if np.any((M == Mark.ARROW) & (M.T == Mark.ARROW)):
        return "MAG"
    if np.any((M == Mark.TAIL) & (M.T == Mark.TAIL)):
        return CPDAG
    return "DAG"


def read_graph(path) -> object:
    return loads(Path(path).read_text(encoding="utf-8"))


def write_graph(g, path) -> None:
    Path(path).write_text(dumps(g), encoding="utf-8")
