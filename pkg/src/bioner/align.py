"""Character-level edit-distance alignment of generated text against its source.

Generated sentence copies drift from the original (dropped words, typos), so
offsets found in a copy are projected onto the source through a minimum edit
alignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentRejected

DEFAULT_MAX_RATIO = 0.5


@dataclass(frozen=True)
class Alignment:
    distance: int
    ratio: float
    # char_map[i]: source offset aligned with generated[i]; for an inserted
    # character, the offset of the next source character still to be aligned
    char_map: tuple[int, ...]
    # boundary maps over generated positions 0..len(generated)
    start_map: tuple[int, ...]
    end_map: tuple[int, ...]

    def project(self, start: int, end: int) -> tuple[int, int]:
        """Map a generated span ``[start, end)`` to source offsets."""
        return self.start_map[start], self.end_map[end]


def _codes(s: str) -> np.ndarray:
    return np.fromiter(map(ord, s), dtype=np.int64, count=len(s))


def edit_matrix(generated: str, source: str) -> np.ndarray:
    """Full (len(generated)+1) x (len(source)+1) Levenshtein table."""
    n, m = len(generated), len(source)
    table = np.empty((n + 1, m + 1), dtype=np.int64)
    cols = np.arange(m + 1, dtype=np.int64)
    table[0] = cols
    src = _codes(source)
    gen = _codes(generated)
    for i in range(1, n + 1):
        prev = table[i - 1]
        tmp = np.empty(m + 1, dtype=np.int64)
        tmp[0] = i
        tmp[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (src != gen[i - 1]))
        # horizontal moves: row[j] = min_k<=j tmp[k] + (j - k)
        table[i] = np.minimum.accumulate(tmp - cols) + cols
    return table


def identity_alignment(text: str) -> Alignment:
    idx = tuple(range(len(text) + 1))
    return Alignment(0, 0.0, idx[:-1], idx, idx)


def _common_affixes(a: str, b: str) -> tuple[int, int]:
    limit = min(len(a), len(b))
    pre = 0
    while pre < limit and a[pre] == b[pre]:
        pre += 1
    suf = 0
    while suf < limit - pre and a[-1 - suf] == b[-1 - suf]:
        suf += 1
    return pre, suf


def edit_alignment(generated: str, source: str) -> Alignment:
    """Minimum edit alignment of ``generated`` onto ``source``.

    A shared prefix and suffix are matched outright (this never changes the
    distance); the remainder is traced back with preference match >
    substitute > delete > insert. "delete" skips a source character, "insert"
    consumes a generated one.
    """
    if generated == source:
        return identity_alignment(source)
    pre, suf = _common_affixes(generated, source)
    gen_mid = generated[pre:len(generated) - suf]
    src_mid = source[pre:len(source) - suf]
    n, m = len(gen_mid), len(src_mid)
    table = edit_matrix(gen_mid, src_mid)
    dist = int(table[n, m])

    start_map = [-1] * (n + 1)
    end_map = [m + 1] * (n + 1)

    def visit(i, j):
        if j > start_map[i]:
            start_map[i] = j
        if j < end_map[i]:
            end_map[i] = j

    i, j = n, m
    visit(i, j)
    while i or j:
        d = table[i, j]
        if i and j and gen_mid[i - 1] == src_mid[j - 1] and d == table[i - 1, j - 1]:
            i, j = i - 1, j - 1
        elif i and j and d == table[i - 1, j - 1] + 1:
            i, j = i - 1, j - 1
        elif j and d == table[i, j - 1] + 1:
            j -= 1
        else:
            i -= 1
        visit(i, j)

    head = list(range(pre))
    tail_src = len(source) - suf
    start = head + [pre + j for j in start_map] + [tail_src + k for k in range(1, suf + 1)]
    end = head + [pre + j for j in end_map] + [tail_src + k for k in range(1, suf + 1)]
    return Alignment(
        distance=dist,
        ratio=dist / max(1, len(source)),
        char_map=tuple(start[:-1]),
        start_map=tuple(start),
        end_map=tuple(end),
    )


def align_to_source(generated: str, source: str, max_ratio: float | None = DEFAULT_MAX_RATIO) -> Alignment:
    """Align ``generated`` to ``source``; raise AlignmentRejected past ``max_ratio``."""
    al = edit_alignment(generated, source)
    if max_ratio is not None and al.ratio > max_ratio:
        raise AlignmentRejected(al.ratio, max_ratio)
    return al
