"""Pure-Python set-similarity kernels over integer bitmask signatures.

Reference implementation for ``_kernels.pyx``; both must produce
bit-identical floats, so summation order here is part of the contract
(pairs visited as i < j, i ascending, then j ascending).
"""

from __future__ import annotations

from typing import Sequence


def jaccard(a: int, b: int) -> float:
    union = (a | b).bit_count()
    if union == 0:
        return 1.0
    return (a & b).bit_count() / union


def mean_pairwise_jaccard(masks: Sequence[int]) -> float:
    n = len(masks)
    if n < 2:
        raise ValueError("need at least two signatures")
    total = 0.0
    for i in range(n - 1):
        a = masks[i]
        for j in range(i + 1, n):
            b = masks[j]
            union = (a | b).bit_count()
            total += (a & b).bit_count() / union if union else 1.0
    return total / (n * (n - 1) // 2)


def max_jaccard(mask: int, refs: Sequence[int]) -> float:
    if not refs:
        raise ValueError("empty reference")
    best = 0.0
    for r in refs:
        union = (mask | r).bit_count()
        s = (mask & r).bit_count() / union if union else 1.0
        if s > best:
            best = s
    return best


def novelties(masks: Sequence[int], refs: Sequence[int]) -> list[float]:
    return [1.0 - max_jaccard(m, refs) for m in masks]


def farthest_point_order(masks: Sequence[int], n: int, first: int = 0) -> list[int]:
    """Greedy max-min Jaccard-distance selection of ``n`` indices.

    Ties go to the lowest index.
    """
    size = len(masks)
    if size == 0 or n <= 0:
        return []
    n = min(n, size)
    chosen = [first]
    # nearest-selected distance per candidate; -1 marks already chosen
    near = [1.0 - jaccard(masks[first], m) for m in masks]
    near[first] = -1.0
    while len(chosen) < n:
        pick = -1
        best = -1.0
        for i in range(size):
            if near[i] > best:
                best = near[i]
                pick = i
        chosen.append(pick)
        near[pick] = -1.0
        p = masks[pick]
        for i in range(size):
            if near[i] >= 0.0:
                d = 1.0 - jaccard(p, masks[i])
                if d < near[i]:
                    near[i] = d
    return chosen
