"""Pareto machinery: dominance, nondominated sorting, hypervolume, success rate.

Maximization convention throughout: x dominates y when x >= y componentwise
with at least one strict inequality.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a >= b) and np.any(a > b))


def nondominated_sort(objectives: np.ndarray) -> list[list[int]]:
    """Fronts F1, F2, ... as index lists; empty input gives no fronts."""
    objs = np.asarray(objectives, dtype=np.float64)
    if objs.size == 0:
        return []
    if objs.ndim != 2:
        raise ContractError("objectives must be (n, M)")
    n = objs.shape[0]
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = np.zeros(n, dtype=int)
    ge = np.all(objs[:, None, :] >= objs[None, :, :], axis=2)
    gt = np.any(objs[:, None, :] > objs[None, :, :], axis=2)
    dom = ge & gt  # dom[i, j]: i dominates j
    for i in range(n):
        dominated_by[i] = list(np.nonzero(dom[i])[0])
        counts[i] = int(dom[:, i].sum())
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def hypervolume(front: np.ndarray, reference: np.ndarray) -> float:
    """Lebesgue measure of the union of boxes [reference, point].

    Exact slicing recursion; points not dominating the reference are
    clipped out. Maximization convention.
    """
    front = np.asarray(front, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if front.size == 0:
        return 0.0
    if front.ndim != 2 or front.shape[1] != reference.size:
        raise ContractError("front and reference dimensionality mismatch")
    pts = front[np.all(front > reference, axis=1)]
    if pts.size == 0:
        return 0.0
    shifted = pts - reference
    return _hv(_pareto_filter(shifted))


def _pareto_filter(pts: np.ndarray) -> np.ndarray:
    keep = []
    for i in range(pts.shape[0]):
        others = np.delete(pts, i, axis=0)
        if others.size and np.any(np.all(others >= pts[i], axis=1) & np.any(others > pts[i], axis=1)):
            continue
        keep.append(i)
    uniq = np.unique(pts[keep], axis=0)
    return uniq


def _hv(pts: np.ndarray) -> float:
    """Hypervolume against the origin for mutually nondominated points."""
    if pts.size == 0:
        return 0.0
    m = pts.shape[1]
    if m == 1:
        return float(pts.max())
    if m == 2:
        order = np.argsort(-pts[:, 0])
        total, prev_y = 0.0, 0.0
        for x, y in pts[order]:
            if y > prev_y:
                total += x * (y - prev_y)
                prev_y = y
        return float(total)
    # integrate slabs of the last objective, top down; the (m-1)-dimensional
    # slice is constant between consecutive coordinate levels
    levels = np.unique(pts[:, -1])[::-1]
    total = 0.0
    for idx, level in enumerate(levels):
        lower = levels[idx + 1] if idx + 1 < len(levels) else 0.0
        active = pts[pts[:, -1] >= level][:, :-1]
        total += _hv(_pareto_filter(active)) * (level - lower)
    return float(total)


def success_rate(final_objectives: np.ndarray, initial: np.ndarray) -> float:
    """Fraction of finals strictly Pareto-dominating the initial point."""
    finals = np.asarray(final_objectives, dtype=np.float64)
    if finals.size == 0:
        return 0.0
    initial = np.asarray(initial, dtype=np.float64)
    wins = sum(dominates(row, initial) for row in finals)
    return wins / finals.shape[0]
