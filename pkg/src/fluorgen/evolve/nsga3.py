"""Reference-point niched survivor selection (NSGA-III style).

Constrained dominance is applied first: feasible individuals always rank
ahead of infeasible ones, and infeasible individuals rank by violation
count. The last front is split by niche counts over a Das-Dennis reference
set after ideal-point translation and extreme-point (ASF) normalization.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from ..errors import ContractError
from .pareto import nondominated_sort


def das_dennis_points(m: int, h: int) -> np.ndarray:
    """Simplex-lattice reference directions; count = C(h+m-1, m-1)."""
    if m < 1 or h < 1:
        raise ContractError("need m >= 1 objectives and h >= 1 divisions")
    points = []
    for cut in combinations(range(h + m - 1), m - 1):
        prev = -1
        coords = []
        for c in cut:
            coords.append(c - prev - 1)
            prev = c
        coords.append(h + m - 2 - prev)
        points.append(coords)
    return np.asarray(points, dtype=np.float64) / h


def _constrained_fronts(objectives: np.ndarray, violations: np.ndarray) -> list[list[int]]:
    """Nondominated fronts of the feasible set, then infeasible groups by
    ascending violation count."""
    feasible = np.nonzero(violations == 0)[0]
    infeasible = np.nonzero(violations > 0)[0]
    fronts = []
    if feasible.size:
        sub = nondominated_sort(objectives[feasible])
        fronts.extend([[int(feasible[i]) for i in front] for front in sub])
    if infeasible.size:
        order = sorted(infeasible, key=lambda i: (violations[i], i))
        for v in sorted(set(violations[i] for i in infeasible)):
            fronts.append([int(i) for i in order if violations[i] == v])
    return fronts


def _normalize(objs: np.ndarray) -> np.ndarray:
    """Ideal-point translation then intercept normalization (ASF extremes)."""
    m = objs.shape[1]
    # maximization: translate so the ideal (max) point sits at the origin,
    # flip sign so smaller is better, as in the minimization formulation
    ideal = objs.max(axis=0)
    t = ideal[None, :] - objs
    weights = np.full((m, m), 1e-6) + np.eye(m)
    extremes = []
    for i in range(m):
        asf = np.max(t / weights[i][None, :], axis=1)
        extremes.append(int(np.argmin(asf)))
    a = None
    ext = t[extremes]
    try:
        if np.linalg.matrix_rank(ext) == m:
            plane = np.linalg.solve(ext, np.ones(m))
            intercepts = 1.0 / plane
            if np.all(intercepts > 1e-12):
                a = intercepts
    except np.linalg.LinAlgError:
        a = None
    if a is None:
        a = np.maximum(t.max(axis=0), 1e-12)
    return t / a[None, :]


def _associate(normed: np.ndarray, refs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest reference direction by perpendicular distance."""
    ref_norm = refs / np.linalg.norm(refs, axis=1, keepdims=True)
    proj = normed @ ref_norm.T                      # (n, r) scalar projections
    proj_vec = proj[:, :, None] * ref_norm[None, :, :]
    dists = np.linalg.norm(normed[:, None, :] - proj_vec, axis=2)
    assoc = np.argmin(dists, axis=1)
    return assoc, dists[np.arange(normed.shape[0]), assoc]


def nsga3_select(objectives: np.ndarray, n_survivors: int, refs: np.ndarray,
                 rng: np.random.Generator, violations: np.ndarray | None = None) -> list[int]:
    """Indices of the selected survivors.

    Whole fronts fill first; the split front is resolved by niche counts
    (least-crowded reference first, closest member for an empty niche,
    seeded random member otherwise).
    """
    objs = np.asarray(objectives, dtype=np.float64)
    n = objs.shape[0]
    if n_survivors > n:
        raise ContractError(f"cannot select {n_survivors} from population of {n}")
    if violations is None:
        violations = np.zeros(n, dtype=int)
    violations = np.asarray(violations, dtype=int)
    fronts = _constrained_fronts(objs, violations)

    chosen: list[int] = []
    split_front: list[int] = []
    for front in fronts:
        if len(chosen) + len(front) <= n_survivors:
            chosen.extend(front)
        else:
            split_front = front
            break
    remaining = n_survivors - len(chosen)
    if remaining == 0:
        return sorted(chosen)

    pool = chosen + split_front
    normed = _normalize(objs[pool])
    assoc, dist = _associate(normed, refs)
    niche_counts = np.zeros(refs.shape[0], dtype=int)
    for k in range(len(chosen)):
        niche_counts[assoc[k]] += 1
    split_assoc = assoc[len(chosen):]
    split_dist = dist[len(chosen):]
    candidates = list(range(len(split_front)))
    available_refs = np.ones(refs.shape[0], dtype=bool)

    picked: list[int] = []
    while len(picked) < remaining:
        live_refs = np.nonzero(available_refs)[0]
        min_count = niche_counts[live_refs].min()
        tied = live_refs[niche_counts[live_refs] == min_count]
        ref = int(tied[rng.integers(len(tied))])
        members = [c for c in candidates if split_assoc[c] == ref and c not in picked]
        if not members:
            available_refs[ref] = False
            continue
        if niche_counts[ref] == 0:
            best = min(members, key=lambda c: (split_dist[c], c))
        else:
            best = members[int(rng.integers(len(members)))]
        picked.append(best)
        niche_counts[ref] += 1
    return sorted(chosen + [split_front[i] for i in picked])
