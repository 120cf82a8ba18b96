"""Head selection from arc score matrices.

Score matrices are ``L x (L+1)``: row ``i`` holds the scores of token ``i + 1``
choosing each head, column 0 being ROOT.
"""
from __future__ import annotations

import numpy as np


def greedy_heads(scores: np.ndarray) -> list[int]:
    """Independent per-token argmax over heads other than the token itself.

    The result may contain cycles or several roots.
    """
    scores = np.array(scores, dtype=np.float64)
    L = scores.shape[0]
    scores[np.arange(L), np.arange(1, L + 1)] = -np.inf
    return [int(h) for h in np.argmax(scores, axis=1)]


def tree_score(scores: np.ndarray, heads) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    return float(sum(scores[i, h] for i, h in enumerate(heads)))


def _find_cycle(heads: np.ndarray) -> list[int] | None:
    n = len(heads)
    color = np.zeros(n, dtype=np.int8)  # 0 unseen, 1 on current path, 2 done
    for start in range(1, n):
        path = []
        node = start
        while node != 0 and color[node] == 0:
            color[node] = 1
            path.append(node)
            node = heads[node]
        if node != 0 and color[node] == 1:
            return path[path.index(node):]
        for p in path:
            color[p] = 2
    return None


def _chu_liu_edmonds(score: np.ndarray) -> np.ndarray:
    """Maximum arborescence rooted at node 0 of a dense ``score[dep, head]`` matrix."""
    n = score.shape[0]
    score = score.copy()
    np.fill_diagonal(score, -np.inf)
    heads = np.zeros(n, dtype=np.int64)
    heads[1:] = np.argmax(score[1:], axis=1)
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads

    in_cycle = np.zeros(n, dtype=bool)
    in_cycle[cycle] = True
    outside = [v for v in range(n) if not in_cycle[v]]  # includes root 0 first
    new_index = {v: k for k, v in enumerate(outside)}
    c = len(outside)
    cyc = np.array(cycle)
    cycle_scores = score[cyc, heads[cyc]]

    reduced = np.full((c + 1, c + 1), -np.inf)
    enter_from = np.zeros(c + 1, dtype=np.int64)  # cycle node receiving an edge from outside head
    leave_to = np.zeros(c + 1, dtype=np.int64)    # cycle node acting as head for outside dependent
    for v in outside:
        vi = new_index[v]
        for u in outside:
            reduced[vi, new_index[u]] = score[v, u]
        if v != 0:
            best = int(np.argmax(score[v, cyc]))
            reduced[vi, c] = score[v, cyc[best]]
            leave_to[vi] = cyc[best]
        gains = score[cyc, v] - cycle_scores
        best = int(np.argmax(gains))
        reduced[c, vi] = gains[best]
        enter_from[vi] = cyc[best]

    sub = _chu_liu_edmonds(reduced)
    result = heads.copy()
    for v in outside:
        if v == 0:
            continue
        h = sub[new_index[v]]
        result[v] = leave_to[new_index[v]] if h == c else outside[h]
    entering_head = sub[c]
    entering_node = enter_from[entering_head]
    result[entering_node] = outside[entering_head]
    return result


def mst_heads(scores: np.ndarray) -> list[int]:
    """Best single-root tree, trying each token as the root's only child."""
    scores = np.asarray(scores, dtype=np.float64)
    L = scores.shape[0]
    if L == 1:
        return [0]
    full = np.full((L + 1, L + 1), -np.inf)
    full[1:, :] = scores
    best, best_total = None, -np.inf
    for root_child in range(1, L + 1):
        constrained = full.copy()
        constrained[1:, 0] = -np.inf
        constrained[root_child, 0] = scores[root_child - 1, 0]
        heads = _chu_liu_edmonds(constrained)[1:]
        total = tree_score(scores, heads)
        if total > best_total:
            best, best_total = heads, total
    return [int(h) for h in best]


def decode_tree(arc_scores, mode: str = "mst") -> list[int]:
    if hasattr(arc_scores, "data"):
        arc_scores = arc_scores.data
    if mode == "greedy":
        return greedy_heads(arc_scores)
    if mode == "mst":
        return mst_heads(arc_scores)
    raise ValueError(f"unknown decoding mode {mode!r}")
