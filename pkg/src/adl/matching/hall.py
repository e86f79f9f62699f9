# src/adl/matching/hall.py
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from adl.dilation.expansive import Dilation
from adl.errors import DisplacementBoundError, PreconditionViolation, UnsaturatedError
from adl.matching.lattice import (
    Cell,
    LatticePair,
    candidate_targets,
    hall_bound,
    max_displacement,
    normalized_bound,
)
from adl.utils.logging_utils import get_logger
from adl.utils.parallel import ordered_map

logger = get_logger(__name__)

DET_RTOL = 1e-9


@dataclass
class MatchingResult:
    """ソース整数座標 -> ターゲット整数座標 の単射と、その変位の証明書。"""

    assignment: Dict[Cell, Cell]
    max_displacement: float
    bound: float
    saturated: bool
    normalized: bool = False
    hall_bound: Optional[float] = None
    n_edges: int = 0
    T: Optional[List[List[float]]] = None     # 正規化形式での T = A^{-j}B^i

    def to_json(self) -> dict:
        return {
            "assignment": [{"source": list(m), "target": list(n)} for m, n in sorted(self.assignment.items())],
            "max_displacement": self.max_displacement,
            "bound": self.bound,
            "saturated": self.saturated,
            "normalized": self.normalized,
            "hall_bound": self.hall_bound,
            "n_sources": len(self.assignment),
            "n_edges": self.n_edges,
            "T": self.T,
        }

    def inverse(self) -> Dict[Cell, Cell]:
        return {n: m for m, n in self.assignment.items()}


# ==========================================================
# 隣接関係
# ==========================================================
def adjacency(pair: LatticePair, sources: Sequence[Cell], *, workers: Optional[int] = None) -> Dict[Cell, List[Cell]]:
    """各ソースの U_x（辞書順）。ソースごとに独立なので並列に作る。"""
    lists = ordered_map(lambda m: candidate_targets(pair, m), sources, workers)
    return dict(zip(sources, lists))


def neighbourhood(pair: LatticePair, subset: Iterable[Cell], adj: Optional[Dict[Cell, List[Cell]]] = None) -> List[Cell]:
    """N(E) = ∪_{x∈E} U_x。"""
    out = set()
    for m in subset:
        m = tuple(m)
        out.update(adj[m] if adj is not None and m in adj else candidate_targets(pair, m))
    return sorted(out)


def _hall_violator(
    adj: Dict[Cell, List[Cell]],
    match_s: Dict[Cell, Cell],
    match_t: Dict[Cell, Cell],
    root: Cell,
) -> Tuple[List[Cell], List[Cell]]:
    """未マッチのソースから交互路で到達できる集合 E と N(E)（|N(E)| < |E|）。"""
    seen_s = {root}
    seen_t = set()
    queue = deque([root])
    while queue:
        m = queue.popleft()
        for n in adj[m]:
            if n in seen_t or match_s.get(m) == n:
                continue
            seen_t.add(n)
            m2 = match_t.get(n)
            if m2 is not None and m2 not in seen_s:
                seen_s.add(m2)
                queue.append(m2)
    return sorted(seen_s), sorted(seen_t)


def check_displacement(where: str, pair: LatticePair, assignment: Dict[Cell, Cell], bound: float) -> None:
    """各セル対で ‖S m − T n‖ <= bound を確かめ、最悪の対で DisplacementBoundError を送出する。"""
    worst, disp = None, 0.0
    for m, n in assignment.items():
        dist = float(np.linalg.norm(pair.source_point(m) - pair.target_point(n)))
        if dist > disp:
            worst, disp = (m, n), dist
    if worst is not None and disp > bound + 1e-9:
        msg = f"{where}: displacement {disp:.12g} of {worst[0]} -> {worst[1]} exceeds the bound {bound:.12g}"
        logger.error(msg)
        raise DisplacementBoundError(msg, source=worst[0], target=worst[1], displacement=disp, bound=bound)


# ==========================================================
# Hall 単射
# ==========================================================
def hall_injection(
    pair: LatticePair,
    source_window: Iterable[Sequence[int]],
    *,
    workers: Optional[int] = None,
) -> MatchingResult:
    """
    Λ_S の有限窓から Λ_T への単射 φ を作る。
    最近傍の候補への割当てが単射ならそれを使い、そうでなければ Hopcroft–Karp で最大マッチングを取る。

    ターゲット側は各ソースの U_x を漏れなく列挙するので、任意の有限 E について
    |E||det S| <= |N(E)||det T| が成り立ち、マッチングはソースを飽和する。
    sup ‖x − φ(x)‖ <= r_S + r_T。
    """
    if pair.det_s < pair.det_t * (1.0 - DET_RTOL):
        msg = f"hall_injection: needs |det S| >= |det T|, got {pair.det_s:.6g} < {pair.det_t:.6g}"
        logger.error(msg)
        raise PreconditionViolation(msg)

    sources = sorted({tuple(int(v) for v in m) for m in source_window})
    adj = adjacency(pair, sources, workers=workers)

    nearest = _nearest_assignment(pair, adj)
    if nearest is not None:
        match_s = nearest
        n_edges = sum(len(v) for v in adj.values())
    else:
        match_s, n_edges = _max_matching(sources, adj)

    disp = max_displacement(pair, match_s.items())
    bound = hall_bound(pair)
    check_displacement("hall_injection", pair, match_s, bound)
    logger.debug("hall_injection: %d sources, %d edges, max displacement %.6g", len(sources), n_edges, disp)
    return MatchingResult(
        assignment=match_s,
        max_displacement=disp,
        bound=bound,
        saturated=True,
        hall_bound=bound,
        n_edges=n_edges,
    )


def _nearest_assignment(pair: LatticePair, adj: Dict[Cell, List[Cell]]) -> Optional[Dict[Cell, Cell]]:
    """各ソースを最も近い候補に送る割当て。単射ならそのまま採用する（恒等写像などを保つ）。"""
    out: Dict[Cell, Cell] = {}
    used = set()
    for m, cands in adj.items():
        if not cands:
            return None
        x = pair.source_point(m)
        ys = np.array(cands, dtype=float) @ pair.T.T
        dist = np.linalg.norm(ys - x[None, :], axis=1)
        n = cands[int(np.argmin(dist))]
        if n in used:
            return None
        used.add(n)
        out[m] = n
    return out


def _max_matching(sources: List[Cell], adj: Dict[Cell, List[Cell]]) -> Tuple[Dict[Cell, Cell], int]:
    # 挿入順を辞書順に固定して結果を再現可能にする
    graph = nx.Graph()
    top = [("s", m) for m in sources]
    graph.add_nodes_from(top, bipartite=0)
    targets = sorted({n for lst in adj.values() for n in lst})
    graph.add_nodes_from((("t", n) for n in targets), bipartite=1)
    n_edges = 0
    for m in sources:
        for n in adj[m]:
            graph.add_edge(("s", m), ("t", n))
            n_edges += 1

    matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=top)
    match_s: Dict[Cell, Cell] = {}
    for m in sources:
        mate = matching.get(("s", m))
        if mate is not None:
            match_s[m] = mate[1]

    if len(match_s) < len(sources):
        match_t = {n: m for m, n in match_s.items()}
        root = next(m for m in sources if m not in match_s)
        hall_set, neigh = _hall_violator(adj, match_s, match_t, root)
        msg = (
            f"hall_injection: matching saturates {len(match_s)}/{len(sources)} sources; "
            f"Hall set of size {len(hall_set)} has only {len(neigh)} neighbours"
        )
        logger.error(msg)
        raise UnsaturatedError(msg, hall_set=hall_set, neighbours=neigh)
    return match_s, n_edges


def two_sided_saturation(
    pair: LatticePair,
    window: Iterable[Sequence[int]],
    *,
    workers: Optional[int] = None,
) -> Tuple[MatchingResult, MatchingResult]:
    """|det S| = |det T| のとき、同じ座標窓で S→T と T→S の両方向が飽和することを確かめる。"""
    if abs(pair.det_s - pair.det_t) > DET_RTOL * max(pair.det_s, pair.det_t):
        msg = f"two_sided_saturation: needs |det S| = |det T|, got {pair.det_s:.12g} vs {pair.det_t:.12g}"
        logger.error(msg)
        raise PreconditionViolation(msg)
    cells = [tuple(int(v) for v in m) for m in window]
    forward = hall_injection(pair, cells, workers=workers)
    backward = hall_injection(pair.reversed(), cells, workers=workers)
    return forward, backward


# ==========================================================
# 正規化された π_j
# ==========================================================
def scale_operator(a: Dilation, j: int, b: Dilation, i: int) -> np.ndarray:
    """T = A^{-j} B^{i}。"""
    return a.power(-j) @ b.power(i)


def lattice_injection_pi(
    a: Dilation,
    b: Dilation,
    j: int,
    i: int,
    window: Iterable[Sequence[int]],
    *,
    workers: Optional[int] = None,
) -> MatchingResult:
    """
    S = I, T = A^{-j}B^i として hall_injection を解き、π_j(k) = T^{-1}φ(k) を返す。
    ‖k − A^{-j}B^i π_j(k)‖ <= √d (1 + ‖A^{-j}B^i‖)。
    """
    if j * a.log_det < i * b.log_det - 1e-12 * max(1.0, abs(i * b.log_det)):
        msg = f"lattice_injection_pi: needs |det A|^j >= |det B|^i (j={j}, i={i})"
        logger.error(msg)
        raise PreconditionViolation(msg)

    t = scale_operator(a, j, b, i)
    pair = LatticePair.build(np.eye(a.dim), t)
    res = hall_injection(pair, window, workers=workers)

    bound = normalized_bound(t)
    check_displacement(f"lattice_injection_pi(j={j}, i={i})", pair, res.assignment, bound)
    res.bound = bound
    res.normalized = True
    res.T = t.tolist()
    return res
