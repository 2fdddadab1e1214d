"""Cut quality functions and sweep-cut spectral bisection."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, GraphError, NodeSet, require_connected, reweight_by_centrality
from .spectral import (
    DEFAULT_TOL,
    OperatorKind,
    ratio_vector,
    two_smallest_eigenpairs,
)


class CutKind(str, enum.Enum):
    RATIO = "ratio_cut"
    NORMALIZED = "normalized_cut"


class GraphVariant(str, enum.Enum):
    ORIGINAL = "original"
    REWEIGHTED = "reweighted"


@dataclass(frozen=True)
class CutQuality:
    kind: CutKind
    variant: GraphVariant = GraphVariant.ORIGINAL

    @property
    def label(self) -> str:
        prefix = "reweighted_" if self.variant is GraphVariant.REWEIGHTED else ""
        return prefix + self.kind.value


RATIO_CUT = CutQuality(CutKind.RATIO)
NORMALIZED_CUT = CutQuality(CutKind.NORMALIZED)
REWEIGHTED_RATIO_CUT = CutQuality(CutKind.RATIO, GraphVariant.REWEIGHTED)
REWEIGHTED_NORMALIZED_CUT = CutQuality(CutKind.NORMALIZED, GraphVariant.REWEIGHTED)

# quality each operator's sweep minimises
METHOD_QUALITY = {
    OperatorKind.LAPLACIAN: RATIO_CUT,
    OperatorKind.SYMMETRIC: NORMALIZED_CUT,
    OperatorKind.RANDOM_WALK: NORMALIZED_CUT,
    OperatorKind.REPLICATOR: REWEIGHTED_NORMALIZED_CUT,
}


def _check_nontrivial(g: Graph, s: NodeSet) -> None:
    if s.n != g.n:
        raise GraphError("node set does not match graph size")
    k = len(s)
    if k == 0 or k == g.n:
        raise GraphError("cut requires a nonempty proper subset of the nodes")


def cut_weight(g: Graph, s: NodeSet) -> float:
    """Total weight of edges with exactly one endpoint in ``s``."""
    _check_nontrivial(g, s)
    crossing = s.mask[g.src] != s.mask[g.dst]
    return float(g.weight[crossing].sum())


def ratio_cut(g: Graph, s: NodeSet) -> float:
    k = len(s)
    return cut_weight(g, s) * (1.0 / k + 1.0 / (g.n - k))


def normalized_cut(g: Graph, s: NodeSet) -> float:
    """Cut weight over the volumes of both sides.

    A side with zero volume only arises when the cut weight is zero too;
    that case scores 0.
    """
    e = cut_weight(g, s)
    vs = float(g.degrees[s.mask].sum())
    vc = float(g.degrees.sum()) - vs
    if e == 0.0:
        return 0.0
    return e * (1.0 / vs + 1.0 / vc)


def cut_quality(g: Graph, s: NodeSet, quality: CutQuality, theta=None) -> float:
    if quality.variant is GraphVariant.REWEIGHTED:
        if theta is None:
            raise ValueError("reweighted quality needs a centrality vector")
        g = reweight_by_centrality(g, theta)
    if quality.kind is CutKind.RATIO:
        return ratio_cut(g, s)
    return normalized_cut(g, s)


def reweighted_quality(g: Graph, theta, s: NodeSet, kind) -> float:
    """Ratio or normalized cut of ``s`` after reweighting edges by ``theta``.

    The normalized variant is invariant to the scale of ``theta``; the
    ratio variant scales with ``|theta|**2``.
    """
    if isinstance(kind, CutQuality):
        kind = kind.kind
    return cut_quality(g, s, CutQuality(CutKind(kind), GraphVariant.REWEIGHTED), theta)


# -- sweep -------------------------------------------------------------------

def sweep_order(ordering) -> np.ndarray:
    """Stable ascending sort; ties keep node-index order."""
    return np.argsort(np.asarray(ordering, dtype=float), kind="stable")


def sweep_profile(g: Graph, order: np.ndarray):
    """Cut weight, size and volume of every prefix ``order[:k]``, k = 1..n-1.

    Moving node ``v`` into S changes the cut weight by
    ``deg(v) - 2 * w(v, S)``. Summed over the edges this is: each edge adds
    its weight when its first endpoint moves and removes it when the second
    one does, so the whole profile is a cumulative sum in O(E + N).
    """
    n = g.n
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    ps, pd = pos[g.src], pos[g.dst]
    first = np.minimum(ps, pd)
    second = np.maximum(ps, pd)
    delta = np.bincount(first, weights=g.weight, minlength=n) \
        - np.bincount(second, weights=g.weight, minlength=n)
    cut = np.cumsum(delta)[:-1]
    size = np.arange(1, n, dtype=float)
    vol = np.cumsum(g.degrees[order])[:-1]
    return cut, size, vol


def _profile_quality(cut, size, vol, n, total_vol, kind: CutKind) -> np.ndarray:
    if kind is CutKind.RATIO:
        return cut * (1.0 / size + 1.0 / (n - size))
    with np.errstate(divide="ignore", invalid="ignore"):
        q = cut * (1.0 / vol + 1.0 / (total_vol - vol))
    return np.where(cut == 0.0, 0.0, q)


@dataclass
class Partition:
    s: NodeSet
    quality: float
    method: OperatorKind
    quality_kind: CutQuality
    sweep_position: int
    ordering: np.ndarray | None = field(default=None, repr=False)
    degenerate: bool = False

    def labels(self) -> np.ndarray:
        return self.s.mask.astype(np.int64)

    def smaller_side(self) -> np.ndarray:
        """Members of the smaller side; for equal sizes, the side holding node 0."""
        inside = self.s.members
        outside = self.s.complement().members
        if len(inside) < len(outside):
            return inside
        if len(outside) < len(inside):
            return outside
        return inside if self.s.mask[0] else outside

    def to_dict(self, include_ordering: bool = False, offset: int = 0) -> dict:
        out = {
            "method": self.method.value,
            "quality_kind": self.quality_kind.label,
            "quality": self.quality,
            "members": (self.smaller_side() + offset).tolist(),
            "sweep_position": self.sweep_position,
            "degenerate": self.degenerate,
        }
        if include_ordering and self.ordering is not None:
            out["ordering"] = self.ordering.tolist()
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw))


def _ordering_from_pairs(method: OperatorKind, first, second) -> np.ndarray:
    if method in (OperatorKind.LAPLACIAN, OperatorKind.RANDOM_WALK):
        return second.vector
    return ratio_vector(first, second)


def ordering_vector(g: Graph, method, tol: float = DEFAULT_TOL, solver: str = "auto") -> np.ndarray:
    """Vector whose sorted order defines the sweep.

    Laplacian and random-walk Laplacian use their second eigenvector
    directly (their first is constant); the symmetric normalized Laplacian
    and the replicator use the ratio of second to first eigenvector.
    """
    method = OperatorKind.parse(method)
    first, second = two_smallest_eigenpairs(g, method, tol=tol, solver=solver)
    return _ordering_from_pairs(method, first, second)


def sweep_bisect(g: Graph, method, tol: float = DEFAULT_TOL, solver: str = "auto") -> Partition:
    """Spectral bisection: sort nodes by the method's ordering vector, try
    all N-1 prefix cuts, keep the one minimising the method's quality.
    Ties go to the smallest prefix."""
    method = OperatorKind.parse(method)
    require_connected(g)
    if g.n < 2:
        raise GraphError("need at least two nodes to bisect")
    first, second = two_smallest_eigenpairs(g, method, tol=tol, solver=solver)
    ordering = _ordering_from_pairs(method, first, second)
    quality = METHOD_QUALITY[method]
    target = g
    if quality.variant is GraphVariant.REWEIGHTED:
        # theta is the replicator's first eigenvector, same lambda_max as the ordering
        target = reweight_by_centrality(g, first.vector)
    order = sweep_order(ordering)
    cut, size, vol = sweep_profile(target, order)
    q = _profile_quality(cut, size, vol, g.n, float(target.degrees.sum()), quality.kind)
    k = int(np.argmin(q))
    mask = np.zeros(g.n, dtype=bool)
    mask[order[:k + 1]] = True
    return Partition(NodeSet.from_mask(mask), float(q[k]), method, quality, k + 1,
                     ordering, second.degenerate)


def verify_sweep_incremental(g: Graph, ordering, theta=None, rtol: float = 1e-9) -> bool:
    """Recompute every prefix cut from scratch and compare with the
    incremental profile. Checks cut weight, ratio cut and normalized cut, and
    the reweighted normalized cut when ``theta`` is given."""
    order = sweep_order(ordering)
    graphs = [g] if theta is None else [g, reweight_by_centrality(g, theta)]
    for h in graphs:
        cut, size, vol = sweep_profile(h, order)
        total = float(h.degrees.sum())
        rc = _profile_quality(cut, size, vol, h.n, total, CutKind.RATIO)
        nc = _profile_quality(cut, size, vol, h.n, total, CutKind.NORMALIZED)
        mask = np.zeros(h.n, dtype=bool)
        for k in range(h.n - 1):
            mask[order[k]] = True
            s = NodeSet.from_mask(mask)
            for inc, ref in ((cut[k], cut_weight(h, s)), (rc[k], ratio_cut(h, s)),
                             (nc[k], normalized_cut(h, s))):
                if abs(inc - ref) > rtol * max(1.0, abs(ref)):
                    return False
    return True
