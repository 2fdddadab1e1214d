"""Graph operators, eigensolvers and the replicator diffusion.

Four operators are supported, all built matrix-free on top of the CSR
adjacency of a :class:`~epispec.graph.Graph`:

* ``LAPLACIAN``    L     = D - A
* ``SYMMETRIC``    L_s   = I - D^-1/2 A D^-1/2
* ``RANDOM_WALK``  L_rw  = I - D^-1 A
* ``REPLICATOR``   R     = lambda_max I - A

The replicator equals ``lambda_max`` times the symmetric normalized
Laplacian of the graph reweighted by eigenvector centrality, which is what
makes it usable for spectral bisection.
"""

from __future__ import annotations

import enum
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, eigsh

from .graph import Graph, GraphError, require_connected, reweight_by_centrality

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DENSE_THRESHOLD = 512
DEGENERACY_GAP = 1e-12


class OperatorKind(str, enum.Enum):
    LAPLACIAN = "laplacian"
    SYMMETRIC = "symmetric"
    RANDOM_WALK = "random_walk"
    REPLICATOR = "replicator"

    @classmethod
    def parse(cls, name) -> "OperatorKind":
        if isinstance(name, cls):
            return name
        aliases = {"l": cls.LAPLACIAN, "ls": cls.SYMMETRIC, "lrw": cls.RANDOM_WALK,
                   "rw": cls.RANDOM_WALK, "r": cls.REPLICATOR}
        key = str(name).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown operator {name!r}; choose from "
                             f"{', '.join(k.value for k in cls)}") from None


class ConvergenceError(RuntimeError):
    """An iterative eigensolver did not reach the requested residual."""

    def __init__(self, msg, residual=None, iterations=None):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class DegenerateSpectrumWarning(UserWarning):
    pass


@dataclass
class SpectralPair:
    value: float
    vector: np.ndarray = field(repr=False)
    residual: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"value": self.value, "residual": self.residual,
                "degenerate": self.degenerate, "vector": self.vector.tolist()}


def dump_pairs(pairs) -> str:
    """JSON diagnostic dump of eigenpairs."""
    return json.dumps([p.to_dict() for p in pairs])


@dataclass
class DiffusionState:
    u: np.ndarray = field(repr=False)
    t: float


def fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its first non-negligible component is positive."""
    v = np.asarray(v, dtype=float)
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0.0:
        return v
    k = int(np.argmax(np.abs(v) > 1e-10 * scale))
    return -v if v[k] < 0 else v


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _require_positive_degrees(g: Graph, kind: OperatorKind) -> None:
    if g.n and np.any(g.degrees <= 0):
        i = int(np.flatnonzero(g.degrees <= 0)[0])
        raise GraphError(f"node {i} has zero degree; {kind.value} operator undefined")


# -- eigenvector centrality --------------------------------------------------

def eigenvector_centrality(g: Graph, tol: float = DEFAULT_TOL, max_iter: int | None = None) -> SpectralPair:
    """Perron pair (lambda_max, theta) of the adjacency matrix by power iteration.

    Iterates on ``A + c I`` with ``c`` half the mean degree, which keeps
    bipartite graphs (where ``-lambda_max`` is also an eigenvalue) from
    oscillating. Starts from the all-ones vector. Cached on the graph.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    key = ("centrality", tol)
    if key in g._cache:
        return g._cache[key]
    require_connected(g)
    if g.n == 0:
        raise GraphError("empty graph has no centrality")
    if g.n == 1:
        pair = SpectralPair(0.0, np.ones(1), 0.0)
        g._cache[key] = pair
        return pair
    a = g.adjacency
    max_iter = 100 * g.n if max_iter is None else max_iter
    shift = 0.5 * float(g.degrees.mean())
    x = np.full(g.n, 1.0 / np.sqrt(g.n))
    residual = np.inf
    for it in range(1, max_iter + 1):
        ax = a @ x
        lam = float(x @ ax)
        residual = float(np.linalg.norm(ax - lam * x))
        if residual <= tol:
            break
        x = _unit(ax + shift * x)
    else:
        raise ConvergenceError(
            f"eigenvector centrality did not converge in {max_iter} iterations "
            f"(residual {residual:.3e})", residual=residual, iterations=max_iter)
    x = fix_sign(x)
    if np.any(x <= 0):
        raise ConvergenceError("power iteration returned a non-positive Perron vector",
                               residual=residual, iterations=it)
    pair = SpectralPair(lam, x, residual)
    g._cache[key] = pair
    return pair


def lambda_max(g: Graph, tol: float = DEFAULT_TOL) -> float:
    return eigenvector_centrality(g, tol).value


# -- operators ---------------------------------------------------------------

def apply_operator(g: Graph, kind, x, lam: float | None = None) -> np.ndarray:
    """Matrix-free product ``M x`` for the requested operator.

    ``lam`` overrides the cached ``lambda_max`` for the replicator.
    ``x`` may be a vector or an ``(n, k)`` block.
    """
    kind = OperatorKind.parse(kind)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != g.n:
        raise ValueError(f"vector has length {x.shape[0]}, expected {g.n}")
    a = g.adjacency
    d = g.degrees if x.ndim == 1 else g.degrees[:, None]
    if kind is OperatorKind.LAPLACIAN:
        return d * x - a @ x
    if kind is OperatorKind.SYMMETRIC:
        _require_positive_degrees(g, kind)
        s = 1.0 / np.sqrt(d)
        return x - s * (a @ (s * x))
    if kind is OperatorKind.RANDOM_WALK:
        _require_positive_degrees(g, kind)
        return x - (a @ x) / d
    if lam is None:
        lam = lambda_max(g)
    return lam * x - a @ x


def dense_operator(g: Graph, kind, lam: float | None = None) -> np.ndarray:
    kind = OperatorKind.parse(kind)
    a = g.dense()
    d = g.degrees
    if kind is OperatorKind.LAPLACIAN:
        return np.diag(d) - a
    if kind is OperatorKind.SYMMETRIC:
        _require_positive_degrees(g, kind)
        s = 1.0 / np.sqrt(d)
        return np.eye(g.n) - s[:, None] * a * s[None, :]
    if kind is OperatorKind.RANDOM_WALK:
        _require_positive_degrees(g, kind)
        return np.eye(g.n) - a / d[:, None]
    if lam is None:
        lam = lambda_max(g)
    return lam * np.eye(g.n) - a


def residual_norm(g: Graph, kind, value: float, vector, lam: float | None = None) -> float:
    return float(np.linalg.norm(apply_operator(g, kind, vector, lam) - value * vector))


# -- two smallest eigenpairs ---------------------------------------------------

def two_smallest_eigenpairs(g: Graph, kind, tol: float = DEFAULT_TOL, solver: str = "auto",
                            dense_threshold: int = DENSE_THRESHOLD) -> tuple[SpectralPair, SpectralPair]:
    """The two smallest eigenpairs of the operator, smallest first.

    ``solver`` is ``"dense"``, ``"lanczos"`` (ARPACK on the deflated,
    shifted operator), ``"power"`` (deflated power iteration) or ``"auto"``
    (dense up to ``dense_threshold`` nodes, Lanczos above). The second pair
    carries ``degenerate=True`` when the gap to the third eigenvalue is
    below 1e-12.
    """
    kind = OperatorKind.parse(kind)
    require_connected(g)
    if g.n < 2:
        raise GraphError("need at least two nodes")
    if kind is not OperatorKind.REPLICATOR and kind is not OperatorKind.LAPLACIAN:
        _require_positive_degrees(g, kind)
    key = ("pairs", kind, tol, solver, dense_threshold)
    if key in g._cache:
        return g._cache[key]
    if solver == "auto":
        solver = "dense" if g.n <= dense_threshold else "lanczos"
    if solver not in ("dense", "lanczos", "power"):
        raise ValueError(f"unknown solver {solver!r}")

    base = OperatorKind.SYMMETRIC if kind is OperatorKind.RANDOM_WALK else kind
    if solver == "dense":
        lam, u1, mu1, u2, mu2, mu3 = _dense_pairs(g, base)
    else:
        lam, u1, mu1, u2, mu2, mu3 = _iterative_pairs(g, base, tol, solver)

    degenerate = mu3 is not None and abs(mu3 - mu2) < DEGENERACY_GAP
    if mu2 - mu1 < DEGENERACY_GAP:
        raise ConvergenceError("smallest eigenvalue is degenerate; graph is effectively disconnected")
    if degenerate:
        warnings.warn(f"second eigenvalue of {kind.value} is degenerate "
                      f"(gap {abs(mu3 - mu2):.2e}); ordering is one vector of the eigenspace",
                      DegenerateSpectrumWarning, stacklevel=2)

    if kind is OperatorKind.RANDOM_WALK:
        s = 1.0 / np.sqrt(g.degrees)
        u1 = _unit(s * u1)
        u2 = _unit(s * u2)
    u1 = fix_sign(u1)
    u2 = fix_sign(u2)
    first = SpectralPair(mu1, u1, residual_norm(g, kind, mu1, u1, lam))
    second = SpectralPair(mu2, u2, residual_norm(g, kind, mu2, u2, lam), degenerate)
    g._cache[key] = (first, second)
    return first, second


def _dense_pairs(g: Graph, kind: OperatorKind):
    """Eigen-decomposition by LAPACK; returns (lam_max, u1, mu1, u2, mu2, mu3)."""
    if kind is OperatorKind.REPLICATOR:
        w, v = scipy.linalg.eigh(g.dense())
        lam = float(w[-1])
        mu3 = lam - float(w[-3]) if g.n >= 3 else None
        # mu1 = lam - w[-1] is exactly zero
        return lam, v[:, -1], 0.0, v[:, -2], lam - float(w[-2]), mu3
    w, v = scipy.linalg.eigh(dense_operator(g, kind))
    mu3 = float(w[2]) if g.n >= 3 else None
    return None, v[:, 0], float(w[0]), v[:, 1], float(w[1]), mu3


def _known_first_pair(g: Graph, kind: OperatorKind, tol: float):
    """First eigenpair, known in closed form (L, L_s) or from the Perron vector (R)."""
    if kind is OperatorKind.LAPLACIAN:
        return None, np.full(g.n, 1.0 / np.sqrt(g.n)), 0.0
    if kind is OperatorKind.SYMMETRIC:
        return None, _unit(np.sqrt(g.degrees)), 0.0
    pair = eigenvector_centrality(g, tol)
    return pair.value, pair.vector, 0.0


def _shifted(g: Graph, kind: OperatorKind, lam):
    """Return ``(matvec, c)`` where ``matvec(x) = (c I - M) x`` is positive
    semidefinite and orders eigenvalues of M in reverse."""
    if kind is OperatorKind.REPLICATOR:
        # c I - R = A + (c - lam) I; with c = lam + max degree this is PSD
        c = lam + float(g.degrees.max())
        a = g.adjacency
        return (lambda x: a @ x + (c - lam) * x), c
    a = g.adjacency
    d = g.degrees
    if kind is OperatorKind.LAPLACIAN:
        c = 2.0 * float(d.max())   # Gershgorin bound for D - A
        diag = c - d
        return (lambda x: diag * x + a @ x), c
    s = 1.0 / np.sqrt(d)
    na = (a.multiply(s[:, None]).multiply(s[None, :])).tocsr()
    # c I - L_s = (c - 1) I + D^-1/2 A D^-1/2 with c = 2
    return (lambda x: x + na @ x), 2.0


def _iterative_pairs(g: Graph, kind: OperatorKind, tol: float, solver: str):
    lam, u1, mu1 = _known_first_pair(g, kind, tol)
    matvec, c = _shifted(g, kind, lam)

    def deflated(x):
        x = x - u1 * (u1 @ x)
        y = matvec(x)
        return y - u1 * (u1 @ y)

    # deterministic start vector, orthogonal to u1
    x0 = np.random.default_rng(0x5EED).standard_normal(g.n)
    x0 = _unit(x0 - u1 * (u1 @ x0))

    if solver == "power":
        u2, mu2 = _power_deflated(g, kind, lam, deflated, c, x0, tol)
        return lam, u1, mu1, u2, mu2, None

    k = 2 if g.n >= 3 else 1
    op = LinearOperator((g.n, g.n), matvec=deflated, dtype=float)
    # ARPACK's tol is relative to the Ritz value, which is at most c
    vals, vecs = eigsh(op, k=k, which="LA", v0=x0, tol=tol / c,
                       maxiter=max(100 * g.n, 1000), ncv=min(g.n - 1, 40))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    u2 = _unit(vecs[:, 0])
    mu2 = c - float(vals[0])
    mu3 = c - float(vals[1]) if k == 2 else None
    # Rayleigh quotient is more accurate than the shifted Ritz value
    mu2 = float(u2 @ apply_operator(g, kind, u2, lam))
    res = residual_norm(g, kind, mu2, u2, lam)
    if res > max(tol, 1e3 * np.finfo(float).eps * c):
        raise ConvergenceError(f"Lanczos residual {res:.3e} above tolerance {tol:.1e}", residual=res)
    return lam, u1, mu1, u2, mu2, mu3


def _power_deflated(g, kind, lam, deflated, c, x, tol):
    max_iter = 100 * g.n
    res = np.inf
    for _ in range(max_iter):
        y = deflated(x)
        x = _unit(y)
        mu = float(x @ apply_operator(g, kind, x, lam))
        res = residual_norm(g, kind, mu, x, lam)
        if res <= tol:
            return x, mu
    raise ConvergenceError(f"deflated power iteration did not converge in {max_iter} "
                           f"iterations (residual {res:.3e})", residual=res, iterations=max_iter)


def ratio_vector(first: SpectralPair, second: SpectralPair) -> np.ndarray:
    """Componentwise ratio of the second eigenvector to the first."""
    f = fix_sign(first.vector)
    if np.any(np.abs(f) < 1e-14):
        raise ValueError("first eigenvector has a (near-)zero component; ratio undefined")
    return second.vector / f


# -- replicator / reweighted Laplacian equivalence -------------------------------

def replicator_equivalence_check(g: Graph, tol: float = DEFAULT_TOL, dense_threshold: int = DENSE_THRESHOLD,
                                 probes: int = 8) -> float:
    """Max elementwise deviation between R and lambda_max times the symmetric
    normalized Laplacian of the centrality-reweighted graph.

    Dense comparison up to ``dense_threshold`` nodes, otherwise the max
    deviation over a few random matrix-vector probes (scaled by the probe's
    max-norm so it bounds the same quantity for unit basis vectors).
    """
    require_connected(g)
    pair = eigenvector_centrality(g, tol)
    lam = pair.value
    gt = reweight_by_centrality(g, pair.vector)
    if g.n <= dense_threshold:
        r = dense_operator(g, OperatorKind.REPLICATOR, lam)
        ls = dense_operator(gt, OperatorKind.SYMMETRIC)
        return float(np.max(np.abs(r - lam * ls)))
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(probes):
        x = rng.standard_normal(g.n)
        diff = apply_operator(g, OperatorKind.REPLICATOR, x, lam) \
            - lam * apply_operator(gt, OperatorKind.SYMMETRIC, x)
        worst = max(worst, float(np.max(np.abs(diff)) / np.max(np.abs(x))))
    return worst


# -- diffusion -----------------------------------------------------------------

def operator_norm(g: Graph, kind, lam: float | None = None) -> float:
    """Largest eigenvalue of the (positive semidefinite) operator."""
    kind = OperatorKind.parse(kind)
    base = OperatorKind.SYMMETRIC if kind is OperatorKind.RANDOM_WALK else kind
    if base is OperatorKind.REPLICATOR and lam is None:
        lam = lambda_max(g)
    if g.n <= DENSE_THRESHOLD:
        return float(scipy.linalg.eigvalsh(dense_operator(g, base, lam))[-1])
    op = LinearOperator((g.n, g.n), matvec=lambda x: apply_operator(g, base, x, lam), dtype=float)
    x0 = np.random.default_rng(0x5EED).standard_normal(g.n)
    return float(eigsh(op, k=1, which="LA", v0=x0, tol=1e-8)[0][0])


def simulate_diffusion(g: Graph, kind, u0, dt: float, steps: int, stride: int = 1) -> list[DiffusionState]:
    """Explicit Euler integration of ``du/dt = -M u``.

    Returns states at ``t = 0, stride*dt, ...`` plus the final state.
    Requires ``dt < 2 / lambda_top(M)``; raises if the norm ever grows,
    which cannot happen for a stable step on these operators.
    """
    kind = OperatorKind.parse(kind)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if steps < 0 or stride < 1:
        raise ValueError("steps must be >= 0 and stride >= 1")
    u = np.array(u0, dtype=float)
    if u.shape != (g.n,):
        raise ValueError(f"u0 has shape {u.shape}, expected ({g.n},)")
    lam = None
    if kind is OperatorKind.REPLICATOR:
        require_connected(g)
        lam = lambda_max(g)
    top = operator_norm(g, kind, lam)
    if top > 0 and dt >= 2.0 / top:
        raise ValueError(f"dt={dt:g} violates the stability bound dt < 2/{top:.6g}")
    # L_rw is self-adjoint in the degree-weighted inner product
    wts = g.degrees if kind is OperatorKind.RANDOM_WALK else None

    def norm(v):
        return float(np.sqrt(v @ v if wts is None else v @ (wts * v)))

    out = [DiffusionState(u.copy(), 0.0)]
    prev = norm(u)
    for step in range(1, steps + 1):
        u = u - dt * apply_operator(g, kind, u, lam)
        cur = norm(u)
        if not np.isfinite(cur) or cur > prev * (1 + 1e-9) + 1e-300:
            raise ConvergenceError(f"diffusion unstable at step {step}")
        prev = cur
        if step % stride == 0 or step == steps:
            out.append(DiffusionState(u.copy(), step * dt))
    return out
