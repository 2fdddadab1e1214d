"""Hierarchical planted-partition benchmark graphs and the NMI grid experiment.

The generator is a simplified two-level planted partition, not the LFR
benchmark: every community at a level has the same size and every node
gets the same number of edge stubs. What is kept is the meaning of the two
mixing parameters. Each stub of a node is independently

* cross-macro with probability ``mu1``,
* cross-micro (same macro community) with probability ``mu2``,
* intra-micro otherwise,

and stubs are paired uniformly at random within their class.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence``, so results are reproducible across platforms.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .graph import Graph, GraphError, _components, dump_edge_list
from .partition import sweep_bisect
from .spectral import ConvergenceError, DegenerateSpectrumWarning, OperatorKind

log = logging.getLogger(__name__)

MAX_PARTNER_RETRIES = 50
MAX_REPAIR_ATTEMPTS = 1000


class InfeasibleSpecError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BenchmarkSpec:
    n: int = 100
    macro_count: int = 2
    micro_per_macro: int = 2
    mu1: float = 0.0
    mu2: float = 0.0
    target_degree: float = 10.0
    seed: int = 0

    @property
    def micro_count(self) -> int:
        return self.macro_count * self.micro_per_macro

    @property
    def micro_size(self) -> int:
        return self.n // self.micro_count

    @property
    def macro_size(self) -> int:
        return self.n // self.macro_count

    def validate(self) -> None:
        if self.mu1 + self.mu2 > 1.0 + 1e-12:
            raise InfeasibleSpecError(f"mu1 + mu2 = {self.mu1 + self.mu2:g} exceeds 1")
        for name in ("mu1", "mu2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InfeasibleSpecError(f"{name} must lie in [0, 1], got {v:g}")
        if self.macro_count < 1 or self.micro_per_macro < 1:
            raise InfeasibleSpecError("community counts must be positive")
        if self.n <= 0 or self.n % self.micro_count:
            raise InfeasibleSpecError(
                f"n={self.n} is not divisible by macro_count*micro_per_macro={self.micro_count}")
        if self.macro_count == 1 and self.mu1 > 0:
            raise InfeasibleSpecError("mu1 > 0 needs at least two macro communities")
        if self.micro_per_macro == 1 and self.mu2 > 0:
            raise InfeasibleSpecError("mu2 > 0 needs at least two micro communities per macro")
        k = self.target_degree
        if not 0 < k < self.micro_size:
            raise InfeasibleSpecError(
                f"target_degree {k:g} must be positive and below the micro community size {self.micro_size}")
        demands = [
            ((1 - self.mu1 - self.mu2) * k, self.micro_size - 1, "intra-micro"),
            (self.mu2 * k, self.macro_size - self.micro_size, "cross-micro"),
            (self.mu1 * k, self.n - self.macro_size, "cross-macro"),
        ]
        for demand, room, label in demands:
            if demand > room:
                raise InfeasibleSpecError(
                    f"{label} degree demand {demand:g} exceeds the {room} available partners")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LabeledGraph:
    graph: Graph
    macro_labels: np.ndarray
    micro_labels: np.ndarray
    dropped_stubs: int = 0
    repairs: int = 0

    def labels_text(self) -> str:
        lines = ["# node macro micro"]
        for i, (a, b) in enumerate(zip(self.macro_labels.tolist(), self.micro_labels.tolist())):
            lines.append(f"{i} {a} {b}")
        return "\n".join(lines) + "\n"

    def edges_text(self) -> str:
        return dump_edge_list(self.graph)


def make_rng(*key) -> np.random.Generator:
    """PCG64 generator from a tuple of nonnegative integers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


def _mu_key(mu: float) -> int:
    return int(round(mu * 1_000_000_000))


def _pair_stubs(stubs: list[tuple[int, int]], rng, edges: set, need_distinct_group: bool) -> int:
    """Pair ``(node, group)`` stubs uniformly at random. Returns dropped count.

    A partner is redrawn when it would create a self-loop, a duplicate edge
    or (for cross-community classes) an edge inside one group.
    """
    pool = [stubs[i] for i in rng.permutation(len(stubs))]
    dropped = 0
    while pool:
        u, gu = pool.pop()
        partner = None
        for _ in range(MAX_PARTNER_RETRIES):
            if not pool:
                break
            j = int(rng.integers(len(pool)))
            v, gv = pool[j]
            if v == u or (min(u, v), max(u, v)) in edges:
                continue
            if need_distinct_group and gv == gu:
                continue
            partner = j
            break
        if partner is None:
            dropped += 1
            continue
        v, _ = pool[partner]
        pool[partner] = pool[-1]
        pool.pop()
        edges.add((min(u, v), max(u, v)))
    return dropped


def _stub_counts(spec: BenchmarkSpec, rng) -> np.ndarray:
    base = math.floor(spec.target_degree)
    frac = spec.target_degree - base
    counts = np.full(spec.n, base, dtype=np.int64)
    if frac > 0:
        counts += rng.random(spec.n) < frac
    return counts


def generate(spec: BenchmarkSpec) -> LabeledGraph:
    spec.validate()
    rng = make_rng(spec.seed & 0xFFFFFFFFFFFFFFFF, 0xB3C4)
    nodes = np.arange(spec.n)
    micro = nodes // spec.micro_size
    macro = micro // spec.micro_per_macro

    counts = _stub_counts(spec, rng)
    intra = {c: [] for c in range(spec.micro_count)}
    cross_micro = {m: [] for m in range(spec.macro_count)}
    cross_macro = []
    probs = np.array([spec.mu1, spec.mu2, max(0.0, 1.0 - spec.mu1 - spec.mu2)])
    probs /= probs.sum()
    for v in range(spec.n):
        classes = rng.choice(3, size=int(counts[v]), p=probs)
        for c in classes.tolist():
            if c == 0:
                cross_macro.append((v, int(macro[v])))
            elif c == 1:
                cross_micro[int(macro[v])].append((v, int(micro[v])))
            else:
                intra[int(micro[v])].append((v, int(micro[v])))

    edges: set[tuple[int, int]] = set()
    dropped = 0
    for c in range(spec.micro_count):
        dropped += _pair_stubs(intra[c], rng, edges, need_distinct_group=False)
    for m in range(spec.macro_count):
        dropped += _pair_stubs(cross_micro[m], rng, edges, need_distinct_group=True)
    dropped += _pair_stubs(cross_macro, rng, edges, need_distinct_group=True)
    if dropped:
        log.debug("dropped %d unmatched stubs (seed %d)", dropped, spec.seed)

    repairs = _repair_connectivity(spec.n, edges, micro, macro, rng)
    ordered = sorted(edges)
    src = [e[0] for e in ordered]
    dst = [e[1] for e in ordered]
    return LabeledGraph(Graph(spec.n, src, dst), macro, micro, dropped, repairs)


def _repair_connectivity(n, edges: set, micro, macro, rng) -> int:
    """Bridge stray components into the largest one, one at a time.

    For each stray component an internal edge whose removal keeps the
    component connected is rewired into a bridge: one endpoint keeps it and
    links to a node of the main component, preferring the same micro, then
    the same macro community. Isolated nodes and trees get an added edge.
    """
    repairs = 0
    for _ in range(MAX_REPAIR_ATTEMPTS):
        g = Graph(n, [e[0] for e in edges], [e[1] for e in edges]) if edges else Graph(n, [], [])
        labels = _components(g)
        sizes = np.bincount(labels)
        if sizes.size <= 1:
            return repairs
        main = int(np.argmax(sizes))
        stray = min(c for c in range(sizes.size) if c != main)
        comp = np.flatnonzero(labels == stray)
        in_comp = set(comp.tolist())
        internal = sorted(e for e in edges if e[0] in in_comp)
        rng.shuffle(internal)
        # intra-micro edges first; rewiring them disturbs mixing the least
        internal.sort(key=lambda e: micro[e[0]] != micro[e[1]])
        removed = None
        for e in internal:
            edges.discard(e)
            sub = Graph(n, [x[0] for x in edges], [x[1] for x in edges])
            if np.unique(_components(sub)[comp]).size == 1:
                removed = e
                break
            edges.add(e)
        if removed is not None:
            u = removed[int(rng.integers(2))]
        else:
            u = int(comp[int(rng.integers(comp.size))])
        targets = np.flatnonzero(labels == main)
        for pref in (micro[targets] == micro[u], macro[targets] == macro[u]):
            if pref.any():
                targets = targets[pref]
                break
        x = int(targets[int(rng.integers(targets.size))])
        edges.add((min(u, x), max(u, x)))
        repairs += 1
    raise GenerationError("connectivity repair did not finish")


def edge_class_fractions(lg: LabeledGraph) -> tuple[float, float]:
    """Empirical (cross-macro, cross-micro-same-macro) edge fractions."""
    g = lg.graph
    if g.num_edges == 0:
        return 0.0, 0.0
    cross_macro = lg.macro_labels[g.src] != lg.macro_labels[g.dst]
    cross_micro = (~cross_macro) & (lg.micro_labels[g.src] != lg.micro_labels[g.dst])
    return float(cross_macro.mean()), float(cross_micro.mean())


# -- scoring -----------------------------------------------------------------

def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information in the Danon et al. form.

    Conventions for the zero-entropy cases: both partitions single-cluster
    gives 1.0; exactly one single-cluster gives 0.0.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label vectors differ in shape: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("label vectors are empty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    ka, kb = ia.max() + 1, ib.max() + 1
    if ka == 1 and kb == 1:
        return 1.0
    if ka == 1 or kb == 1:
        return 0.0
    n = float(a.size)
    conf = np.zeros((ka, kb))
    np.add.at(conf, (ia, ib), 1.0)
    row = conf.sum(axis=1)
    col = conf.sum(axis=0)
    nz = conf > 0
    num = -2.0 * np.sum(conf[nz] * np.log(conf[nz] * n / np.outer(row, col)[nz]))
    den = np.sum(row * np.log(row / n)) + np.sum(col * np.log(col / n))
    return float(min(1.0, max(0.0, num / den)))


def local_clustering(g: Graph) -> np.ndarray:
    a = g.adjacency.copy()
    a.data[:] = 1.0
    tri = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0
    k = np.diff(a.indptr).astype(float)
    out = np.zeros(g.n)
    ok = k >= 2
    out[ok] = 2.0 * tri[ok] / (k[ok] * (k[ok] - 1.0))
    return out


def avg_clustering_coefficient(g: Graph) -> float:
    """Mean local clustering coefficient, ignoring weights; nodes of degree
    below two contribute zero."""
    if g.n == 0:
        return 0.0
    return float(local_clustering(g).mean())


# -- grid experiment -----------------------------------------------------------

DEFAULT_METHODS = (OperatorKind.LAPLACIAN, OperatorKind.SYMMETRIC, OperatorKind.REPLICATOR)


@dataclass
class CellResult:
    mu1: float
    mu2: float
    method: str
    nmi_mean: float
    nmi_std: float
    cc_mean: float
    cc_std: float
    runs: int
    failed: int = 0


@dataclass
class GridResult:
    records: list[CellResult]
    spec: BenchmarkSpec
    runs: int
    base_seed: int
    methods: list[str] = field(default_factory=list)

    CSV_HEADER = ("mu1", "mu2", "method", "nmi_mean", "nmi_std", "cc_mean", "cc_std", "runs")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.CSV_HEADER)
        for r in self.records:
            w.writerow([_fmt(r.mu1), _fmt(r.mu2), r.method, _fmt(r.nmi_mean), _fmt(r.nmi_std),
                        _fmt(r.cc_mean), _fmt(r.cc_std), r.runs])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "spec": self.spec.to_dict(),
            "runs": self.runs,
            "base_seed": self.base_seed,
            "methods": self.methods,
            "records": [_json_safe(asdict(r)) for r in self.records],
        }
        return json.dumps(payload, indent=2)

    def cell(self, mu1: float, mu2: float, method) -> CellResult:
        method = OperatorKind.parse(method).value
        for r in self.records:
            if abs(r.mu1 - mu1) < 1e-9 and abs(r.mu2 - mu2) < 1e-9 and r.method == method:
                return r
        raise KeyError((mu1, mu2, method))


def _fmt(x: float) -> str:
    return "nan" if x != x else repr(float(x))


def _json_safe(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and v != v else v) for k, v in d.items()}


def run_seed(base_seed: int, mu1: float, mu2: float, run: int) -> int:
    """Per-run generator seed derived from the base seed and grid position."""
    ss = np.random.SeedSequence([base_seed & 0xFFFFFFFFFFFFFFFF, _mu_key(mu1), _mu_key(mu2), run])
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


def _run_one(task):
    """One (mu1, mu2, run): generate, partition with every method, score."""
    template, mu1, mu2, run, base_seed, methods = task
    spec = replace(template, mu1=mu1, mu2=mu2, seed=run_seed(base_seed, mu1, mu2, run))
    try:
        lg = generate(spec)
    except (GenerationError, GraphError) as exc:
        return (mu1, mu2, run), None, {m: None for m in methods}, str(exc)
    cc = avg_clustering_coefficient(lg.graph)
    scores = {}
    for m in methods:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateSpectrumWarning)
                part = sweep_bisect(lg.graph, m)
            scores[m] = nmi(part.labels(), lg.macro_labels)
        except (ConvergenceError, GraphError) as exc:
            log.warning("mu1=%g mu2=%g run=%d method=%s failed: %s", mu1, mu2, run, m, exc)
            scores[m] = None
    return (mu1, mu2, run), cc, scores, None


def run_grid(template: BenchmarkSpec, mu1_values, mu2_values, runs: int, methods=DEFAULT_METHODS,
             base_seed: int = 0, jobs: int = 1) -> GridResult:
    """NMI of each method against the macro labels over a (mu1, mu2) grid.

    Infeasible cells (e.g. mu1 + mu2 > 1) and failed runs are counted in
    ``failed``; their statistics are NaN when no run succeeded.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    mu1_values = [float(x) for x in mu1_values]
    mu2_values = [float(x) for x in mu2_values]
    if not mu1_values or not mu2_values:
        raise ValueError("grid is empty")
    methods = [OperatorKind.parse(m).value for m in methods]

    tasks = []
    infeasible = set()
    for mu1 in mu1_values:
        for mu2 in mu2_values:
            try:
                replace(template, mu1=mu1, mu2=mu2).validate()
            except InfeasibleSpecError as exc:
                log.warning("cell mu1=%g mu2=%g infeasible: %s", mu1, mu2, exc)
                infeasible.add((mu1, mu2))
                continue
            tasks.extend((template, mu1, mu2, r, base_seed, methods) for r in range(runs))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (8 * jobs))))
    else:
        results = [_run_one(t) for t in tasks]
    by_key = {key: (cc, scores, err) for key, cc, scores, err in results}

    records = []
    for mu1 in mu1_values:
        for mu2 in mu2_values:
            ccs = []
            per_method = {m: [] for m in methods}
            failed = {m: 0 for m in methods}
            if (mu1, mu2) in infeasible:
                failed = {m: runs for m in methods}
            else:
                for r in range(runs):
                    cc, scores, err = by_key[(mu1, mu2, r)]
                    if cc is not None:
                        ccs.append(cc)
                    for m in methods:
                        if scores[m] is None:
                            failed[m] += 1
                        else:
                            per_method[m].append(scores[m])
            cc_mean, cc_std = _mean_std(ccs)
            for m in methods:
                mean, std = _mean_std(per_method[m])
                records.append(CellResult(mu1, mu2, m, mean, std, cc_mean, cc_std,
                                          len(per_method[m]), failed[m]))
    return GridResult(records, template, runs, base_seed, methods)


def _mean_std(values) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive within 1e-9) or a comma list."""
    text = text.strip()
    if ":" not in text:
        return [float(x) for x in text.split(",") if x.strip()]
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range {text!r} must be start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise ValueError("range step must be positive")
    if stop < start:
        raise ValueError("range stop is below start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    # rounding keeps e.g. 0.30000000000000004 out of seeds and CSV output
    return [round(start + i * step, 12) for i in range(count)]
