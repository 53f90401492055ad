"""Haar sampling, Galton-Watson and branching random walk samplers, Monte Carlo experiments.

Every experiment draws from ``RngConfig.generator(*keys)`` with keys naming the
chunk (and, for words, the generator index), so a report depends only on the
seed, the stream and the configuration, never on scheduling.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .asymptotics import alpha_turan
from .errors import DomainError
from .orbits import OrbitLevel, OrbitTree
from .treealg import PermGroupSpec, TreeAutomorphism, level_offsets, p_valuation, perm_rank

NODE_BUDGET = 10**7
CHUNK_ENTRIES = 1 << 22


# -- seeding and reports ------------------------------------------------------

@dataclass(frozen=True)
class RngConfig:
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64 or self.stream < 0:
            raise DomainError("seed must be a 64-bit unsigned integer and stream nonnegative")

    def generator(self, *keys: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *keys))
        return np.random.default_rng(seq)

    def to_json(self) -> dict:
        return {"seed": self.seed, "stream": self.stream}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out


@dataclass
class ExperimentReport:
    experiment: str
    estimates: dict
    samples: int
    stderr: dict
    config: dict
    rng: RngConfig | None = None
    elapsed: float = 0.0
    series: dict = field(default_factory=dict)   # name -> {"x": [...], "y": [...]}
    aborted: int = 0
    timing: dict = field(default_factory=dict)   # run-dependent details kept out of the canonical bytes

    def canonical_dict(self) -> dict:
        return _jsonable({
            "experiment": self.experiment,
            "estimates": self.estimates,
            "stderr": self.stderr,
            "samples": self.samples,
            "aborted": self.aborted,
            "config": self.config,
            "rng": self.rng.to_json() if self.rng else None,
            "series": self.series,
        })

    def to_dict(self) -> dict:
        out = self.canonical_dict()
        out["timing"] = _jsonable({"elapsed_seconds": self.elapsed, **self.timing})
        return out

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":")).encode()

    def to_json(self, include_timing: bool = True) -> str:
        obj = self.to_dict() if include_timing else self.canonical_dict()
        return json.dumps(obj, sort_keys=True, indent=2)

    def csv_rows(self) -> list[dict]:
        rows = []
        flat = _flatten(_jsonable(self.estimates))
        for key in sorted(flat):
            value = flat[key]
            if isinstance(value, list):
                continue
            err = self.stderr.get(key)
            rows.append({"experiment": self.experiment, "key": key, "value": value,
                         "stderr": "" if err is None else _jsonable(err), "samples": self.samples})
        return rows

    def plot_rows(self) -> list[dict]:
        rows = []
        for name in sorted(self.series):
            s = self.series[name]
            for x, y in zip(s["x"], s["y"]):
                rows.append({"experiment": self.experiment, "series": name,
                             "x": _jsonable(x), "y": _jsonable(y)})
        return rows


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan, math.nan
    if values.size == 1:
        return float(values[0]), math.nan
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def proportion_stderr(p_hat: float, n: int) -> float:
    return math.sqrt(max(p_hat * (1 - p_hat), 0.0) / n) if n else math.nan


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("TREEGROUP_THREADS", "1")))
    except ValueError:
        return 1


def _map_chunks(fn: Callable[[int, int], object], samples: int, chunk: int) -> list:
    """Apply fn(chunk_index, chunk_size) over the chunks; results in chunk order."""
    sizes = [min(chunk, samples - start) for start in range(0, samples, chunk)]
    threads = thread_count()
    if threads == 1 or len(sizes) == 1:
        return [fn(i, s) for i, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))


def _chunk_size(width: int, factor: int = 1) -> int:
    return max(1, CHUNK_ENTRIES // max(1, width * factor))


# -- offspring laws -----------------------------------------------------------

@dataclass(frozen=True)
class OffspringLaw:
    """Finite law on child sequences: orbit label sequences or offset multisets."""

    support: tuple   # ((item, Fraction probability), ...)

    def __post_init__(self):
        total = sum((Fraction(pr) for _, pr in self.support), Fraction(0))
        if total != 1 or any(Fraction(pr) < 0 for _, pr in self.support):
            raise DomainError("offspring probabilities must be nonnegative and sum to 1")

    @property
    def items(self) -> list:
        return [item for item, _ in self.support]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([float(pr) for _, pr in self.support])

    @classmethod
    def orbit_law(cls, H: PermGroupSpec) -> "OffspringLaw":
        """nu_H: law of the sequence of cycles of a uniform element of H."""
        counts: dict = {}
        for h in range(H.order):
            key = tuple(H.cycles(h))
            counts[key] = counts.get(key, 0) + 1
        return cls(tuple((k, Fraction(v, H.order)) for k, v in sorted(counts.items())))

    @classmethod
    def brw_law(cls, H: PermGroupSpec, p: int) -> "OffspringLaw":
        """Offsets p(|cycle|) of the cycles of a uniform element of H."""
        counts: dict = {}
        for h in range(H.order):
            key = tuple(sorted(p_valuation(len(c), p) for c in H.cycles(h)))
            counts[key] = counts.get(key, 0) + 1
        return cls(tuple((k, Fraction(v, H.order)) for k, v in sorted(counts.items())))

    @classmethod
    def cyclic_brw(cls, p: int) -> "OffspringLaw":
        return cls((((0,) * p, Fraction(1, p)), ((1,), Fraction(p - 1, p))))

    @classmethod
    def deterministic(cls, offsets: Sequence[int]) -> "OffspringLaw":
        return cls(((tuple(offsets), Fraction(1)),))


# -- elements -----------------------------------------------------------------

def haar_random(depth: int, H: PermGroupSpec, rng: np.random.Generator) -> TreeAutomorphism:
    size = level_offsets(H.degree, depth)[-1]
    return TreeAutomorphism(H, depth, rng.integers(0, H.order, size=size))


def haar_leaf_actions(H: PermGroupSpec, depth: int, count: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Leaf permutations of ``count`` independent Haar elements, shape (count, d^depth)."""
    d = H.degree
    act = H.act
    cur = np.zeros((count, 1), dtype=np.int64)
    for level in range(depth):
        labels = rng.integers(0, H.order, size=(count, d**level))
        cur = (cur[:, :, None] * d + act[labels]).reshape(count, -1)
    return cur


def _compose_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise 'a then b'."""
    return np.take_along_axis(b, a, axis=1)


def _inverse_batch(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    np.put_along_axis(out, a, np.broadcast_to(np.arange(a.shape[1]), a.shape), axis=1)
    return out


def fixes_vertex_by_level(perms: np.ndarray, d: int, depth: int) -> np.ndarray:
    """Boolean (count, depth + 1): does the element fix some vertex of level l."""
    out = np.ones((perms.shape[0], depth + 1), dtype=bool)
    for level in range(1, depth + 1):
        q = d ** (depth - level)
        out[:, level] = (perms[:, ::q] // q == np.arange(d**level)).any(axis=1)
    return out


def batch_orbit_labels(perm_list: Sequence[np.ndarray]) -> np.ndarray:
    """Smallest point of the orbit of each point, row-wise, for batched generators."""
    count, size = perm_list[0].shape
    lab = np.broadcast_to(np.arange(size), (count, size)).copy()
    while True:
        old = lab
        for perm in perm_list:
            lab = np.minimum(lab, np.take_along_axis(lab, perm, axis=1))
        lab = np.take_along_axis(lab, lab, axis=1)
        if np.array_equal(lab, old):
            return lab


# -- orbit trees from Galton-Watson laws --------------------------------------

def gw_orbit_tree_sample(H: PermGroupSpec, depth: int, rng: np.random.Generator) -> OrbitTree:
    """Labelled orbit tree drawn directly from GW(nu_H)."""
    cycles = [H.cycles(h) for h in range(H.order)]
    nkids = np.array([len(c) for c in cycles])
    lengths = [np.array([len(x) for x in c]) for c in cycles]
    levels = [OrbitLevel(rep=np.zeros(1, dtype=np.int64), size=np.ones(1, dtype=np.int64),
                         parent=np.zeros(1, dtype=np.int64), labels=[()])]
    for _ in range(depth):
        prev = levels[-1]
        h = rng.integers(0, H.order, size=len(prev.size))
        parent = np.repeat(np.arange(len(h)), nkids[h])
        size = np.concatenate([lengths[x] for x in h]) * prev.size[parent]
        labels = [c for x in h for c in cycles[x]]
        levels.append(OrbitLevel(rep=np.arange(len(parent)), size=size, parent=parent,
                                 labels=labels))
    return OrbitTree(H.degree, depth, levels, "element", H.kind)


def _fixed_point_distribution(H: PermGroupSpec) -> tuple[np.ndarray, list[Fraction]]:
    counts: dict[int, int] = {}
    for e in H.elements:
        k = sum(1 for x, y in enumerate(e) if x == y)
        counts[k] = counts.get(k, 0) + 1
    values = np.array(sorted(counts))
    return values, [Fraction(counts[int(v)], H.order) for v in values]


def survival_probability_exact(H: PermGroupSpec, n: int) -> float:
    """P(a Haar element of Gamma_n(H) fixes a level-n vertex), by iterating the pgf."""
    values, probs = _fixed_point_distribution(H)
    fp = [float(x) for x in probs]
    s = 0.0
    for _ in range(n):
        s = sum(pr * s**int(v) for v, pr in zip(values, fp))
    return 1.0 - s


def survival_experiment(H: PermGroupSpec, n: int, samples: int, rng: RngConfig,
                        chunk: int = 1 << 20) -> ExperimentReport:
    """Estimate P(g fixes a vertex on level n) via the critical GW tree of fixed points."""
    start = time.perf_counter()
    if not H.is_transitive():
        raise DomainError("survival experiment needs a transitive H")
    values, probs = _fixed_point_distribution(H)
    pr = np.array([float(x) for x in probs])

    def run(index, size):
        gen = rng.generator(index)
        pop = np.ones(size, dtype=np.int64)
        aborted = 0
        for _ in range(n):
            pop = pop[pop > 0]
            if pop.size == 0:
                break
            if values.size == 2 and values[0] == 0:
                pop = values[1] * gen.binomial(pop, pr[1])
            else:
                pop = gen.multinomial(pop, pr) @ values
            over = pop > NODE_BUDGET
            if over.any():
                aborted += int(over.sum())
                pop = pop[~over]
        return int((pop > 0).sum()), aborted

    results = _map_chunks(run, samples, chunk)
    alive = sum(r[0] for r in results)
    aborted = sum(r[1] for r in results)
    used = samples - aborted
    p_hat = alive / used if used else math.nan
    se = proportion_stderr(p_hat, used)
    r = perm_rank(H)
    exact = survival_probability_exact(H, n)
    return ExperimentReport(
        "survival",
        {"p_hat": p_hat, "n_p_hat": n * p_hat, "target": 2 / (r - 1), "rank": r,
         "exact_p": exact, "exact_n_p": n * exact},
        used, {"p_hat": se, "n_p_hat": n * se},
        {"H": H.to_json(), "n": n, "samples": samples},
        rng, time.perf_counter() - start, aborted=aborted)


# -- branching random walks ---------------------------------------------------

def _brw_histograms(law: OffspringLaw, n: int, count: int, gen: np.random.Generator,
                    budget: int = NODE_BUDGET) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``count`` walks for n steps; returns max positions and an alive mask."""
    items = law.items
    probs = law.probabilities
    lo_step = min(min(it) for it in items if it) if any(items) else 0
    hi_step = max(max(it) for it in items if it) if any(items) else 0
    lo_step = min(lo_step, 0)
    width = (hi_step - lo_step) * n + 1
    origin = -lo_step * n
    hist = np.zeros((count, width), dtype=np.int64)
    hist[:, origin] = 1
    ok = np.ones(count, dtype=bool)
    for _ in range(n):
        draws = gen.multinomial(hist, probs)   # (count, width, items)
        new = np.zeros_like(hist)
        for j, item in enumerate(items):
            for off in item:
                if off >= 0:
                    new[:, off:] += draws[:, :width - off, j] if off else draws[:, :, j]
                else:
                    new[:, :width + off] += draws[:, -off:, j]
        hist = new
        over = hist.sum(axis=1) > budget
        if over.any():
            ok &= ~over
            hist[over] = 0
    positions = np.where(hist > 0, np.arange(width) - origin, np.iinfo(np.int64).min)
    best = positions.max(axis=1)
    alive = ok & (best > np.iinfo(np.int64).min)
    return best, alive


def _cyclic_max_positions(p: int, n: int, count: int, gen: np.random.Generator,
                          budget: int = NODE_BUDGET) -> tuple[np.ndarray, np.ndarray]:
    """K_n samples for H = C_p: each orbit splits in p (prob 1/p) or grows by p."""
    hist = np.zeros((count, n + 1), dtype=np.int64)
    hist[:, 0] = 1
    ok = np.ones(count, dtype=bool)
    for _ in range(n):
        split = gen.binomial(hist, 1.0 / p)
        new = p * split
        new[:, 1:] += (hist - split)[:, :-1]
        hist = new
        over = hist.sum(axis=1) > budget
        if over.any():
            ok &= ~over
            hist[over] = 0
    best = np.where(hist > 0, np.arange(n + 1), -1).max(axis=1)
    return best, ok


def turan_exact_moments(p: int, n: int) -> tuple[float, float]:
    """Exact mean and variance of K_n from the recursion for P(K_n <= k)."""
    cdf = np.ones(n + 1)   # Q_0(k) = 1 for k >= 0
    for _ in range(n):
        shifted = np.concatenate([[0.0], cdf[:-1]])
        cdf = cdf**p / p + (p - 1) / p * shifted
    pmf = np.diff(np.concatenate([[0.0], cdf]))
    k = np.arange(n + 1)
    mean = float((pmf * k).sum())
    return mean, float((pmf * k**2).sum() - mean**2)


def turan_experiment(p: int, n: int, samples: int, rng: RngConfig,
                     chunk: int | None = None) -> ExperimentReport:
    """K_n with |g_n| = p^K_n for Haar g_n in Gamma_n(p), via the orbit-tree walk."""
    start = time.perf_counter()
    chunk = chunk or _chunk_size(n + 1, 4)

    def run(index, size):
        return _cyclic_max_positions(p, n, size, rng.generator(index))

    parts = _map_chunks(run, samples, chunk)
    k = np.concatenate([b[a] for b, a in parts])
    aborted = samples - k.size
    mean, se = mean_and_stderr(k / n) if n else (0.0, 0.0)
    var = float(k.var(ddof=1)) if k.size > 1 else math.nan
    exact_mean, exact_var = turan_exact_moments(p, n)
    alpha = alpha_turan(p).alpha
    return ExperimentReport(
        "turan",
        {"mean_k_over_n": mean, "variance_k": var, "alpha": alpha,
         "gap": abs(mean - alpha), "exact_mean_k_over_n": exact_mean / n if n else 0.0,
         "exact_variance_k": exact_var, "p_k1": float((k == 1).mean()) if n == 1 else None},
        int(k.size), {"mean_k_over_n": se},
        {"p": p, "n": n, "samples": samples}, rng, time.perf_counter() - start,
        series={"k_histogram": {"x": list(range(n + 1)),
                                "y": np.bincount(k, minlength=n + 1).tolist()}},
        aborted=aborted)


def brw_max_positions(law: OffspringLaw, n: int, samples: int, rng: RngConfig,
                      budget: int = NODE_BUDGET) -> tuple[np.ndarray, int]:
    """Raw samples of the rightmost position X_n (extinct or aborted samples dropped)."""
    if n == 0:
        return np.zeros(samples, dtype=np.int64), 0
    spread = max((max(it) - min(min(it), 0)) for it in law.items if it) if any(law.items) else 0
    chunk = _chunk_size((spread * n + 1) * len(law.items), 2)

    def run(index, size):
        return _brw_histograms(law, n, size, rng.generator(index), budget)

    parts = _map_chunks(run, samples, chunk)
    best = np.concatenate([b[a] for b, a in parts])
    return best, samples - best.size


def brw_max_position(law: OffspringLaw, n: int, samples: int, rng: RngConfig,
                     budget: int = NODE_BUDGET) -> ExperimentReport:
    start = time.perf_counter()
    best, dropped = brw_max_positions(law, n, samples, rng, budget)
    mean, se = mean_and_stderr(best / n) if n else (0.0, 0.0)
    return ExperimentReport(
        "brw_max", {"mean_x_over_n": mean, "mean_x": float(best.mean()) if best.size else math.nan},
        int(best.size), {"mean_x_over_n": se},
        {"law": [[list(it), str(pr)] for it, pr in law.support], "n": n, "samples": samples},
        rng, time.perf_counter() - start, aborted=dropped)


# -- transitivity -------------------------------------------------------------

@lru_cache(maxsize=32)
def _subgroup_lattice(H: PermGroupSpec) -> tuple[list[frozenset], np.ndarray]:
    """Subgroups reachable by adding random elements, and the transition counts."""
    def close(elems: frozenset) -> frozenset:
        out = set(elems)
        frontier = list(out)
        while frontier:
            a = frontier.pop()
            for b in list(out):
                for c in (int(H.mult[a, b]), int(H.mult[b, a])):
                    if c not in out:
                        out.add(c)
                        frontier.append(c)
        return frozenset(out)

    start = frozenset({0})
    index = {start: 0}
    order = [start]
    rows: list[dict] = []
    i = 0
    while i < len(order):
        sub = order[i]
        row: dict = {}
        for h in range(H.order):
            nxt = sub if h in sub else close(sub | {h})
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
            row[index[nxt]] = row.get(index[nxt], 0) + 1
        rows.append(row)
        i += 1
    trans = np.zeros((len(order), len(order)), dtype=np.int64)
    for r, row in enumerate(rows):
        for c, v in row.items():
            trans[r, c] = v
    return order, trans


def _is_transitive_subset(H: PermGroupSpec, sub: frozenset) -> bool:
    reach = {0}
    frontier = [0]
    while frontier:
        x = frontier.pop()
        for h in sub:
            y = H.elements[h][x]
            if y not in reach:
                reach.add(y)
                frontier.append(y)
    return len(reach) == H.degree


def q_generates_transitive(H: PermGroupSpec, m: int, exact: bool = False):
    """Probability that m uniform elements of H generate a transitive subgroup."""
    if m < 0:
        raise DomainError("m must be nonnegative")
    if H.kind == "cyclic_p":
        p = H.degree
        return 1 - Fraction(1, p**m) if exact else -math.expm1(-m * math.log(p))
    subs, trans = _subgroup_lattice(H)
    good = np.array([_is_transitive_subset(H, s) for s in subs])
    if exact:
        mat = [[Fraction(int(v), H.order) for v in row] for row in trans]
        vec = [Fraction(int(i == 0)) for i in range(len(subs))]
        base, e = mat, m
        while e:
            if e & 1:
                vec = [sum(vec[i] * base[i][j] for i in range(len(vec))) for j in range(len(vec))]
            e >>= 1
            if e:
                base = [[sum(base[i][k] * base[k][j] for k in range(len(vec)))
                         for j in range(len(vec))] for i in range(len(vec))]
        return sum((v for v, g in zip(vec, good) if g), Fraction(0))
    dist = np.linalg.matrix_power(trans / H.order, m)[0]
    return float(dist[good].sum())


def transitivity_product(H: PermGroupSpec, j: int, n: int, exact: bool = False):
    """prod_{l=0}^{n-1} q(1 + (j-1)|X|^l): P(j Haar elements are transitive on level n)."""
    if j < 1:
        raise DomainError("j must be at least 1")
    total = Fraction(1) if exact else 1.0
    for level in range(n):
        total *= q_generates_transitive(H, 1 + (j - 1) * H.degree**level, exact)
    return total


def transitivity_experiment(H: PermGroupSpec, j: int, n: int, samples: int, rng: RngConfig,
                            chunk: int | None = None) -> ExperimentReport:
    start = time.perf_counter()
    if j < 1:
        raise DomainError("j must be at least 1")
    width = H.degree**n
    chunk = chunk or _chunk_size(width, j + 2)

    def run(index, size):
        gens = [haar_leaf_actions(H, n, size, rng.generator(index, g)) for g in range(j)]
        lab = batch_orbit_labels(gens)
        return int((lab == 0).all(axis=1).sum())

    hits = sum(_map_chunks(run, samples, chunk))
    p_hat = hits / samples
    exact = transitivity_product(H, j, n)
    return ExperimentReport(
        "transitivity",
        {"p_hat": p_hat, "product": exact, "difference": p_hat - exact},
        samples, {"p_hat": proportion_stderr(p_hat, samples)},
        {"H": H.to_json(), "j": j, "n": n, "samples": samples}, rng,
        time.perf_counter() - start)


# -- subgroup orbit trees -----------------------------------------------------

@lru_cache(maxsize=4096)
def _generated_orbit_law(H: PermGroupSpec, m: int) -> tuple[tuple, np.ndarray]:
    """Law of the orbit-length multiset on X of the group generated by m uniform elements."""
    if H.kind == "cyclic_p":
        p = H.degree
        stay = math.exp(-m * math.log(p))
        return ((1,) * p, (p,)), np.array([stay, 1 - stay])
    subs, trans = _subgroup_lattice(H)
    dist = np.linalg.matrix_power(trans / H.order, m)[0]
    outcomes: dict = {}
    for sub, pr in zip(subs, dist):
        key = tuple(sorted(_orbit_lengths(H, sub)))
        outcomes[key] = outcomes.get(key, 0.0) + pr
    keys = tuple(sorted(outcomes))
    probs = np.array([outcomes[k] for k in keys])
    return keys, probs / probs.sum()


def _orbit_lengths(H: PermGroupSpec, sub) -> list[int]:
    seen: set = set()
    out = []
    for x in range(H.degree):
        if x in seen:
            continue
        orb = {x}
        frontier = [x]
        while frontier:
            y = frontier.pop()
            for h in sub:
                z = H.elements[h][y]
                if z not in orb:
                    orb.add(z)
                    frontier.append(z)
        seen |= orb
        out.append(len(orb))
    return out


def multitype_gw_sample(H: PermGroupSpec, j: int, depth: int,
                        rng: np.random.Generator) -> OrbitTree:
    """Orbit tree of j Haar elements sampled type by type (type = orbit length).

    A node of type k gets the orbits on X of the group generated by (j-1)k+1
    uniform elements of H; a child orbit of length c has type k c.
    """
    if j < 1:
        raise DomainError("j must be at least 1")
    levels = [OrbitLevel(rep=np.zeros(1, dtype=np.int64), size=np.ones(1, dtype=np.int64),
                         parent=np.zeros(1, dtype=np.int64))]
    for _ in range(depth):
        prev = levels[-1]
        parent, size = [], []
        for i, k in enumerate(prev.size.tolist()):
            keys, probs = _generated_orbit_law(H, (j - 1) * k + 1)
            outcome = keys[rng.choice(len(keys), p=probs)] if len(keys) > 1 else keys[0]
            for c in outcome:
                parent.append(i)
                size.append(k * c)
        levels.append(OrbitLevel(rep=np.arange(len(parent)), size=np.array(size, dtype=np.int64),
                                 parent=np.array(parent, dtype=np.int64)))
    return OrbitTree(H.degree, depth, levels, "subgroup", H.kind)


def _multitype_counts(H: PermGroupSpec, j: int, depth: int, gen: np.random.Generator) -> list[int]:
    """Orbit counts per level of the multitype GW tree, aggregated by type."""
    types = {1: 1}
    counts = [1]
    for _ in range(depth):
        nxt: dict = {}
        for k, c in types.items():
            keys, probs = _generated_orbit_law(H, (j - 1) * k + 1)
            draws = gen.multinomial(c, probs) if len(keys) > 1 else np.array([c])
            for outcome, times in zip(keys, draws):
                if times:
                    for length in outcome:
                        nxt[k * length] = nxt.get(k * length, 0) + int(times)
        types = nxt
        counts.append(sum(types.values()))
    return counts


def _direct_counts(gen_perms: Sequence[np.ndarray], d: int, depth: int) -> np.ndarray:
    """Orbit counts per level for batched leaf permutations, shape (count, depth + 1)."""
    count = gen_perms[0].shape[0]
    out = np.ones((count, depth + 1), dtype=np.int64)
    for level in range(1, depth + 1):
        q = d ** (depth - level)
        lvl = [perm[:, ::q] // q for perm in gen_perms]
        lab = batch_orbit_labels(lvl)
        out[:, level] = (lab == np.arange(d**level)).sum(axis=1)
    return out


def ray_boundedness_experiment(H: PermGroupSpec, j: int, depth: int, samples: int,
                               rng: RngConfig, mode: str = "multitype",
                               sampler: Callable | None = None) -> ExperimentReport:
    """Orbit counts per level of <g_1..g_j> and how often they plateau.

    ``mode='direct'`` samples j Haar elements (or calls ``sampler(rng, count)``,
    which must return j leaf-permutation batches) and computes orbits exactly.
    """
    start = time.perf_counter()
    if j < 2 and sampler is None:
        raise DomainError("ray boundedness needs j >= 2")
    if mode == "multitype" and sampler is None:
        counts = np.array([_multitype_counts(H, j, depth, rng.generator(i)) for i in range(samples)])
    elif mode in ("direct", "multitype"):
        chunk = _chunk_size(H.degree**depth, j + 2)

        def run(index, size):
            gens = (sampler(rng.generator(index), size) if sampler is not None else
                    [haar_leaf_actions(H, depth, size, rng.generator(index, g)) for g in range(j)])
            return _direct_counts(gens, H.degree, depth)

        counts = np.concatenate(_map_chunks(run, samples, chunk))
    else:
        raise DomainError(f"unknown mode {mode!r}")
    half = depth - depth // 2
    plateau = (counts[:, half:] == counts[:, [depth]]).all(axis=1)
    frac = float(plateau.mean())
    single = float((counts[:, depth] == 1).mean())
    mean_counts = counts.mean(axis=0)
    return ExperimentReport(
        "ray_boundedness",
        {"plateau_fraction": frac, "single_orbit_fraction": single,
         "mean_final_orbits": float(mean_counts[-1]),
         "transitivity_product": transitivity_product(H, j, depth)},
        samples, {"plateau_fraction": proportion_stderr(frac, samples),
                  "single_orbit_fraction": proportion_stderr(single, samples)},
        {"H": H.to_json(), "j": j, "depth": depth, "samples": samples, "mode": mode,
         "custom_sampler": sampler is not None},
        rng, time.perf_counter() - start,
        series={"mean_orbit_count": {"x": list(range(depth + 1)), "y": mean_counts.tolist()}})


# -- word maps ----------------------------------------------------------------

def evaluate_batch(word, gen_perms: Sequence[np.ndarray]) -> np.ndarray:
    """Leaf permutations of a word evaluated on batched generators."""
    count, size = gen_perms[0].shape
    inverses: dict[int, np.ndarray] = {}
    out = np.broadcast_to(np.arange(size), (count, size)).copy()
    for index, exp in word.letters:
        if exp > 0:
            perm = gen_perms[index]
        else:
            if index not in inverses:
                inverses[index] = _inverse_batch(gen_perms[index])
            perm = inverses[index]
        out = _compose_batch(out, perm)
    return out


def fit_loglog_slope(levels: Sequence[int], probs: Sequence[float]) -> float:
    """Least-squares slope of log P against log n over the top half of the levels."""
    levels = np.asarray(levels, dtype=float)
    probs = np.asarray(probs, dtype=float)
    top = levels >= levels.max() / 2
    use = top & (probs > 0) & (levels > 0)
    if use.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(levels[use]), np.log(probs[use]), 1)[0])


def word_fixed_point_experiment(word, H: PermGroupSpec, depth: int, samples: int,
                                rng: RngConfig, chunk: int | None = None) -> ExperimentReport:
    """P(w(g_1..g_k) fixes a level-n vertex) for n <= depth, Haar g_i.

    Generator i of chunk c always comes from substream (c, i), so words that
    share generators share their samples.
    """
    start = time.perf_counter()
    if len(word) == 0:
        raise DomainError("the trivial word fixes everything")
    k = word.num_generators
    width = H.degree**depth
    chunk = chunk or _chunk_size(width, k + 3)

    def run(index, size):
        gens = [haar_leaf_actions(H, depth, size, rng.generator(index, g)) for g in range(k)]
        return fixes_vertex_by_level(evaluate_batch(word, gens), H.degree, depth).sum(axis=0)

    hits = np.sum(_map_chunks(run, samples, chunk), axis=0)
    probs = hits / samples
    levels = list(range(1, depth + 1))
    slope = fit_loglog_slope(levels, probs[1:])
    return ExperimentReport(
        "word_fixed_points",
        {"p_fix_final": float(probs[-1]), "decay_exponent": slope,
         "p_fix": probs[1:].tolist()},
        samples, {"p_fix_final": proportion_stderr(float(probs[-1]), samples)},
        {"word": str(word), "H": H.to_json(), "depth": depth, "samples": samples},
        rng, time.perf_counter() - start,
        series={"p_fix": {"x": levels, "y": probs[1:].tolist()}})
