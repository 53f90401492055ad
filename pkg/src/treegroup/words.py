"""Free-group words, word maps on Gamma_n(H), Schreier graphs and 1-chains."""

from __future__ import annotations

import itertools
import math
import string
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, NotFoundError, PreconditionError, ResourceError
from .grouplin.fp import rank as fp_rank
from .stochastic import (ExperimentReport, RngConfig, _compose_batch, _inverse_batch,
                         evaluate_batch, haar_leaf_actions)
from .treealg import PermGroupSpec, TreeAutomorphism, compose, inverse, leaf_action
from .zoo import adding_machine

ENUMERATION_BUDGET = 1 << 24


# -- words --------------------------------------------------------------------

def _reduce(letters: Iterable[tuple[int, int]]) -> tuple:
    out: list[tuple[int, int]] = []
    for index, exp in letters:
        if exp not in (1, -1) or index < 0:
            raise DomainError(f"bad letter {(index, exp)}")
        if out and out[-1][0] == index and out[-1][1] == -exp:
            out.pop()
        else:
            out.append((index, exp))
    return tuple(out)


@dataclass(frozen=True)
class FreeWord:
    """Reduced word; letters are (generator index, +1 or -1)."""

    letters: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", _reduce(self.letters))

    @classmethod
    def parse(cls, text: str) -> "FreeWord":
        """Parse 'a b A b b' (lower case = generator, upper case = inverse)."""
        letters = []
        for ch in text.replace(",", " ").split():
            for c in ch:
                if c.isalpha():
                    letters.append((string.ascii_lowercase.index(c.lower()), 1 if c.islower() else -1))
                else:
                    raise DomainError(f"cannot parse {c!r} in a word")
        return cls(tuple(letters))

    @classmethod
    def from_signed(cls, indices: Sequence[int]) -> "FreeWord":
        """From signed 1-based indices, e.g. [1, 2, -1, -2]."""
        if any(i == 0 for i in indices):
            raise DomainError("index 0 is not a letter")
        return cls(tuple((abs(i) - 1, 1 if i > 0 else -1) for i in indices))

    @classmethod
    def generator(cls, index: int, power: int = 1) -> "FreeWord":
        return cls(((index, 1 if power > 0 else -1),) * abs(power))

    def to_signed(self) -> list[int]:
        return [(i + 1) * e for i, e in self.letters]

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "FreeWord") -> "FreeWord":
        return FreeWord(self.letters + other.letters)

    def inverse(self) -> "FreeWord":
        return FreeWord(tuple((i, -e) for i, e in reversed(self.letters)))

    def __pow__(self, k: int) -> "FreeWord":
        base = self if k >= 0 else self.inverse()
        return FreeWord(base.letters * abs(k))

    @property
    def num_generators(self) -> int:
        return max((i for i, _ in self.letters), default=-1) + 1

    def __str__(self) -> str:
        return " ".join(string.ascii_lowercase[i] if e > 0 else string.ascii_uppercase[i]
                        for i, e in self.letters) or "1"


def commutator_word(a: FreeWord, b: FreeWord) -> FreeWord:
    """[a, b] = a^-1 b^-1 a b."""
    return a.inverse() * b.inverse() * a * b


def evaluate(w: FreeWord, gens: Sequence[TreeAutomorphism]) -> TreeAutomorphism:
    """Left fold of compose over the letters of w."""
    if not gens:
        raise DomainError("need at least one generator to fix the shape")
    if w.num_generators > len(gens):
        raise DomainError(f"word uses {w.num_generators} generators, {len(gens)} given")
    inv_cache: dict[int, TreeAutomorphism] = {}
    out = TreeAutomorphism.identity(gens[0].group, gens[0].depth)
    for index, exp in w.letters:
        if exp > 0:
            out = compose(out, gens[index])
        else:
            if index not in inv_cache:
                inv_cache[index] = inverse(gens[index])
            out = compose(out, inv_cache[index])
    return out


def exponent_sum_vector(w: FreeWord, k: int, p: int | None = None) -> np.ndarray:
    out = np.zeros(k, dtype=np.int64)
    for index, exp in w.letters:
        if index >= k:
            raise DomainError(f"letter {index} outside {k} generators")
        out[index] += exp
    return out % p if p else out


# -- enumerated groups ---------------------------------------------------------

def _row_keys(rows: np.ndarray) -> list:
    """Hashable key per permutation row; a single integer when degree <= 16."""
    if rows.shape[1] <= 16:
        shifts = np.arange(rows.shape[1], dtype=np.uint64) * np.uint64(4)
        return (rows.astype(np.uint64) << shifts).sum(axis=1, dtype=np.uint64).tolist()
    return [r.tobytes() for r in np.ascontiguousarray(rows)]


class FiniteGroup:
    """A finite group of permutations stored as an array of all its elements."""

    def __init__(self, perms: np.ndarray, p: int | None = None):
        self.perms = np.asarray(perms, dtype=np.int64)
        self.index = {key: i for i, key in enumerate(_row_keys(self.perms))}
        self.p = p
        self.identity = self.index[_row_keys(np.arange(self.degree)[None, :])[0]]

    @property
    def order(self) -> int:
        return self.perms.shape[0]

    @property
    def degree(self) -> int:
        return self.perms.shape[1]

    def lookup(self, rows: np.ndarray) -> np.ndarray:
        try:
            return np.array([self.index[k] for k in _row_keys(np.asarray(rows, dtype=np.int64))],
                            dtype=np.int64)
        except KeyError as exc:
            raise DomainError("permutation is not in the group") from exc

    @classmethod
    def from_generators(cls, gens: Sequence, p: int | None = None,
                        limit: int = ENUMERATION_BUDGET) -> "FiniteGroup":
        perms = [leaf_action(g) if isinstance(g, TreeAutomorphism) else np.asarray(g, dtype=np.int64)
                 for g in gens]
        if not perms:
            raise DomainError("need at least one generator")
        ident = np.arange(perms[0].size, dtype=np.int64)[None, :]
        seen = set(_row_keys(ident))
        blocks = [ident]
        frontier = ident
        while frontier.shape[0]:
            cand = np.concatenate([g[frontier] for g in perms])
            keep = []
            for i, key in enumerate(_row_keys(cand)):
                if key not in seen:
                    seen.add(key)
                    keep.append(i)
            if len(seen) > limit:
                raise ResourceError("group closure exceeds the enumeration budget")
            frontier = cand[keep]
            blocks.append(frontier)
        return cls(np.concatenate(blocks), p)

    @classmethod
    def wreath(cls, p: int, n: int) -> "FiniteGroup":
        """All of Gamma_n(p) as leaf permutations."""
        if p ** ((p**n - 1) // (p - 1)) > ENUMERATION_BUDGET:
            raise ResourceError("Gamma_n(p) too large to enumerate")
        cur = np.zeros((1, 1), dtype=np.int64)
        rot = np.array([[(x + r) % p for x in range(p)] for r in range(p)])
        for level in range(n):
            width = p**level
            labels = np.array(list(itertools.product(range(p), repeat=width)), dtype=np.int64)
            # every current element combined with every label vector on this level
            a = np.repeat(cur, labels.shape[0], axis=0)
            lab = np.tile(labels, (cur.shape[0], 1))
            cur = (a[:, :, None] * p + rot[lab]).reshape(a.shape[0], -1)
        return cls(cur, p)


# -- even cover and kernel census ---------------------------------------------

@dataclass(frozen=True)
class EvenCoverResult:
    holds: bool
    fiber_size: int          # expected |G|^(n-k)
    images: int
    min_fiber: int
    max_fiber: int
    witness: tuple | None    # (image tuple of element indices, its fiber size) on failure

    def __bool__(self) -> bool:
        return self.holds


def even_cover_check(words: Sequence[FreeWord], group: FiniteGroup, n_free: int,
                     fixed: Sequence[int] = ()) -> EvenCoverResult:
    """Check that (g_1..g_n) -> (w_1, .., w_k) covers G^k evenly.

    Letters 0..n_free-1 are free; letters n_free.. take the values ``fixed``
    (element indices of ``group``).
    """
    k = len(words)
    total_letters = n_free + len(fixed)
    if group.p is None:
        raise DomainError("the group must carry its prime p")
    vecs = np.array([exponent_sum_vector(w, max(total_letters, 1))[:n_free] for w in words])
    if k > n_free or fp_rank(vecs.reshape(k, n_free), group.p) < k:
        raise PreconditionError("exponent-sum vectors on the free letters are dependent mod p")
    if any(w.num_generators > total_letters for w in words):
        raise DomainError("a word uses an unassigned letter")
    count = group.order**n_free
    if count > ENUMERATION_BUDGET:
        raise ResourceError("too many tuples to enumerate")
    idx = np.indices((group.order,) * n_free).reshape(n_free, -1)
    gens = [group.perms[idx[i]] for i in range(n_free)]
    gens += [np.broadcast_to(group.perms[f], (count, group.degree)) for f in fixed]
    codes = np.zeros(count, dtype=np.int64)
    for w in words:
        codes = codes * group.order + group.lookup(evaluate_batch(w, gens))
    fibers = np.bincount(codes, minlength=group.order**k)
    expected = group.order ** (n_free - k)
    holds = bool((fibers == expected).all())
    witness = None
    if not holds:
        bad = int(np.flatnonzero(fibers != expected)[0])
        digits = []
        c = bad
        for _ in range(k):
            c, r = divmod(c, group.order)
            digits.append(r)
        witness = (tuple(reversed(digits)), int(fibers[bad]))
    return EvenCoverResult(holds, expected, int((fibers > 0).sum()), int(fibers.min()),
                           int(fibers.max()), witness)


@dataclass(frozen=True)
class CensusResult:
    count: float              # |K_n| (exact, or estimate in sampling mode)
    total: int                # |Gamma_n|^k
    ratio: float              # log|K_n| / (k log|Gamma_n|)
    strict: bool              # |K_n| < |Gamma_n|^k
    mode: str                 # exhaustive or sampling
    ci: tuple | None = None   # 95% interval for the count in sampling mode
    samples: int = 0


def kernel_census(w: FreeWord, k: int, p: int, n: int, rng: RngConfig | None = None,
                  samples: int = 100_000, budget: int = ENUMERATION_BUDGET) -> CensusResult:
    """Number of k-tuples in Gamma_n(p) on which w evaluates to the identity."""
    if w.num_generators > k:
        raise DomainError("word uses more letters than k")
    log_order = (p**n - 1) // (p - 1)
    total = p ** (log_order * k)
    size = p**n
    ident = np.arange(size)
    if total <= budget:
        group = FiniteGroup.wreath(p, n)
        hits = 0
        chunk = max(1, (1 << 20) // max(size, 1))
        for start in range(0, total, chunk):
            flat = np.arange(start, min(total, start + chunk))
            if k:
                gens = [group.perms[i] for i in np.unravel_index(flat, (group.order,) * k)]
            else:
                gens = [np.broadcast_to(ident, (flat.size, size))]
            hits += int((evaluate_batch(w, gens) == ident).all(axis=1).sum())
        ratio = (math.log(hits, p) / (k * log_order)) if (k * log_order) else math.nan
        return CensusResult(hits, total, ratio, hits < total, "exhaustive")
    rng = rng or RngConfig()
    H = PermGroupSpec.cyclic(p)
    gens = [haar_leaf_actions(H, n, samples, rng.generator(0, g)) for g in range(max(k, 1))]
    hits = int((evaluate_batch(w, gens) == ident).all(axis=1).sum())
    frac = hits / samples
    half = 1.96 * math.sqrt(max(frac * (1 - frac), 1.0 / samples) / samples)
    lo, hi = max(frac - half, 0.0), min(frac + half, 1.0)
    est = frac * total
    # log_p of the count straight from the fraction to avoid float overflow
    ratio = ((math.log(frac, p) + k * log_order) / (k * log_order)) if frac > 0 else math.nan
    return CensusResult(est, total, ratio, hi < 1.0, "sampling",
                        (lo * total, hi * total), samples)


# -- Schreier graphs and chains -----------------------------------------------

def _as_perm(g) -> np.ndarray:
    return leaf_action(g) if isinstance(g, TreeAutomorphism) else np.asarray(g, dtype=np.int64)


@dataclass
class SchreierGraph:
    """Edges (v, i) from v to v^(g_i); edge id = v * len(gens) + i."""

    perms: list

    @classmethod
    def of(cls, gens: Sequence) -> "SchreierGraph":
        perms = [_as_perm(g) for g in gens]
        if not perms or any(p.size != perms[0].size for p in perms):
            raise DomainError("generators must act on a common set")
        return cls(perms)

    @property
    def num_vertices(self) -> int:
        return self.perms[0].size

    @property
    def num_gens(self) -> int:
        return len(self.perms)

    @property
    def num_edges(self) -> int:
        return self.num_vertices * self.num_gens

    def edge(self, v: int, i: int) -> int:
        return v * self.num_gens + i

    def target(self, v: int, i: int) -> int:
        return int(self.perms[i][v])

    def orbit(self, x: int) -> list[int]:
        seen = {x}
        order = [x]
        queue = deque([x])
        while queue:
            v = queue.popleft()
            for i in range(self.num_gens):
                u = self.target(v, i)
                if u not in seen:
                    seen.add(u)
                    order.append(u)
                    queue.append(u)
        return order

    def spanning_tree(self, x: int) -> tuple[dict, set]:
        """BFS tree along forward edges: paths from x to each vertex, and the tree edges."""
        paths = {x: FreeWord()}
        tree_edges = set()
        queue = deque([x])
        while queue:
            v = queue.popleft()
            for i in range(self.num_gens):
                u = self.target(v, i)
                if u not in paths:
                    paths[u] = FreeWord(paths[v].letters + ((i, 1),))
                    tree_edges.add((v, i))
                    queue.append(u)
        return paths, tree_edges

    def move(self, v: int, w: FreeWord) -> int:
        for i, e in w.letters:
            v = self.target(v, i) if e > 0 else int(np.flatnonzero(self.perms[i] == v)[0])
        return v


def stabilizer_words(graph: SchreierGraph, x: int) -> list[FreeWord]:
    """Fundamental-cycle words t_v g_i t_u^-1 for the non-tree edges of x's orbit.

    They number |E| - |V| + 1 on the orbit and generate the stabilizer of x.
    """
    paths, tree_edges = graph.spanning_tree(x)
    out = []
    for v in paths:
        for i in range(graph.num_gens):
            if (v, i) in tree_edges:
                continue
            u = graph.target(v, i)
            out.append(paths[v] * FreeWord(((i, 1),)) * paths[u].inverse())
    return out


def one_chain(w: FreeWord, v: int, graph: SchreierGraph, p: int) -> np.ndarray:
    """Signed edge-usage counts mod p of the path of w starting at v."""
    chain = np.zeros(graph.num_edges, dtype=np.int64)
    inv = {}
    cur = v
    for i, e in w.letters:
        if e > 0:
            chain[graph.edge(cur, i)] += 1
            cur = graph.target(cur, i)
        else:
            if i not in inv:
                inv[i] = np.argsort(graph.perms[i])
            prev = int(inv[i][cur])
            chain[graph.edge(prev, i)] -= 1
            cur = prev
    return chain % p


def closed_chain(w: FreeWord, v: int, graph: SchreierGraph, p: int) -> np.ndarray:
    """Chain of the cycle w^l(v), l the least positive power with v^(w^l) = v."""
    chain = np.zeros(graph.num_edges, dtype=np.int64)
    cur = v
    while True:
        chain = chain + one_chain(w, cur, graph, p)
        cur = graph.move(cur, w)
        if cur == v:
            return chain % p


def boundary(chain: np.ndarray, graph: SchreierGraph, p: int) -> np.ndarray:
    """d(edge v -> u) = u - v, as a vector over the vertices."""
    out = np.zeros(graph.num_vertices, dtype=np.int64)
    chain = np.asarray(chain)
    for e in np.flatnonzero(chain):
        v, i = divmod(int(e), graph.num_gens)
        out[graph.target(v, i)] += chain[e]
        out[v] -= chain[e]
    return out % p


def restrict_chain(chain: np.ndarray, graph: SchreierGraph, gens: Iterable[int]) -> np.ndarray:
    mask = np.zeros(graph.num_gens, dtype=bool)
    mask[list(gens)] = True
    return np.where(np.tile(mask, graph.num_vertices), chain, 0)


# -- kappa --------------------------------------------------------------------

@dataclass(frozen=True)
class KappaResult:
    vertex: int
    kappa: int
    word: FreeWord            # in letters g1, g2, g_* = g3^kappa
    expanded: FreeWord        # the same word over g1, g2, g3
    star_fixes_no_point: bool


def _expand(word: FreeWord, kappa: int) -> FreeWord:
    letters = []
    for i, e in word.letters:
        letters.extend([(i, e)] * (kappa if i == 2 else 1))
    return FreeWord(tuple(letters))


def _power_perm(g: np.ndarray, k: int) -> np.ndarray:
    out = np.arange(g.size)
    base = g
    while k:
        if k & 1:
            out = base[out]
        k >>= 1
        base = base[base]
    return out


def kappa(g1, g2, g3, v: int, p: int) -> KappaResult:
    """Least kappa = p^a with a word in g1, g2, g3^kappa fixing v whose g3^kappa exponent sum is prime to p."""
    perms = [_as_perm(g) for g in (g1, g2, g3)]
    size = perms[0].size
    kap = 1
    while kap <= size:
        star = _power_perm(perms[2], kap)
        graph = SchreierGraph([perms[0], perms[1], star])
        for w in stabilizer_words(graph, v):
            if exponent_sum_vector(w, 3)[2] % p:
                return KappaResult(v, kap, w, _expand(w, kap),
                                   bool((star != np.arange(size)).all()))
        kap *= p
    raise NotFoundError(f"no kappa up to {size} for vertex {v}")


def kappa_min(g1, g2, g3, p: int) -> KappaResult:
    """Vertex v_X with the least kappa, its kappa and witness word."""
    size = _as_perm(g1).size
    best = None
    for v in range(size):
        try:
            res = kappa(g1, g2, g3, v, p)
        except NotFoundError:
            continue
        if best is None or res.kappa < best.kappa:
            best = res
            if best.kappa == 1:
                break
    if best is None:
        raise NotFoundError("no vertex admits a kappa")
    return best


# -- bounded relation search --------------------------------------------------

def reduced_words(k: int, max_length: int):
    """All nontrivial reduced words in k generators up to the given length."""
    letters = [(i, e) for i in range(k) for e in (1, -1)]
    frontier = [()]
    for _ in range(max_length):
        nxt = []
        for w in frontier:
            for a in letters:
                if w and w[-1][0] == a[0] and w[-1][1] == -a[1]:
                    continue
                nxt.append(w + (a,))
        for w in nxt:
            yield FreeWord(w)
        frontier = nxt


def shortest_relations(gen_batches: Sequence[np.ndarray], max_length: int) -> np.ndarray:
    """Per sample, the least length of a nontrivial reduced word evaluating to 1 (0 if none).

    Depth-first over reduced words with the partial products kept on a stack,
    vectorized over the samples.
    """
    count, size = gen_batches[0].shape
    ident = np.arange(size)
    steps = []
    for i, g in enumerate(gen_batches):
        steps.append(((i, 1), g))
        steps.append(((i, -1), _inverse_batch(g)))
    found = np.zeros(count, dtype=np.int64)

    def walk(prod, last, length):
        for (letter, g) in steps:
            if last is not None and letter[0] == last[0] and letter[1] == -last[1]:
                continue
            nxt = _compose_batch(prod, g)
            trivial = (nxt == ident).all(axis=1) & (found == 0)
            found[trivial] = length
            if length < max_length:
                walk(nxt, letter, length + 1)

    walk(np.broadcast_to(ident, (count, size)).copy(), None, 1)
    return found


def sidki_experiment(p: int, depth: int, max_length: int, samples: int,
                     rng: RngConfig) -> ExperimentReport:
    """Adding machine with Haar partners: search relations of length <= max_length."""
    import time

    start = time.perf_counter()
    H = PermGroupSpec.cyclic(p)
    s = leaf_action(adding_machine(p, depth))
    partners = haar_leaf_actions(H, depth, samples, rng.generator(0))
    found = shortest_relations([np.broadcast_to(s, partners.shape), partners], max_length)
    with_relation = int((found > 0).sum())
    return ExperimentReport(
        "sidki",
        {"samples_with_relation": with_relation, "fraction_free": 1 - with_relation / samples,
         "shortest_relation_lengths": sorted(int(x) for x in found[found > 0])},
        samples, {}, {"p": p, "depth": depth, "max_length": max_length, "samples": samples},
        rng, time.perf_counter() - start)
