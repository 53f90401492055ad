"""The fifteen acceptance criteria as runnable checks with pinned tolerances.

Each ``criterion_N`` returns a :class:`CriterionResult`; a criterion passes when
its numerical condition holds and it finished inside its time budget.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .asymptotics import alpha_min, alpha_turan, orbit_measure, turan_residual
from .grouplin import (abelian_bound_check, boundary_slice_dim, build_chain, commutator_density,
                       density_sequence, polihamu_formula, polihamu_pair,
                       random_generation_dimension_experiment, solvable_sum_check)
from .orbits import are_conjugate
from .stochastic import (RngConfig, haar_random, survival_experiment, transitivity_experiment,
                         transitivity_product, turan_experiment)
from .treealg import (PermGroupSpec, TreeAutomorphism, all_elements, from_leaf_action,
                      leaf_action, power)
from .words import (FiniteGroup, FreeWord, commutator_word, even_cover_check,
                    exponent_sum_vector, kernel_census, sidki_experiment)
from .zoo import adding_machine, grigorchuk_generators, solvable_examples
from .grouplin.fp import rank as fp_rank

C2 = PermGroupSpec.cyclic(2)


@dataclass
class CriterionResult:
    number: int
    title: str
    holds: bool
    budget_seconds: float
    measured: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def within_budget(self) -> bool:
        return self.elapsed < self.budget_seconds

    @property
    def passed(self) -> bool:
        return self.holds and self.within_budget

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        brief = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        return f"[{status}] {self.number:2d} {self.title}: {brief} ({self.elapsed:.1f}s/{self.budget_seconds:.0f}s)"

    def to_json(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "holds": self.holds, "within_budget": self.within_budget,
                "budget_seconds": self.budget_seconds, "measured": self.measured}


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)) and len(v) > 6:
        return f"[{len(v)} values]"
    return v


def _timed(number: int, title: str, budget: float):
    def wrap(fn: Callable[..., tuple[bool, dict]]):
        def run(seed: int = 0) -> CriterionResult:
            start = time.perf_counter()
            holds, measured = fn(seed)
            return CriterionResult(number, title, bool(holds), budget, measured,
                                   time.perf_counter() - start)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        run.number = number
        return run
    return wrap


@_timed(1, "alpha consistency", 1.0)
def criterion_1(seed):
    worst_gap, worst_res = 0.0, 0.0
    for p in (2, 3, 5):
        a = alpha_turan(p).alpha
        b = alpha_min(orbit_measure(PermGroupSpec.cyclic(p), p)).alpha
        worst_gap = max(worst_gap, abs(a - b))
        worst_res = max(worst_res, abs(turan_residual(a, p)))
    return worst_gap < 1e-9 and worst_res < 1e-10, {"max_gap": worst_gap, "max_residual": worst_res}


@_timed(2, "Turan limit", 60.0)
def criterion_2(seed):
    rng = RngConfig(seed)
    rep = turan_experiment(2, 14, 2000, rng)
    gap = rep.estimates["gap"]
    variances = {n: turan_experiment(2, n, 2000, RngConfig(seed, n)).estimates["variance_k"]
                 for n in (8, 12, 16)}
    holds = gap < 0.06 and all(v < 5 for v in variances.values())
    return holds, {"mean_k_over_n": rep.estimates["mean_k_over_n"], "gap": gap,
                   "exact_mean_k_over_n": rep.estimates["exact_mean_k_over_n"],
                   **{f"variance_n{n}": v for n, v in variances.items()}}


@_timed(3, "transitivity constant", 60.0)
def criterion_3(seed):
    exact20 = float(transitivity_product(C2, 2, 20))
    truncated = float(transitivity_product(C2, 2, 4))
    rep = transitivity_experiment(C2, 2, 4, 100_000, RngConfig(seed))
    p_hat = rep.estimates["p_hat"]
    holds = 0.62 <= exact20 <= 0.65 and abs(p_hat - truncated) < 0.01
    return holds, {"product_20": exact20, "product_4": truncated, "monte_carlo_4": p_hat}


@_timed(4, "survival constant", 120.0)
def criterion_4(seed):
    rep = survival_experiment(C2, 64, 1_000_000, RngConfig(seed))
    v = rep.estimates["n_p_hat"]
    return 1.7 <= v <= 2.3, {"n_p_hat": v, "exact_n_p": rep.estimates["exact_n_p"]}


@_timed(5, "conjugacy oracle", 60.0)
def criterion_5(seed):
    elems = all_elements(C2, 3)
    perms = np.array([leaf_action(g) for g in elems])
    keys = {row.tobytes(): i for i, row in enumerate(perms)}
    # exhaustive conjugacy classes: x^-1 g x = x^-1[g[x]]
    inv = np.argsort(perms, axis=1)
    cls = np.full(len(elems), -1)
    for i in range(len(elems)):
        if cls[i] >= 0:
            continue
        for x in range(len(elems)):
            cls[keys[perms[x][perms[i][inv[x]]].tobytes()]] = i
    mismatches = 0
    for i, j in itertools.product(range(len(elems)), repeat=2):
        mismatches += are_conjugate(elems[i], elems[j]) != (cls[i] == cls[j])
    return mismatches == 0, {"pairs": len(elems) ** 2, "mismatches": int(mismatches),
                             "classes": int(len(set(cls.tolist())))}


@_timed(6, "slice formula", 300.0)
def criterion_6(seed):
    bad = []
    checked = 0
    for n in range(2, 9):
        for k in range(n):
            s, g = polihamu_pair(n, k, 2)
            dim = boundary_slice_dim([s, power(g, 2**k)], n)
            checked += 1
            if dim != polihamu_formula(n, k, 2):
                bad.append((n, k, dim))
    return not bad, {"cases": checked, "mismatches": bad}


@_timed(7, "chain-order oracle", 120.0)
def criterion_7(seed):
    rng = RngConfig(seed).generator(7)
    mismatches = 0
    for i in range(200):
        gens = [haar_random(4, C2, rng) for _ in range(1 + int(rng.integers(3)))]
        if FiniteGroup.from_generators(gens).order != 2 ** build_chain(gens).order_exponent:
            mismatches += 1
    return mismatches == 0, {"sets": 200, "mismatches": mismatches}


def _random_word(rng, letters: int, length: int) -> FreeWord:
    return FreeWord(tuple((int(rng.integers(letters)), int(rng.choice([-1, 1])))
                          for _ in range(length)))


def even_cover_systems(seed: int, count: int = 20) -> list[tuple]:
    """Seeded word systems meeting the independence precondition over groups of order <= 64."""
    rng = RngConfig(seed).generator(8)
    groups = [("C2", FiniteGroup.wreath(2, 1)), ("C3", FiniteGroup.wreath(3, 1)),
              ("Gamma_2(2)", FiniteGroup.wreath(2, 2))]
    for order in (16, 32, 64):
        # subgroups of Gamma_3(2) of the wanted order
        while True:
            gens = [haar_random(3, C2, rng) for _ in range(2)]
            grp = FiniteGroup.from_generators(gens, p=2)
            if grp.order == order:
                groups.append((f"order{order}", grp))
                break
    systems = []
    while len(systems) < count:
        name, grp = groups[len(systems) % len(groups)]
        n_free = 3 if grp.order <= 8 else 2
        k = int(rng.integers(1, n_free + 1))
        m = int(rng.integers(0, 2))
        words = [_random_word(rng, n_free + m, int(rng.integers(1, 6))) for _ in range(k)]
        vecs = np.array([exponent_sum_vector(w, n_free + m)[:n_free] for w in words])
        if fp_rank(vecs, grp.p) < k:
            continue
        fixed = [int(rng.integers(grp.order)) for _ in range(m)]
        systems.append((name, grp, n_free, words, fixed))
    return systems


@_timed(8, "even cover", 60.0)
def criterion_8(seed):
    failures = []
    for name, grp, n_free, words, fixed in even_cover_systems(seed):
        if not even_cover_check(words, grp, n_free, fixed):
            failures.append((name, [str(w) for w in words]))
    return not failures, {"systems": 20, "failures": failures}


KERNEL_WORDS = {"g1^2": (FreeWord.parse("a a"), 1),
                "[g1,g2]": (commutator_word(FreeWord.parse("a"), FreeWord.parse("b")), 2),
                "g1 g2 g1 g2^-1": (FreeWord.parse("a b a B"), 2)}


def enumerable_levels(k: int) -> range:
    """Levels n >= 1 where |Gamma_n(2)|^k stays within the census budget."""
    return range(1, 5) if k == 1 else range(1, 4)


@_timed(9, "kernel not full-dimensional", 120.0)
def criterion_9(seed):
    rows = {}
    holds = True
    for name, (w, k) in KERNEL_WORDS.items():
        for n in enumerable_levels(k):
            res = kernel_census(w, k, 2, n)
            rows[f"{name}@n={n}"] = f"{res.count}/{res.total}"
            holds &= res.strict
    return holds, rows


@_timed(10, "random generation dimension", 600.0)
def criterion_10(seed):
    rep = random_generation_dimension_experiment(3, 2, 9, 50, RngConfig(seed))
    frac = rep.estimates["fraction_above_threshold"]
    return frac >= 0.9, {"fraction_gamma9_above_0.9": frac, "min_gamma9": rep.estimates["min_gamma_n"]}


@_timed(11, "Grigorchuk density", 300.0)
def criterion_11(seed):
    gens = list(grigorchuk_generators(10).values())
    gamma = float(density_sequence(gens, 10).gamma(10))
    return abs(gamma - 0.625) <= 0.02, {"gamma_10": gamma}


def random_abelian_generators(rng, depth: int = 4) -> list[TreeAutomorphism]:
    """Cyclic subgroups and products of elements supported on disjoint subtrees."""
    kind = int(rng.integers(3))
    g = haar_random(depth, C2, rng)
    if kind == 0:
        return [g]
    if kind == 1:
        return [g, power(g, int(rng.integers(1, 8)))]
    # rooted at the two children: left part acts below vertex 0, right part below vertex 1
    left = haar_random(depth - 1, C2, rng)
    right = haar_random(depth - 1, C2, rng)
    half = 2 ** (depth - 1)
    a = np.concatenate([leaf_action(left), np.arange(half, 2 * half)])
    b = np.concatenate([np.arange(half), half + leaf_action(right)])
    return [from_leaf_action(C2, depth, a), from_leaf_action(C2, depth, b)]


@_timed(12, "Abelian bound", 120.0)
def criterion_12(seed):
    rng = RngConfig(seed).generator(12)
    violations = 0
    for _ in range(500):
        if not abelian_bound_check(random_abelian_generators(rng)).holds:
            violations += 1
    am = abelian_bound_check([adding_machine(2, 4)])
    return violations == 0 and am.gap == 0, {"subgroups": 500, "violations": violations,
                                              "adding_machine_gap": am.gap}


@_timed(13, "solvable sum", 120.0)
def criterion_13(seed):
    out = {}
    holds = True
    for name, gens in solvable_examples(10).items():
        rep = solvable_sum_check(gens, 10)
        out[name] = f"d={rep.derived_length} sum={float(rep.gamma_sum):.4f} bound={rep.bound}"
        holds &= rep.holds
    return holds, out


@_timed(14, "perfectness trend", 600.0)
def criterion_14(seed):
    decreasing = 0
    gaps = []
    for i in range(10):
        rng = RngConfig(seed, 14).generator(i)
        gens = [haar_random(8, C2, rng) for _ in range(3)]
        g5 = commutator_density(gens, 5) / (2**5 - 1)
        g8 = commutator_density(gens, 8) / (2**8 - 1)
        gaps.append((g5, g8))
        decreasing += g8 < g5
    return decreasing >= 8, {"decreasing": decreasing, "gaps": gaps}


@_timed(15, "Sidki experiment", 600.0)
def criterion_15(seed):
    rep = sidki_experiment(2, 10, 8, 100, RngConfig(seed))
    with_rel = rep.estimates["samples_with_relation"]
    return with_rel == 0, {"partners": 100, "partners_with_relation": with_rel}


CRITERIA = {f.number: f for f in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                  criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
                                  criterion_11, criterion_12, criterion_13, criterion_14,
                                  criterion_15)}


def run_criteria(numbers=None, seed: int = 0) -> list[CriterionResult]:
    return [CRITERIA[n](seed) for n in (numbers or sorted(CRITERIA))]
