"""Named elements and groups: adding machine, automaton elements, subtree stabilizers."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import DomainError
from .treealg import PermGroupSpec, TreeAutomorphism, level_offsets


@dataclass(frozen=True)
class AutomatonElement:
    """Finite-state (Mealy) element: each state has an H-label and one successor per digit."""

    group: PermGroupSpec
    states: tuple
    outputs: dict        # state -> element index in group
    transitions: dict    # state -> tuple of successor states, one per digit
    initial: object

    def __post_init__(self):
        d = self.group.degree
        for s in self.states:
            if s not in self.outputs or s not in self.transitions:
                raise DomainError(f"state {s!r} lacks an output or transitions")
            if not 0 <= self.outputs[s] < self.group.order:
                raise DomainError(f"output of state {s!r} is not an element of H")
            if len(self.transitions[s]) != d or any(t not in self.outputs for t in self.transitions[s]):
                raise DomainError(f"state {s!r} needs {d} valid transitions")
        if self.initial not in self.outputs:
            raise DomainError("unknown initial state")

    def with_initial(self, state) -> "AutomatonElement":
        return AutomatonElement(self.group, self.states, self.outputs, self.transitions, state)

    def to_json(self) -> dict:
        return {"states": list(self.states),
                "outputs": {str(s): int(self.outputs[s]) for s in self.states},
                "transitions": {str(s): list(self.transitions[s]) for s in self.states},
                "initial": self.initial,
                "group": self.group.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "AutomatonElement":
        group = PermGroupSpec.from_json(obj.get("group", {"kind": "cyclic_p", "degree": 2}))
        states = tuple(obj["states"])
        outputs = {s: int(obj["outputs"][str(s)]) for s in states}
        transitions = {s: tuple(obj["transitions"][str(s)]) for s in states}
        return cls(group, states, outputs, transitions, obj["initial"])


def automaton_truncate(a: AutomatonElement, depth: int) -> TreeAutomorphism:
    """Portrait of the automaton element on the top ``depth`` levels."""
    index = {s: i for i, s in enumerate(a.states)}
    out = np.array([a.outputs[s] for s in a.states], dtype=np.int64)
    trans = np.array([[index[t] for t in a.transitions[s]] for s in a.states], dtype=np.int64)
    state = np.array([index[a.initial]], dtype=np.int64)
    chunks = []
    for _ in range(depth):
        chunks.append(out[state])
        state = trans[state].ravel()
    labels = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return TreeAutomorphism(a.group, depth, labels)


def adding_machine(p: int, depth: int) -> TreeAutomorphism:
    """The element with N(v^s) = N(v) + 1 mod p^l on every level l.

    Its label is the rotation by one at each vertex whose digits all equal p-1.
    """
    group = PermGroupSpec.cyclic(p)
    offs = level_offsets(p, depth)
    labels = np.zeros(offs[-1], dtype=np.int64)
    labels[np.array(offs[1:], dtype=np.int64) - 1] = 1
    return TreeAutomorphism(group, depth, labels)


def adding_machine_automaton(p: int) -> AutomatonElement:
    group = PermGroupSpec.cyclic(p)
    return AutomatonElement(group, ("s", "e"), {"s": 1, "e": 0},
                            {"s": ("e",) * (p - 1) + ("s",), "e": ("e",) * p}, "s")


def grigorchuk_automaton() -> AutomatonElement:
    """Five-state automaton with states a, b, c, d and the identity e (initial a)."""
    group = PermGroupSpec.cyclic(2)
    outputs = {"a": 1, "b": 0, "c": 0, "d": 0, "e": 0}
    transitions = {"a": ("e", "e"), "b": ("a", "c"), "c": ("a", "d"),
                   "d": ("e", "b"), "e": ("e", "e")}
    return AutomatonElement(group, ("a", "b", "c", "d", "e"), outputs, transitions, "a")


def grigorchuk_generators(depth: int) -> dict:
    aut = grigorchuk_automaton()
    return {name: automaton_truncate(aut.with_initial(name), depth) for name in "abcd"}


# -- subtrees -----------------------------------------------------------------

@dataclass(frozen=True)
class SubtreeSpec:
    """Subtree T' of the p-ary tree described by vertex types.

    ``types[t]`` is None when vertices of type t have no children in T', or a
    tuple of p child types.  Finitely many types make the branching rule
    eventually periodic, so the limiting measure is exact.
    """

    p: int
    types: dict
    root: object
    name: str = "custom"

    def __post_init__(self):
        if self.root not in self.types:
            raise DomainError("unknown root type")
        for t, kids in self.types.items():
            if kids is not None and (len(kids) != self.p or any(k not in self.types for k in kids)):
                raise DomainError(f"type {t!r} must have None or {self.p} valid child types")

    def level_types(self, depth: int) -> list[np.ndarray]:
        """Type index of every vertex of levels 0..depth (-1 below a childless vertex)."""
        names = list(self.types)
        index = {t: i for i, t in enumerate(names)}
        trans = np.full((len(names) + 1, self.p), -1, dtype=np.int64)
        for t, kids in self.types.items():
            if kids is not None:
                trans[index[t]] = [index[k] for k in kids]
        out = [np.array([index[self.root]], dtype=np.int64)]
        for _ in range(depth):
            out.append(trans[out[-1]].ravel())
        return out

    def branching_mask(self, depth: int) -> np.ndarray:
        """Level-order mask of the internal vertices that have p children in T'."""
        names = list(self.types)
        branching = np.array([self.types[t] is not None for t in names] + [False])
        return np.concatenate([branching[lt] for lt in self.level_types(depth - 1)]) \
            if depth else np.zeros(0, dtype=bool)


def full_tree(p: int = 2) -> SubtreeSpec:
    return SubtreeSpec(p, {"F": ("F",) * p}, "F", "full_tree")


def root_only(p: int = 2) -> SubtreeSpec:
    return SubtreeSpec(p, {"Z": None}, "Z", "root_only")


def single_ray(p: int = 2) -> SubtreeSpec:
    """The comb: vertices along the leftmost ray branch, all others are childless."""
    return SubtreeSpec(p, {"R": ("R",) + ("Z",) * (p - 1), "Z": None}, "R", "single_ray")


def half_tree(p: int = 2) -> SubtreeSpec:
    """Full below the first child of the root, childless at the others (measure 1/p)."""
    return SubtreeSpec(p, {"H": ("F",) + ("Z",) * (p - 1), "F": ("F",) * p, "Z": None},
                       "H", "half_tree")


def even_branching(p: int = 2) -> SubtreeSpec:
    """Every vertex at an even level branches fully; at odd levels only the first child does."""
    return SubtreeSpec(p, {"E": ("O",) * p, "O": ("E",) + ("Z",) * (p - 1), "Z": None},
                       "E", "even_branching")


NAMED_SUBTREES: dict[str, Callable[[int], SubtreeSpec]] = {
    "full_tree": full_tree, "root_only": root_only, "single_ray": single_ray,
    "half_tree": half_tree, "even_branching": even_branching,
}


@dataclass(frozen=True)
class SubtreeMeasure:
    levels: tuple          # mu_n = |T'_n| / p^n for n = 0..depth, as Fractions
    limit: Fraction | None


def _solve_fractions(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(b)
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for c in range(n):
        piv = next(r for r in range(c, n) if m[r][c] != 0)
        m[c], m[piv] = m[piv], m[c]
        inv = 1 / m[c][c]
        m[c] = [x * inv for x in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return [m[r][n] for r in range(n)]


def _limit_measure(spec: SubtreeSpec) -> Fraction:
    """Probability that a uniform random descent from the root never leaves T' interior."""
    names = list(spec.types)
    kids = {t: spec.types[t] for t in names}
    # types whose descendants all stay branching: greatest set closed under children
    safe = {t for t in names if kids[t] is not None}
    changed = True
    while changed:
        changed = False
        for t in list(safe):
            if any(c not in safe for c in kids[t]):
                safe.discard(t)
                changed = True
    # types from which a safe type is reachable
    alive = set(safe)
    changed = True
    while changed:
        changed = False
        for t in names:
            if t not in alive and kids[t] is not None and any(c in alive for c in kids[t]):
                alive.add(t)
                changed = True
    if spec.root not in alive:
        return Fraction(0)
    if spec.root in safe:
        return Fraction(1)
    unknown = [t for t in names if t in alive and t not in safe]
    pos = {t: i for i, t in enumerate(unknown)}
    a = [[Fraction(int(i == j)) for j in range(len(unknown))] for i in range(len(unknown))]
    b = [Fraction(0)] * len(unknown)
    for t in unknown:
        for c in kids[t]:
            if c in safe:
                b[pos[t]] += Fraction(1, spec.p)
            elif c in pos:
                a[pos[t]][pos[c]] -= Fraction(1, spec.p)
    return _solve_fractions(a, b)[pos[spec.root]]


def subtree_measure(spec: SubtreeSpec, n: int) -> SubtreeMeasure:
    levels = tuple(Fraction(int((lt >= 0).sum()), spec.p**level)
                   for level, lt in enumerate(spec.level_types(n)))
    return SubtreeMeasure(levels, _limit_measure(spec))


def subtree_stabilizer_sampler(spec: SubtreeSpec, depth: int, rng: np.random.Generator,
                               group: PermGroupSpec | None = None) -> TreeAutomorphism:
    """Uniform element of the pointwise stabilizer of T' in Gamma_depth(H)."""
    group = group or PermGroupSpec.cyclic(spec.p)
    if group.degree != spec.p:
        raise DomainError("group degree does not match the subtree arity")
    mask = spec.branching_mask(depth)
    labels = rng.integers(0, group.order, size=mask.size)
    labels[mask] = 0
    return TreeAutomorphism(group, depth, labels)


# -- shipped solvable examples -------------------------------------------------

def level_generators(p: int, top: int, depth: int) -> list[TreeAutomorphism]:
    """Rotations at the first vertex of each level < top; they generate Gamma_top(p) inside Gamma_depth(p)."""
    if not 0 <= top <= depth:
        raise DomainError("need 0 <= top <= depth")
    group = PermGroupSpec.cyclic(p)
    offs = level_offsets(p, depth)
    out = []
    for level in range(top):
        labels = np.zeros(offs[-1], dtype=np.int64)
        labels[offs[level]] = 1
        out.append(TreeAutomorphism(group, depth, labels))
    return out


def solvable_examples(depth: int, p: int = 2) -> dict:
    """Named generating sets of solvable subgroups of Gamma_depth(p)."""
    return {
        "trivial": [TreeAutomorphism.identity(PermGroupSpec.cyclic(p), depth)],
        "adding_machine": [adding_machine(p, depth)],
        "top_wreath_3": level_generators(p, min(3, depth), depth),
        "adding_machine_with_root": [adding_machine(p, depth)] + level_generators(p, min(1, depth), depth),
    }
