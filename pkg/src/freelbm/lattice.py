"""Discrete velocity sets (D2Q9, D3Q19) and their moment constants."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

CS2 = Fraction(1, 3)

# weights by squared speed |c|^2 = 0, 1, 2
_WEIGHTS = {
    "D2Q9": (Fraction(4, 9), Fraction(1, 9), Fraction(1, 36)),
    "D3Q19": (Fraction(1, 3), Fraction(1, 18), Fraction(1, 36)),
}


@dataclass(frozen=True)
class Stencil:
    """A DdQq velocity set.

    ``velocities`` has shape (q, d) with integer entries, ``weights`` shape (q,).
    The exact rational weights are kept in ``weights_exact``.
    """

    name: str
    d: int
    q: int
    velocities: np.ndarray
    weights: np.ndarray
    weights_exact: tuple
    opposite: np.ndarray
    cs2: float = float(CS2)
    cs2_exact: Fraction = field(default=CS2)

    def __hash__(self):
        return hash(self.name)

    def __eq__(self, other):
        return isinstance(other, Stencil) and other.name == self.name


def _velocity_set(d: int, kind: str) -> list[tuple[int, ...]]:
    max_sq = 2
    vecs = [v for v in itertools.product((-1, 0, 1), repeat=d) if sum(x * x for x in v) <= max_sq]
    if kind == "D2Q9":
        assert len(vecs) == 9
    rest = [v for v in vecs if sum(x * x for x in v) == 0]
    axis = sorted(v for v in vecs if sum(x * x for x in v) == 1)
    diag = sorted(v for v in vecs if sum(x * x for x in v) == 2)
    return rest + axis + diag


def make_stencil(kind: str) -> Stencil:
    """Build the D2Q9 or D3Q19 stencil.

    Index 0 is the rest velocity, followed by the axis directions and then the
    diagonals, each group in lexicographic order of the velocity tuples.
    """
    kind = kind.upper()
    if kind not in _WEIGHTS:
        raise ValueError(f"unsupported stencil {kind!r}; expected D2Q9 or D3Q19")
    d = 2 if kind == "D2Q9" else 3
    vecs = _velocity_set(d, kind)
    w_by_sq = _WEIGHTS[kind]
    w_exact = tuple(w_by_sq[sum(x * x for x in v)] for v in vecs)
    lookup = {v: i for i, v in enumerate(vecs)}
    opp = np.array([lookup[tuple(-x for x in v)] for v in vecs], dtype=np.int64)
    vel = np.array(vecs, dtype=np.int64)
    w = np.array([float(x) for x in w_exact])
    vel.setflags(write=False)
    w.setflags(write=False)
    opp.setflags(write=False)
    return Stencil(name=kind, d=d, q=len(vecs), velocities=vel, weights=w,
                   weights_exact=w_exact, opposite=opp)


def opposite_index(s: Stencil, i: int) -> int:
    if not 0 <= i < s.q:
        raise IndexError(f"velocity index {i} out of range for {s.name}")
    return int(s.opposite[i])


def moment_residuals(s: Stencil, exact: bool = False) -> dict[str, float]:
    """Largest deviation of each isotropy identity from its target value.

    With ``exact=True`` the sums are carried out in rational arithmetic and all
    residuals are exactly zero for a valid stencil.
    """
    if exact:
        w = list(s.weights_exact)
        cs2 = s.cs2_exact
        zero = Fraction(0)
    else:
        w = list(s.weights)
        cs2 = s.cs2
        zero = 0.0
    c = s.velocities.tolist()
    d, q = s.d, s.q
    delta = lambda a, b: 1 if a == b else 0  # noqa: E731
    res = {}
    res["normalization"] = abs(sum(w, zero) - 1)
    res["first"] = max(abs(sum((w[i] * c[i][a] for i in range(q)), zero)) for a in range(d))
    res["second"] = max(
        abs(sum((w[i] * c[i][a] * c[i][b] for i in range(q)), zero) - cs2 * delta(a, b))
        for a in range(d) for b in range(d)
    )
    fourth = zero
    for a, b, g, h in itertools.product(range(d), repeat=4):
        m = sum((w[i] * c[i][a] * c[i][b] * c[i][g] * c[i][h] for i in range(q)), zero)
        iso = cs2 * cs2 * (delta(a, b) * delta(g, h) + delta(a, g) * delta(b, h) + delta(a, h) * delta(b, g))
        fourth = max(fourth, abs(m - iso))
    res["fourth"] = fourth
    res["opposite"] = max(
        max(abs(c[int(s.opposite[i])][a] + c[i][a]) for a in range(d)) for i in range(q)
    ) + max(abs(int(s.opposite[int(s.opposite[i])]) - i) for i in range(q))
    return {k: float(v) for k, v in res.items()}
