"""Exact masses of base-m self-similar measures on rational subintervals.

The measure nu with maps x -> (x+j)/m and weights p_j satisfies

    nu([u, v)) = sum_j p_j * nu(m*[u, v) - j  intersected with [0, 1))

and rational endpoints over a fixed denominator recur within a finite state
set under I -> clip(m*I - j).  The engine explores that state graph lazily,
resolves acyclic states by substitution and solves each strongly connected
component as a small exact linear system.  States are integer triples
(a, b, D) for [a/D, b/D) in lowest terms, so the hot path hashes small int
tuples; exact rationals appear only in solved values.  This is the one place
the package divides big rationals.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

from .numerics import GuardError

_ZERO = Fraction(0)
_ONE = Fraction(1)

_FULL = "full"
_EMPTY = "empty"


class IntervalMassEngine:
    """Memoised exact evaluator for one base-m weight vector."""

    def __init__(self, base: int, weights: tuple[Fraction, ...], state_cap: int = 1_000_000):
        self.base = base
        self.weights = weights
        self.state_cap = state_cap
        self.positive = [(j, w) for j, w in enumerate(weights) if w > 0]
        # Mass of the point {1}: fixed point of the last map, so it carries
        # mass only in the degenerate all-mass-right case.
        self._full_mass = _ZERO if weights[-1] == 1 else _ONE
        self._resolved: dict[tuple[int, int, int], Fraction] = {}
        self._states = 0

    def mass(self, lo: Fraction, hi: Fraction) -> Fraction:
        """nu([lo, hi) ∩ [0, 1)) as an exact rational."""
        if hi <= lo:
            return _ZERO
        denom = lo.denominator * hi.denominator // gcd(lo.denominator, hi.denominator)
        a = lo.numerator * (denom // lo.denominator)
        b = hi.numerator * (denom // hi.denominator)
        return self.mass_scaled(a, b, denom)

    def mass_scaled(self, a: int, b: int, denom: int) -> Fraction:
        """nu([a/denom, b/denom) ∩ [0, 1)); integers, denom > 0."""
        state = _clip(a, b, denom)
        if state is _EMPTY:
            return _ZERO
        if state is _FULL:
            return self._full_mass
        if state not in self._resolved:
            self._solve_from(state)
        return self._resolved[state]

    def _transitions(self, state):
        """(weight, child_state) pairs; child may be the _FULL/_EMPTY marker."""
        a, b, denom = state
        m = self.base
        out = []
        for j, w in self.positive:
            child = _clip(m * a - j * denom, m * b - j * denom, denom)
            if child is not _EMPTY:
                out.append((w, child))
        return out

    def _solve_from(self, start) -> None:
        """Iterative Tarjan over the lazy state graph; solve SCCs bottom-up."""
        resolved = self._resolved
        index: dict = {}
        lowlink: dict = {}
        on_stack: set = set()
        scc_stack: list = []
        edges: dict = {}
        counter = 0
        work = [(start, 0)]
        while work:
            state, pos = work.pop()
            if pos == 0:
                if state in index:
                    continue
                index[state] = lowlink[state] = counter
                counter += 1
                self._states += 1
                if self._states > self.state_cap:
                    raise GuardError(
                        f"interval recursion exceeded {self.state_cap} states"
                    )
                scc_stack.append(state)
                on_stack.add(state)
                edges[state] = self._transitions(state)
            children = edges[state]
            descended = False
            while pos < len(children):
                child = children[pos][1]
                pos += 1
                if child is _FULL or child in resolved:
                    continue
                if child not in index:
                    work.append((state, pos))
                    work.append((child, 0))
                    descended = True
                    break
                if child in on_stack:
                    if index[child] < lowlink[state]:
                        lowlink[state] = index[child]
            if descended:
                continue
            if lowlink[state] == index[state]:
                component = []
                while True:
                    member = scc_stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == state:
                        break
                self._solve_component(component, edges)
            if work:
                parent = work[-1][0]
                if lowlink[state] < lowlink[parent]:
                    lowlink[parent] = lowlink[state]

    def _solve_component(self, component: list, edges: dict) -> None:
        """Solve x_i = c_i + sum_j A_ij x_j over one SCC, exactly."""
        resolved = self._resolved
        if len(component) == 1:
            state = component[0]
            const = _ZERO
            self_coeff = _ZERO
            for w, child in edges[state]:
                if child is _FULL:
                    const += w * self._full_mass
                elif child == state:
                    self_coeff += w
                else:
                    const += w * resolved[child]
            resolved[state] = const / (1 - self_coeff) if self_coeff else const
            return
        pos = {s: i for i, s in enumerate(component)}
        k = len(component)
        rows = [[_ZERO] * k + [_ZERO] for _ in range(k)]
        for i in range(k):
            rows[i][i] = _ONE
        for state in component:
            i = pos[state]
            for w, child in edges[state]:
                if child is _FULL:
                    rows[i][k] += w * self._full_mass
                elif child in pos:
                    rows[i][pos[child]] -= w
                else:
                    rows[i][k] += w * resolved[child]
        for col in range(k):
            piv = next(r for r in range(col, k) if rows[r][col] != 0)
            rows[col], rows[piv] = rows[piv], rows[col]
            inv = 1 / rows[col][col]
            rows[col] = [x * inv for x in rows[col]]
            for r in range(k):
                if r != col and rows[r][col] != 0:
                    factor = rows[r][col]
                    rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
        for state in component:
            resolved[state] = rows[pos[state]][k]


def _clip(a: int, b: int, denom: int):
    """Clip [a/denom, b/denom) to [0, 1) and reduce to lowest terms."""
    if a < 0:
        a = 0
    if b > denom:
        b = denom
    if b <= a:
        return _EMPTY
    if a == 0 and b == denom:
        return _FULL
    g = gcd(gcd(a, b), denom)
    if g > 1:
        return (a // g, b // g, denom // g)
    return (a, b, denom)
