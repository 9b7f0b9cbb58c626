"""Exact distributions of erased walks on small chains.

Everything here is closed-form or exhaustively enumerated.  In rational
mode no floating point enters: Green values, path probabilities and the
enumerated laws are Fractions, so equalities between laws can be asserted
with == rather than tolerances.

The enumerator aggregates trajectories by the running first-stage erasure
state (a sufficient statistic for the final pipeline output), which keeps
exhaustive enumeration tractable at the caps needed for certified tails.
The slow per-trajectory recursion is kept alongside as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from ._exact import SingularSystemError, solve_double, solve_fraction
from .chain import MarkovChain, reachability_closure

DELTA = "Δ"  # absorbing sink label used by traced kernels
ENUM_STATE_GUARD = 8


class GuardError(RuntimeError):
    """A guarded computation exceeded its configured budget."""


# ---------------------------------------------------------------------------
# Green tables


@dataclass(frozen=True)
class GreenTable:
    """Expected visit counts before leaving a domain.

    value(x, y) is the expected number of visits to y strictly before the
    exit time from the domain, starting at x.  Rows and columns are both
    indexed by `states` (the domain in chain order).
    """

    states: tuple
    values: tuple
    mode: str

    def value(self, x, y):
        return self.values[self.states.index(x)][self.states.index(y)]

    def diag(self, x):
        i = self.states.index(x)
        return self.values[i][i]


def green(chain: MarkovChain, domain: Iterable) -> GreenTable:
    """Green table of the chain on a strict subdomain.

    Requires exit from the domain to be almost sure from each of its
    states; otherwise the system is singular and an error is raised.
    """
    dom = [s for s in chain.states if s in frozenset(domain)]
    if frozenset(domain) - set(dom):
        raise ValueError("domain contains unknown states")
    if len(dom) == len(chain.states):
        raise ValueError("domain must be a strict subset of the state space")
    outside = frozenset(chain.states) - frozenset(dom)
    closure = reachability_closure(chain, outside)
    stuck = [s for s in dom if s not in closure]
    if stuck:
        raise SingularSystemError(
            f"exit from the domain is not almost sure from {sorted(map(str, stuck))}"
        )
    k = len(dom)
    idx = [chain.index(s) for s in dom]
    q = [[chain.kernel[i][j] for j in idx] for i in idx]
    if chain.mode == "rational":
        a = [[Fraction(int(r == c)) - q[r][c] for c in range(k)] for r in range(k)]
        eye = [[Fraction(int(r == c)) for c in range(k)] for r in range(k)]
        sol = solve_fraction(a, eye)
        values = tuple(tuple(row) for row in sol)
    else:
        a = np.eye(k) - np.array(q, dtype=float)
        sol = solve_double(a, np.eye(k))
        values = tuple(tuple(float(v) for v in row) for row in sol)
    return GreenTable(tuple(dom), values, chain.mode)


def _reachable_within(chain: MarkovChain, start, domain: frozenset) -> frozenset:
    """States of `domain` reachable from start along support paths inside it."""
    adj = chain.support()
    seen = {start}
    stack = [start]
    while stack:
        for y in adj[stack.pop()]:
            if y in domain and y not in seen:
                seen.add(y)
                stack.append(y)
    return frozenset(seen)


def green_diagonal(chain: MarkovChain, domain: Iterable, x):
    """G_domain(x, x) computed on the part of the domain x can actually reach.

    Restricting to the reachable part leaves the value unchanged but keeps
    the linear system regular when the domain contains unrelated traps.
    """
    domain = frozenset(domain)
    if x not in domain:
        raise ValueError("state must belong to the domain")
    part = _reachable_within(chain, x, domain)
    return green(chain, part).diag(x)


def f_product(chain: MarkovChain, domain: Iterable, points: Sequence):
    """Product of Green diagonals on a shrinking domain.

    F(y0, .., yn) = G_B(y0,y0) * G_{B-y0}(y1,y1) * ...; invariant under
    permutations of the points, which tests assert.
    """
    points = tuple(points)
    if len(set(points)) != len(points):
        raise ValueError("points must be distinct")
    dom = set(frozenset(domain))
    if not set(points) <= dom:
        raise ValueError("points must lie in the domain")
    out = Fraction(1) if chain.mode == "rational" else 1.0
    for y in points:
        out *= green_diagonal(chain, frozenset(dom), y)
        dom.remove(y)
    return out


def le_path_probability(chain: MarkovChain, absorbing: Iterable, w: Sequence):
    """Probability that the loop erasure of the stopped walk equals w.

    w must be self-avoiding, start outside the absorbing set except for
    its final state, and end inside it.  The value is the product over
    the path of the Green diagonal on the not-yet-forbidden domain times
    the one-step transition probability.
    """
    a = frozenset(absorbing)
    w = tuple(w)
    if not w:
        raise ValueError("path must be non-empty")
    if len(set(w)) != len(w):
        raise ValueError("path must be self-avoiding")
    if w[-1] not in a:
        raise ValueError("path must end in the absorbing set")
    if any(s in a for s in w[:-1]):
        raise ValueError("only the final state may touch the absorbing set")
    if not set(w) <= set(chain.states):
        raise ValueError("path leaves the state space")
    if len(w) == 1:
        return Fraction(1) if chain.mode == "rational" else 1.0
    base = frozenset(chain.states) - a
    prob = Fraction(1) if chain.mode == "rational" else 1.0
    forbidden: set = set()
    for n in range(len(w) - 1):
        dom = base - forbidden
        prob *= green_diagonal(chain, dom, w[n]) * chain.transition(w[n], w[n + 1])
        forbidden.add(w[n])
    return prob


# ---------------------------------------------------------------------------
# Path laws


@dataclass(frozen=True)
class PathLaw:
    """Finitely supported sub-probability law over paths.

    atoms maps path tuples to positive masses; tail_bound is a certified
    upper bound on the mass not captured by the atoms.  In rational mode
    total + tail_bound <= 1 holds exactly.
    """

    atoms: dict
    tail_bound: object
    mode: str

    def __post_init__(self):
        if any(m <= 0 for m in self.atoms.values()):
            raise ValueError("atom masses must be positive")
        if self.tail_bound < 0:
            raise ValueError("tail bound must be non-negative")
        excess = self.total() + self.tail_bound - 1
        if (self.mode == "rational" and excess > 0) or excess > 1e-9:
            raise ValueError(f"masses plus tail exceed 1 by {excess}")

    def total(self):
        zero = Fraction(0) if self.mode == "rational" else 0.0
        return sum(self.atoms.values(), zero)

    def mass(self, path):
        zero = Fraction(0) if self.mode == "rational" else 0.0
        return self.atoms.get(tuple(path), zero)


def tv_distance(a: PathLaw, b: PathLaw):
    """Half the l1 distance between the atom vectors."""
    keys = set(a.atoms) | set(b.atoms)
    tot = sum(abs(a.mass(k) - b.mass(k)) for k in keys)
    return tot / 2


def law_to_text(law: PathLaw) -> str:
    """One atom per line: space-joined path, a tab, then the mass."""
    if law.mode == "rational":
        fmt = str
        tail = str(law.tail_bound)
    else:
        fmt = lambda v: repr(float(v))
        tail = repr(float(law.tail_bound))
    lines = [f"# tail_bound\t{tail}"]
    for path in sorted(law.atoms, key=lambda p: (len(p), tuple(map(str, p)))):
        lines.append(" ".join(str(s) for s in path) + "\t" + fmt(law.atoms[path]))
    return "\n".join(lines) + "\n"


def law_from_text(text: str) -> PathLaw:
    tail = None
    atoms = {}
    double = False
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln:
            continue
        if ln.startswith("#"):
            token = ln.split("\t")[-1].strip()
            double = double or "." in token
            tail = token
            continue
        path_part, mass = ln.split("\t")
        double = double or "." in mass
        atoms[tuple(path_part.split())] = mass
    if tail is None:
        raise ValueError("missing tail_bound header")
    if double:
        return PathLaw({p: float(m) for p, m in atoms.items()}, float(tail), "double")
    return PathLaw({p: Fraction(m) for p, m in atoms.items()}, Fraction(tail), "rational")


# ---------------------------------------------------------------------------
# Exhaustive enumeration of erased-walk laws


def _ple_step(prefix: tuple, y, retained) -> tuple:
    """Left-fold step of partial loop erasure (retained None = full)."""
    if retained is None or y in retained:
        for k in range(len(prefix) - 1, -1, -1):
            if prefix[k] == y:
                return prefix[: k + 1]
    return prefix + (y,)


def _normalize_pipeline(chain: MarkovChain, pipeline):
    """Return the pipeline as a list of frozenset stages (None = full)."""
    if isinstance(pipeline, str):
        if pipeline != "LE":
            raise ValueError(f"unknown pipeline {pipeline!r}")
        return [None]
    levels = [frozenset(v) for v in pipeline]
    if not levels:
        raise ValueError("pipeline must have at least one level")
    allstates = frozenset(chain.states)
    for v in levels:
        if not v <= allstates:
            raise ValueError("pipeline level leaves the state space")
    for lo, hi in zip(levels, levels[1:]):
        if not lo <= hi:
            raise ValueError("pipeline levels must be nested")
    return levels


# The enumeration state for a trajectory prefix is a nested "tower":
# stage i records, for every retained point currently in its partial
# output, a snapshot of the downstream tower right after that point was
# consumed, plus the current downstream tower.  Rolling back to a
# snapshot is exactly what a loop erasure at that point does to every
# later stage, so the tower is a sufficient statistic for the final
# pipeline output.  Unretained stretches are never stored (only the last
# stage keeps its literal partial path), which is what keeps the state
# space finite when the pipeline ends in full loop erasure.


def _tower_init(x, stages, step):
    state = step((), x, stages[-1])
    for i in range(len(stages) - 2, -1, -1):
        cps = ((x, state),) if x in stages[i] else ()
        state = (cps, state)
    return state


def _tower_feed(state, y, stages, i, step):
    if i == len(stages) - 1:
        return step(state, y, stages[i])
    cps, inner = state
    retained = stages[i]
    if y in retained:
        for j, (z, snap) in enumerate(cps):
            if z == y:
                return cps[: j + 1], snap
        inner2 = _tower_feed(inner, y, stages, i + 1, step)
        return cps + ((y, inner2),), inner2
    return cps, _tower_feed(inner, y, stages, i + 1, step)


def _tower_final(state, depth: int) -> tuple:
    for _ in range(depth - 1):
        state = state[1]
    return state


def _min_absorb_prob(chain: MarkovChain, absorbing: frozenset, closure: frozenset):
    """min over relevant states of P(hit the absorbing set within n steps)."""
    n = chain.n
    states = chain.states
    one = Fraction(1) if chain.mode == "rational" else 1.0
    zero = Fraction(0) if chain.mode == "rational" else 0.0
    u = [one if s in absorbing else zero for s in states]
    for _ in range(n):
        u = [
            one
            if s in absorbing
            else sum(p * u[j] for j, p in enumerate(chain.kernel[i]) if p > 0)
            for i, s in enumerate(states)
        ]
    relevant = [u[i] for i, s in enumerate(states) if s in closure and s not in absorbing]
    return min(relevant) if relevant else one


def enumerate_erasure_law(
    chain: MarkovChain,
    start,
    absorbing: Iterable,
    pipeline="LE",
    length_cap: int = 40,
    tol=None,
    step_fn: Callable | None = None,
) -> PathLaw:
    """Exact law of the erased walk stopped on entering the absorbing set.

    pipeline is "LE" for plain loop erasure or a nested sequence of
    retained sets applied in order.  All trajectories up to the working
    cap are summed; the certified tail_bound is the exact mass of
    trajectories still unabsorbed at the cap.  When tol is given the cap
    is raised (beyond length_cap if needed) until the bound can meet tol,
    using the D-step minimum absorption probability to size it, and a
    GuardError is raised if the bound still ends up above tol.

    step_fn overrides the innermost erasure fold step; it exists so
    negative controls can inject a broken erasure.  Leave it None.
    """
    a = frozenset(absorbing)
    if not a:
        raise ValueError("absorbing set must be non-empty")
    if not a <= set(chain.states):
        raise ValueError("absorbing set leaves the state space")
    if chain.n > ENUM_STATE_GUARD:
        raise GuardError(f"enumeration is guarded to {ENUM_STATE_GUARD} states")
    closure = reachability_closure(chain, a)
    if start not in closure:
        raise ValueError(f"entry into the absorbing set is not almost sure from {start!r}")
    stages = _normalize_pipeline(chain, pipeline)
    depth = len(stages)
    step = step_fn if step_fn is not None else _ple_step
    rational = chain.mode == "rational"

    cap = length_cap
    if tol is not None:
        tol = Fraction(tol) if rational else float(tol)
        p_min = _min_absorb_prob(chain, a, closure)
        if p_min >= 1:
            cap = max(cap, chain.n)
        else:
            rounds = math.log(float(tol)) / math.log(1.0 - float(p_min))
            cap = max(cap, chain.n * (int(rounds) + 2) * 4)

    if start in a:
        one = Fraction(1) if rational else 1.0
        zero = Fraction(0) if rational else 0.0
        return PathLaw({(start,): one}, zero, chain.mode)

    if rational:
        # integer masses over a running power of the common denominator
        denom = math.lcm(*[p.denominator for row in chain.kernel for p in row])
        moves = [
            [(j, int(p * denom)) for j, p in enumerate(row) if p > 0]
            for row in chain.kernel
        ]
    else:
        denom = 1.0
        moves = [[(j, float(p)) for j, p in enumerate(row) if p > 0] for row in chain.kernel]
    states = chain.states
    in_a = [s in a for s in states]
    sidx = {s: i for i, s in enumerate(states)}

    # Aggregated dynamic programming over interned tower states.  Each
    # tower determines the current chain position (the innermost partial
    # always ends with the element just consumed), so the walk kernel
    # composes with the lazily built transition tables.
    ids: dict = {}
    towers: list = []
    cur: list = []  # sid -> chain state index of the walk position
    trans: list = []  # sid -> per-target-state successor sid
    finals: list = []  # sid -> per-absorbing-target final output path

    def intern(tw) -> int:
        sid = ids.get(tw)
        if sid is None:
            sid = len(towers)
            ids[tw] = sid
            towers.append(tw)
            cur.append(sidx[_tower_final(tw, depth)[-1]])
            trans.append([None] * len(states))
            finals.append([None] * len(states))
        return sid

    one_mass = 1 if rational else 1.0
    alive = {intern(_tower_init(start, stages, step)): one_mass}
    done: dict = {}
    denom_pow = one_mass  # denom**t alongside the masses
    for _ in range(cap):
        if not alive:
            break
        denom_pow *= denom
        if done:
            for k in done:
                done[k] *= denom
        nxt: dict = {}
        for sid, mass in alive.items():
            row_t = trans[sid]
            row_f = finals[sid]
            for j, numer in moves[cur[sid]]:
                m2 = mass * numer
                if in_a[j]:
                    final = row_f[j]
                    if final is None:
                        fed = _tower_feed(towers[sid], states[j], stages, 0, step)
                        final = row_f[j] = _tower_final(fed, depth)
                    done[final] = done.get(final, 0 if rational else 0.0) + m2
                else:
                    sid2 = row_t[j]
                    if sid2 is None:
                        sid2 = row_t[j] = intern(
                            _tower_feed(towers[sid], states[j], stages, 0, step)
                        )
                    nxt[sid2] = nxt.get(sid2, 0 if rational else 0.0) + m2
        alive = nxt
        alive_mass = sum(alive.values())
        if tol is not None:
            if rational:
                if alive_mass * tol.denominator <= tol.numerator * denom_pow:
                    break
            elif alive_mass <= tol:
                break

    if rational:
        tail = Fraction(sum(alive.values()), denom_pow)
        atoms = {p: Fraction(m, denom_pow) for p, m in done.items() if m}
    else:
        tail = sum(alive.values())
        atoms = {p: m for p, m in done.items() if m > 0}
    if tol is not None and tail > tol:
        raise GuardError(f"tail bound {float(tail):.3e} exceeds requested {float(tol):.3e}")
    return PathLaw(atoms, tail, chain.mode)


def enumerate_trajectories(chain: MarkovChain, start, absorbing: Iterable, length_cap: int, visit: Callable):
    """Naive exhaustive recursion over trajectories (cross-check tool).

    Calls visit(trajectory, probability) at every absorption and returns
    the total mass of trajectories still alive at the cap.  Exponential;
    keep the cap tiny.
    """
    a = frozenset(absorbing)
    rational = chain.mode == "rational"
    one = Fraction(1) if rational else 1.0
    kernel = chain.kernel
    states = chain.states
    sidx = {s: i for i, s in enumerate(states)}

    def rec(traj: tuple, prob, depth: int):
        if traj[-1] in a:
            visit(traj, prob)
            return one * 0
        if depth == length_cap:
            return prob
        z = sidx[traj[-1]]
        alive = one * 0
        for j, p in enumerate(kernel[z]):
            if p > 0:
                alive += rec(traj + (states[j],), prob * p, depth + 1)
        return alive

    return rec((start,), one, 0)


# ---------------------------------------------------------------------------
# Traced kernels


def _absorption_matrix(chain: MarkovChain, targets: frozenset, absorbers: frozenset):
    """For every interior state, the hit distribution over targets + sink.

    Returns (interior_states, rows) where each row maps target state (or
    DELTA for the absorbers) to the probability of hitting it first.
    """
    interior = [s for s in chain.states if s not in targets and s not in absorbers]
    cols = [s for s in chain.states if s in targets]
    k = len(interior)
    iidx = [chain.index(s) for s in interior]
    if chain.mode == "rational":
        zero, one = Fraction(0), Fraction(1)
    else:
        zero, one = 0.0, 1.0
    rhs = []
    for i in iidx:
        row = [chain.kernel[i][chain.index(c)] for c in cols]
        row.append(sum((chain.kernel[i][chain.index(s)] for s in absorbers), zero))
        rhs.append(row)
    if k == 0:
        return interior, []
    q = [[chain.kernel[r][c] for c in iidx] for r in iidx]
    if chain.mode == "rational":
        a = [[(one if r == c else zero) - q[r][c] for c in range(k)] for r in range(k)]
        sol = solve_fraction(a, rhs)
    else:
        a = np.eye(k) - np.array(q, dtype=float)
        sol = solve_double(a, np.array(rhs, dtype=float))
    rows = []
    for r in range(k):
        rows.append({c: sol[r][j] for j, c in enumerate(cols)} | {DELTA: sol[r][len(cols)]})
    return interior, rows


def traced_kernel(
    chain: MarkovChain,
    subset: Iterable,
    absorbing: Iterable = (),
    variant: str = "hitting-set",
) -> MarkovChain:
    """Kernel of the walk observed on a subset, killed on the absorbing set.

    variant "hitting-set": the next observation is the walk's position at
    its next hitting time of the subset (time >= 1), so self-transitions
    are possible.  variant "exclude-current": the next observation is the
    first visit to the subset minus the current state, so the diagonal is
    zero.  Entering the absorbing set first moves the observation to the
    sink state DELTA, which is absorbing; the sink appears only when the
    absorbing set is non-empty.
    """
    sub = [s for s in chain.states if s in frozenset(subset)]
    a = frozenset(absorbing)
    if not sub:
        raise ValueError("subset must be non-empty")
    if frozenset(subset) - set(sub):
        raise ValueError("subset contains unknown states")
    if not a <= set(chain.states):
        raise ValueError("absorbing set leaves the state space")
    if set(sub) & a:
        raise ValueError("subset and absorbing set must be disjoint")
    if variant not in ("hitting-set", "exclude-current"):
        raise ValueError(f"unknown variant {variant!r}")
    if a and DELTA in (set(chain.states) - a):
        # tracing a chain whose own sink is the absorber is fine; a live
        # state with the reserved name would collide with the new sink
        raise ValueError(f"state name {DELTA!r} is reserved for the sink")

    rational = chain.mode == "rational"
    zero = Fraction(0) if rational else 0.0
    one = Fraction(1) if rational else 1.0

    def absorb_closure(targets: frozenset):
        closure = reachability_closure(chain, targets | a)
        return closure

    out_states = list(sub) + ([DELTA] if a else [])
    rows = []
    if variant == "hitting-set":
        targets = frozenset(sub)
        closure = absorb_closure(targets)
        missing = [s for s in sub if s not in closure]
        if missing:
            raise ValueError(
                f"observation is not almost sure from {sorted(map(str, missing))}"
            )
        interior, irows = _absorption_matrix(chain, targets, a)
        hit = dict(zip(interior, irows))
        for x in sub:
            i = chain.index(x)
            row = {c: zero for c in out_states}
            for j, p in enumerate(chain.kernel[i]):
                if p <= 0:
                    continue
                y = chain.states[j]
                if y in targets:
                    row[y] += p
                elif y in a:
                    row[DELTA] += p
                else:
                    if y not in closure:
                        raise ValueError(f"observation can stall via {y!r}")
                    for c, q in hit[y].items():
                        if q > 0:
                            row[c] += p * q
            rows.append(tuple(row[c] for c in out_states))
    else:
        for x in sub:
            targets = frozenset(sub) - {x}
            if not targets and not a:
                raise ValueError("exclude-current needs a second subset state or killing")
            closure = absorb_closure(targets)
            if x not in closure:
                raise ValueError(f"observation is not almost sure from {x!r}")
            interior, irows = _absorption_matrix(chain, targets, a)
            hit = dict(zip(interior, irows))
            row = {c: zero for c in out_states}
            src = hit[x]
            for c, q in src.items():
                if q > 0:
                    row[c] += q
            rows.append(tuple(row[c] for c in out_states))
    if a:
        rows.append(tuple(one if c == DELTA else zero for c in out_states))
    return MarkovChain(tuple(out_states), tuple(rows), chain.mode)
