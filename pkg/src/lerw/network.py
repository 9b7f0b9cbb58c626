"""Electrical networks, their reversible walks, and resistance solves.

Conductances live on unordered vertex pairs; an absent pair means zero.
Everything downstream (resistance, harmonic extension, tracing) reduces
to Dirichlet problems for the weighted graph Laplacian, solved exactly
over Fractions in rational mode and with numpy/scipy in double mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from ._exact import SingularSystemError, solve_fraction
from .chain import MarkovChain, build_chain

# interior size beyond which double-mode solves switch to sparse
DENSE_LIMIT = 900


@dataclass(frozen=True)
class ElectricalNetwork:
    vertices: tuple
    conductances: dict
    mode: str = "rational"

    def __post_init__(self):
        if self.mode not in ("rational", "double"):
            raise ValueError(f"unknown mode {self.mode!r}")
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ValueError("duplicate vertices")
        adj = {v: [] for v in self.vertices}
        for key, c in self.conductances.items():
            if not isinstance(key, frozenset) or len(key) != 2:
                raise ValueError(f"conductance key {key!r} is not an unordered pair")
            if not key <= vs:
                raise ValueError(f"conductance key {key!r} leaves the vertex set")
            if c <= 0:
                raise ValueError(f"conductance on {sorted(key, key=repr)!r} must be positive")
            x, y = key
            adj[x].append((y, c))
            adj[y].append((x, c))
        object.__setattr__(self, "_adj", {v: tuple(nb) for v, nb in adj.items()})
        object.__setattr__(self, "_weight", {v: sum(c for _, c in nb) for v, nb in adj.items()})
        # connectivity is part of the type: every solve below assumes it
        if self.vertices:
            seen = {self.vertices[0]}
            stack = [self.vertices[0]]
            while stack:
                for y, _ in self._adj[stack.pop()]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            if len(seen) != len(self.vertices):
                raise ValueError("network is not connected")

    @property
    def n(self) -> int:
        return len(self.vertices)

    def neighbors(self, x):
        return self._adj[x]

    def weight(self, x):
        """Total conductance c_x at a vertex."""
        return self._weight[x]

    def conductance(self, x, y):
        zero = Fraction(0) if self.mode == "rational" else 0.0
        return self.conductances.get(frozenset((x, y)), zero)


def build_network(edges: Iterable, mode: str = "rational") -> ElectricalNetwork:
    """Build a network from (u, v, conductance) triples.

    Vertices are ordered by first appearance; duplicate pairs rejected.
    """
    verts: list = []
    seen: set = set()
    cond: dict = {}
    for u, v, c in edges:
        if u == v:
            raise ValueError(f"self edge at {u!r}")
        key = frozenset((u, v))
        if key in cond:
            raise ValueError(f"duplicate edge {u!r}-{v!r}")
        cond[key] = Fraction(c) if mode == "rational" else float(c)
        for w in (u, v):
            if w not in seen:
                seen.add(w)
                verts.append(w)
    return ElectricalNetwork(tuple(verts), cond, mode)


def network_to_text(net: ElectricalNetwork) -> str:
    lines = []
    done = set()
    for x in net.vertices:
        for y, c in net.neighbors(x):
            key = frozenset((x, y))
            if key in done:
                continue
            done.add(key)
            for name in (str(x), str(y)):
                if not name or any(ch.isspace() for ch in name):
                    raise ValueError(f"vertex name {name!r} is not writable")
            lines.append(f"{x} {y} {c if net.mode == 'rational' else repr(c)}")
    return "\n".join(lines) + "\n"


def network_from_text(text: str, mode: str = "rational") -> ElectricalNetwork:
    edges = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"bad network line {raw!r}")
        u, v, c = parts
        edges.append((u, v, Fraction(c) if mode == "rational" else float(c)))
    return build_network(edges, mode)


def walk_from_network(net: ElectricalNetwork, absorbing: Iterable = ()) -> MarkovChain:
    """The reversible walk P(x,y) = c_xy / c_x; absorbing vertices get loops."""
    a = frozenset(absorbing)
    if not a <= set(net.vertices):
        raise ValueError("absorbing set leaves the vertex set")
    one = Fraction(1) if net.mode == "rational" else 1.0
    idx = {v: i for i, v in enumerate(net.vertices)}
    rows = []
    for x in net.vertices:
        row = [one * 0] * net.n
        if x in a:
            row[idx[x]] = one
        else:
            cx = net.weight(x)
            for y, c in net.neighbors(x):
                row[idx[y]] = c / cx
        rows.append(row)
    return build_chain(net.vertices, rows, net.mode)


def _dirichlet_solve(net: ElectricalNetwork, boundary: Mapping, current: Mapping) -> dict:
    """Potentials with pinned boundary values and injected interior current.

    Solves L u = current on the interior rows. Raises SingularSystemError
    when some interior part has no path to the boundary.
    """
    if not boundary:
        raise ValueError("boundary must be non-empty")
    vs = set(net.vertices)
    for v in boundary:
        if v not in vs:
            raise ValueError(f"boundary vertex {v!r} is not in the network")
    interior = [v for v in net.vertices if v not in boundary]
    out = {v: boundary[v] for v in boundary}
    if not interior:
        return out
    pos = {v: i for i, v in enumerate(interior)}
    k = len(interior)
    if net.mode == "rational":
        a = [[Fraction(0)] * k for _ in range(k)]
        b = [Fraction(current.get(v, 0)) for v in interior]
        for v in interior:
            i = pos[v]
            a[i][i] = net.weight(v)
            for y, c in net.neighbors(v):
                j = pos.get(y)
                if j is None:
                    b[i] += c * Fraction(boundary[y])
                else:
                    a[i][j] -= c
        try:
            u = solve_fraction(a, [[v] for v in b])
        except SingularSystemError:
            raise SingularSystemError(
                "interior component without boundary contact"
            ) from None
        out.update((v, row[0]) for v, row in zip(interior, u))
        return out
    b = np.array([float(current.get(v, 0.0)) for v in interior])
    if k <= DENSE_LIMIT:
        a = np.zeros((k, k))
        for v in interior:
            i = pos[v]
            a[i, i] = net.weight(v)
            for y, c in net.neighbors(v):
                j = pos.get(y)
                if j is None:
                    b[i] += c * float(boundary[y])
                else:
                    a[i, j] -= c
        from ._exact import solve_double

        u = solve_double(a, b)
    else:
        from scipy.sparse import csc_matrix
        from scipy.sparse.linalg import splu

        data, ri, ci = [], [], []
        for v in interior:
            i = pos[v]
            data.append(net.weight(v))
            ri.append(i)
            ci.append(i)
            for y, c in net.neighbors(v):
                j = pos.get(y)
                if j is None:
                    b[i] += c * float(boundary[y])
                else:
                    data.append(-c)
                    ri.append(i)
                    ci.append(j)
        lap = csc_matrix((data, (ri, ci)), shape=(k, k))
        try:
            u = splu(lap).solve(b)
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from None
        if not np.all(np.isfinite(u)):
            raise SingularSystemError("singular interior Laplacian")
    out.update(zip(interior, u))
    return out


def harmonic_extension(net: ElectricalNetwork, boundary_values: Mapping) -> dict:
    """Energy-minimizing extension of the boundary data.

    With indicator boundary data the interior values are hitting
    probabilities of the 1-set before the 0-set.
    """
    return _dirichlet_solve(net, boundary_values, {})


def effective_resistance_to_set(net: ElectricalNetwork, x, targets: Iterable):
    a = frozenset(targets)
    if not a:
        raise ValueError("target set must be non-empty")
    if x in a:
        raise ValueError("source lies in the target set")
    zero = Fraction(0) if net.mode == "rational" else 0.0
    u = _dirichlet_solve(net, {t: zero for t in a}, {x: zero + 1})
    return u[x]


def effective_resistance(net: ElectricalNetwork, x, y):
    if x == y:
        raise ValueError("effective resistance needs distinct vertices")
    return effective_resistance_to_set(net, x, (y,))


def expected_exit_time(net: ElectricalNetwork, x, targets: Iterable):
    """E_x of the walk's entry time into targets, by the Laplacian identity
    L E = c on the complement (c_v is the vertex weight)."""
    a = frozenset(targets)
    if not a:
        raise ValueError("target set must be non-empty")
    zero = Fraction(0) if net.mode == "rational" else 0.0
    current = {v: net.weight(v) for v in net.vertices if v not in a}
    u = _dirichlet_solve(net, {t: zero for t in a}, current)
    return u[x]


def hitting_distribution(net: ElectricalNetwork, x, targets: Iterable) -> dict:
    """Harmonic measure from x: which target the walk meets first.

    One Dirichlet factorization answers all targets at once, so this
    stays cheap on large sparse graphs.
    """
    tset = frozenset(targets)
    if not tset:
        raise ValueError("target set must be non-empty")
    if x in tset:
        return {t: (Fraction(1) if net.mode == "rational" else 1.0) * (t == x) for t in tset}
    interior = [v for v in net.vertices if v not in tset]
    pos = {v: i for i, v in enumerate(interior)}
    k = len(interior)
    tlist = sorted(tset, key=net.vertices.index)
    if net.mode == "rational":
        out = {}
        zero = Fraction(0)
        for t in tlist:
            bnd = {s: Fraction(1) if s == t else zero for s in tlist}
            out[t] = _dirichlet_solve(net, bnd, {})[x]
        return out
    from scipy.sparse import csc_matrix
    from scipy.sparse.linalg import splu

    data, ri, ci = [], [], []
    rhs = np.zeros((k, len(tlist)))
    tpos = {t: j for j, t in enumerate(tlist)}
    for v in interior:
        i = pos[v]
        data.append(net.weight(v))
        ri.append(i)
        ci.append(i)
        for y, c in net.neighbors(v):
            j = pos.get(y)
            if j is None:
                rhs[i, tpos[y]] += c
            else:
                data.append(-c)
                ri.append(i)
                ci.append(j)
    lap = csc_matrix((data, (ri, ci)), shape=(k, k))
    try:
        u = splu(lap).solve(rhs)
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from None
    if not np.all(np.isfinite(u)):
        raise SingularSystemError("singular interior Laplacian")
    return {t: float(u[pos[x], tpos[t]]) for t in tlist}


def trace_network(net: ElectricalNetwork, keep: Iterable) -> ElectricalNetwork:
    """Reduce the network onto a vertex subset without changing what the
    subset sees: pairwise effective resistances are preserved and the
    induced walk is the original walk watched on its visits to the subset.

    Rational mode eliminates complement vertices one at a time (star-mesh,
    exact); double mode takes the Schur complement of the Laplacian in one
    block step, sparse when the eliminated block is large.
    """
    kset = frozenset(keep)
    if not kset <= set(net.vertices):
        raise ValueError("kept set leaves the vertex set")
    if len(kset) < 2:
        raise ValueError("need at least two kept vertices")
    kept = [v for v in net.vertices if v in kset]
    drop = [v for v in net.vertices if v not in kset]
    if not drop:
        return ElectricalNetwork(tuple(kept), dict(net.conductances), net.mode)

    if net.mode == "rational":
        adj: dict = {v: {} for v in net.vertices}
        for key, c in net.conductances.items():
            x, y = key
            adj[x][y] = adj[x].get(y, Fraction(0)) + c
            adj[y][x] = adj[y].get(x, Fraction(0)) + c
        order = {v: i for i, v in enumerate(net.vertices)}
        remaining = set(drop)
        while remaining:
            # smallest star first keeps the fill-in down
            v = min(remaining, key=lambda w: (len(adj[w]), order[w]))
            remaining.discard(v)
            star = list(adj[v].items())
            total = sum(c for _, c in star)
            for i in range(len(star)):
                a, ca = star[i]
                del adj[a][v]
                for j in range(i + 1, len(star)):
                    b, cb = star[j]
                    add = ca * cb / total
                    adj[a][b] = adj[a].get(b, Fraction(0)) + add
                    adj[b][a] = adj[b].get(a, Fraction(0)) + add
            del adj[v]
        cond = {}
        for x in kept:
            for y, c in adj[x].items():
                cond[frozenset((x, y))] = c
        traced = ElectricalNetwork(tuple(kept), cond, "rational")
    else:
        idx = {v: i for i, v in enumerate(kept)}
        opos = {v: i for i, v in enumerate(drop)}
        nk, no = len(kept), len(drop)
        if no <= DENSE_LIMIT:
            lkk = np.zeros((nk, nk))
            lko = np.zeros((nk, no))
            loo = np.zeros((no, no))
            for key, c in net.conductances.items():
                x, y = key
                for u, w in ((x, y), (y, x)):
                    if u in idx:
                        lkk[idx[u], idx[u]] += c
                        if w in idx:
                            lkk[idx[u], idx[w]] -= c
                        else:
                            lko[idx[u], opos[w]] -= c
                    else:
                        loo[opos[u], opos[u]] += c
                        if w in opos:
                            loo[opos[u], opos[w]] -= c
            schur = lkk - lko @ np.linalg.solve(loo, lko.T)
        else:
            from scipy.sparse import csc_matrix
            from scipy.sparse.linalg import splu

            lkk = np.zeros((nk, nk))
            lko = np.zeros((nk, no))
            data, ri, ci = [], [], []
            for key, c in net.conductances.items():
                x, y = key
                for u, w in ((x, y), (y, x)):
                    if u in idx:
                        lkk[idx[u], idx[u]] += c
                        if w in idx:
                            lkk[idx[u], idx[w]] -= c
                        else:
                            lko[idx[u], opos[w]] -= c
                    else:
                        data.append(c)
                        ri.append(opos[u])
                        ci.append(opos[u])
                        if w in opos:
                            data.append(-c)
                            ri.append(opos[u])
                            ci.append(opos[w])
            loo = csc_matrix((data, (ri, ci)), shape=(no, no))
            schur = lkk - lko @ splu(loo).solve(lko.T)
        cond = {}
        scale = max(abs(schur).max(), 1.0)
        for i in range(nk):
            for j in range(i + 1, nk):
                c = -0.5 * (schur[i, j] + schur[j, i])
                if c > 1e-13 * scale:
                    cond[frozenset((kept[i], kept[j]))] = float(c)
        traced = ElectricalNetwork(tuple(kept), cond, "double")

    # the constructor re-checks connectivity, which a trace of a
    # connected network can never lose
    return traced


class HittingBoundReport(NamedTuple):
    probability: object
    bound: object
    vacuous: bool
    holds: bool


def check_hitting_bound(net: ElectricalNetwork, x, y, targets: Iterable) -> HittingBoundReport:
    """Resistance lower bound for meeting y before the target set.

    Compares P_x(tau_y < tau_A), computed by harmonic extension, against
    1 - R(x,y)/(R(x,A) - R(x,y)). The bound is vacuous unless
    R(x,A) > R(x,y).
    """
    a = frozenset(targets)
    if not a or x in a or y in a:
        raise ValueError("need x, y outside a non-empty target set")
    zero = Fraction(0) if net.mode == "rational" else 0.0
    one = zero + 1
    if x == y:
        prob = one
    else:
        bnd = {t: zero for t in a}
        bnd[y] = one
        prob = harmonic_extension(net, bnd)[x]
    r_xy = zero if x == y else effective_resistance(net, x, y)
    r_xa = effective_resistance_to_set(net, x, a)
    if r_xa <= r_xy:
        return HittingBoundReport(prob, None, True, True)
    bound = one - r_xy / (r_xa - r_xy)
    return HittingBoundReport(prob, bound, False, prob >= bound)
