"""Network solves: resistance, harmonic extension, tracing, bounds."""

from fractions import Fraction
from random import Random

import pytest

from lerw._exact import SingularSystemError
from lerw.chain import sample_until_entry, trajectory_stream
from lerw.exactlaw import traced_kernel
from lerw.network import (
    ElectricalNetwork,
    build_network,
    check_hitting_bound,
    effective_resistance,
    effective_resistance_to_set,
    expected_exit_time,
    harmonic_extension,
    hitting_distribution,
    network_from_text,
    network_to_text,
    trace_network,
    walk_from_network,
)

from _gen import random_network


def unit_triangle():
    return build_network([("a", "b", 1), ("b", "c", 1), ("a", "c", 1)])


def unit_path(names):
    return build_network([(a, b, 1) for a, b in zip(names, names[1:])])


def long_path(n):
    """Big enough to push double-mode solves onto the sparse branch."""
    return build_network(
        [(f"p{i}", f"p{i+1}", 1.0) for i in range(n)], mode="double"
    )


class TestConstruction:
    def test_rejects_disconnected(self):
        with pytest.raises(ValueError, match="connected"):
            ElectricalNetwork(
                ("a", "b", "c", "d"),
                {frozenset("ab"): Fraction(1), frozenset("cd"): Fraction(1)},
            )

    def test_rejects_bad_edges(self):
        with pytest.raises(ValueError, match="self edge"):
            build_network([("a", "a", 1)])
        with pytest.raises(ValueError, match="duplicate edge"):
            build_network([("a", "b", 1), ("b", "a", 2)])
        with pytest.raises(ValueError, match="positive"):
            build_network([("a", "b", 0)])
        with pytest.raises(ValueError, match="pair"):
            ElectricalNetwork(("a", "b"), {frozenset("a"): Fraction(1)})

    def test_text_roundtrip(self):
        net = build_network([("a", "b", Fraction(3, 2)), ("b", "c", 2)])
        back = network_from_text(network_to_text(net))
        assert back.vertices == net.vertices
        assert back.conductances == net.conductances
        assert network_from_text("# comment\n\na b 1/2\n").conductance("a", "b") == Fraction(1, 2)


class TestWalk:
    def test_triangle_is_srw(self):
        ch = walk_from_network(unit_triangle())
        assert ch.transition("a", "b") == Fraction(1, 2)
        assert ch.transition("a", "a") == 0

    def test_conductance_ratio(self):
        net = build_network([("a", "b", 2), ("b", "c", 1)])
        ch = walk_from_network(net)
        assert ch.transition("b", "a") == Fraction(2, 3)
        assert ch.transition("b", "c") == Fraction(1, 3)

    def test_detailed_balance(self):
        rng = Random(3)
        for _ in range(20):
            net = random_network(rng, rng.randint(3, 7))
            ch = walk_from_network(net)
            for x in net.vertices:
                for y in net.vertices:
                    assert net.weight(x) * ch.transition(x, y) == net.weight(y) * ch.transition(y, x)

    def test_absorbing_rows(self):
        ch = walk_from_network(unit_triangle(), absorbing={"c"})
        assert ch.transition("c", "c") == 1


class TestResistance:
    def test_series(self):
        assert effective_resistance(unit_path("abc"), "a", "c") == 2

    def test_triangle(self):
        assert effective_resistance(unit_triangle(), "a", "b") == Fraction(2, 3)

    def test_four_cycle_opposite(self):
        net = build_network([("a", "b", 1), ("b", "c", 1), ("c", "d", 1), ("d", "a", 1)])
        assert effective_resistance(net, "a", "c") == 1

    def test_to_set_shorts_the_targets(self):
        net = unit_path("abc")
        assert effective_resistance_to_set(net, "b", {"a", "c"}) == Fraction(1, 2)

    def test_metric_axioms_fuzz(self):
        rng = Random(11)
        for _ in range(200):
            net = random_network(rng, rng.randint(3, 7), extra_edges=3)
            x, y, z = rng.sample(net.vertices, 3)
            rxy = effective_resistance(net, x, y)
            ryx = effective_resistance(net, y, x)
            rxz = effective_resistance(net, x, z)
            rzy = effective_resistance(net, z, y)
            assert rxy > 0 and rxy == ryx
            assert rxy <= rxz + rzy

    def test_validation(self):
        net = unit_triangle()
        with pytest.raises(ValueError, match="distinct"):
            effective_resistance(net, "a", "a")
        with pytest.raises(ValueError, match="target set"):
            effective_resistance_to_set(net, "a", {"a", "b"})

    def test_sparse_branch_long_path(self):
        net = long_path(1200)
        r = effective_resistance(net, "p0", "p1200")
        assert abs(r - 1200.0) < 1e-6


class TestHarmonic:
    def test_linear_on_path(self):
        net = unit_path("abcde")
        u = harmonic_extension(net, {"a": Fraction(0), "e": Fraction(1)})
        assert [u[s] for s in "abcde"] == [Fraction(k, 4) for k in range(5)]

    def test_constant_boundary(self):
        u = harmonic_extension(unit_triangle(), {"a": Fraction(7), "b": Fraction(7)})
        assert u["c"] == 7

    def test_empty_boundary_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            harmonic_extension(unit_triangle(), {})
        with pytest.raises(ValueError, match="not in the network"):
            harmonic_extension(unit_triangle(), {"z": Fraction(1)})

    def test_interior_without_contact_rejected(self):
        # d-e hangs off c; pinning a and b leaves them fine, but pinning
        # only a and cutting c would not: build the cut explicitly
        net = build_network([("a", "b", 1), ("b", "c", 1), ("c", "d", 1)])
        u = harmonic_extension(net, {"a": Fraction(0), "d": Fraction(3)})
        assert u["b"] == 1 and u["c"] == 2

    def test_equals_hitting_probability_exact(self):
        rng = Random(21)
        for _ in range(30):
            net = random_network(rng, rng.randint(4, 7), extra_edges=3)
            y, a1, x = rng.sample(net.vertices, 3)
            bnd = {y: Fraction(1), a1: Fraction(0)}
            u = harmonic_extension(net, bnd)
            hm = hitting_distribution(net, x, {y, a1})
            assert u[x] == hm[y]
            assert hm[y] + hm[a1] == 1

    def test_matches_monte_carlo(self):
        # triangle plus a pendant leg; compare against 10^5 sampled walks
        net = build_network(
            [("a", "b", 1), ("b", "c", 1), ("a", "c", 1), ("c", "d", 1)]
        )
        u = harmonic_extension(net, {"b": Fraction(1), "d": Fraction(0)})
        p = float(u["a"])
        ch = walk_from_network(net, absorbing={"b", "d"})
        n = 10**5
        hits = 0
        for i in range(n):
            path = sample_until_entry(ch, "a", {"b", "d"}, trajectory_stream(9, i))
            hits += path[-1] == "b"
        sigma = (p * (1 - p) / n) ** 0.5
        assert abs(hits / n - p) < 3.5 * sigma

    def test_sparse_branch_linear(self):
        net = long_path(1100)
        u = harmonic_extension(net, {"p0": 0.0, "p1100": 1.0})
        assert abs(u["p550"] - 0.5) < 1e-9


class TestTrace:
    def test_path_to_ends(self):
        t = trace_network(unit_path("abc"), {"a", "c"})
        assert t.conductances == {frozenset("ac"): Fraction(1, 2)}

    def test_identity_trace(self):
        net = unit_triangle()
        t = trace_network(net, net.vertices)
        assert t.conductances == net.conductances

    def test_star_to_leaves(self):
        net = build_network([("o", "x", 1), ("o", "y", 1), ("o", "z", 1)])
        t = trace_network(net, {"x", "y", "z"})
        assert set(t.conductances.values()) == {Fraction(1, 3)}
        assert len(t.conductances) == 3

    def test_preserves_resistance_exact_fuzz(self):
        rng = Random(31)
        for _ in range(60):
            net = random_network(rng, rng.randint(4, 8), extra_edges=3)
            k = rng.randint(2, net.n - 1)
            keep = rng.sample(net.vertices, k)
            t = trace_network(net, keep)
            for _ in range(3):
                x, y = rng.sample(keep, 2) if k > 2 else keep
                assert effective_resistance(t, x, y) == effective_resistance(net, x, y)

    def test_tower_exact(self):
        rng = Random(32)
        for _ in range(40):
            net = random_network(rng, rng.randint(5, 8), extra_edges=3)
            v2 = rng.sample(net.vertices, rng.randint(3, net.n - 1))
            v1 = rng.sample(v2, rng.randint(2, len(v2) - 1))
            once = trace_network(net, v1)
            twice = trace_network(trace_network(net, v2), v1)
            assert once.conductances == twice.conductances

    def test_induced_walk_is_traced_kernel(self):
        rng = Random(33)
        for _ in range(30):
            net = random_network(rng, rng.randint(4, 7), extra_edges=2)
            sub = frozenset(rng.sample(net.vertices, rng.randint(2, 3)))
            walk = walk_from_network(trace_network(net, sub))
            direct = traced_kernel(walk_from_network(net), sub, (), "exclude-current")
            assert set(walk.states) == set(direct.states)
            for x in sub:
                for y in sub:
                    assert walk.transition(x, y) == direct.transition(x, y)

    def test_double_agrees_with_rational(self):
        rng = Random(34)
        net = random_network(rng, 7, extra_edges=4)
        dnet = ElectricalNetwork(
            net.vertices,
            {k: float(c) for k, c in net.conductances.items()},
            "double",
        )
        keep = ("a", "b", "c")
        t_exact = trace_network(net, keep)
        t_double = trace_network(dnet, keep)
        for key, c in t_exact.conductances.items():
            assert abs(t_double.conductances[key] - float(c)) < 1e-10

    def test_sparse_branch(self):
        t = trace_network(long_path(1200), {"p0", "p1200"})
        assert abs(t.conductances[frozenset(("p0", "p1200"))] - 1 / 1200) < 1e-12

    def test_validation(self):
        with pytest.raises(ValueError, match="two kept"):
            trace_network(unit_triangle(), {"a"})
        with pytest.raises(ValueError, match="vertex set"):
            trace_network(unit_triangle(), {"a", "zz"})


class TestExitTime:
    def test_path_end(self):
        # gambler's ruin from the free end of a 2-edge path: 4 steps
        assert expected_exit_time(unit_path("abc"), "a", {"c"}) == 4

    def test_upper_bound_exact_fuzz(self):
        rng = Random(41)
        for _ in range(100):
            net = random_network(rng, rng.randint(3, 8), extra_edges=2)
            a = frozenset(rng.sample(net.vertices, rng.randint(1, net.n - 1)))
            xs = [v for v in net.vertices if v not in a]
            x = rng.choice(xs)
            mu = sum(net.weight(v) for v in xs)
            assert expected_exit_time(net, x, a) <= mu * effective_resistance_to_set(net, x, a)


class TestHittingBound:
    def test_trivial_same_point(self):
        rep = check_hitting_bound(unit_path("abcde"), "b", "b", {"e"})
        assert rep.probability == 1 and rep.holds and not rep.vacuous
        assert rep.bound == 1

    def test_path_mid(self):
        names = [f"n{i}" for i in range(11)]
        net = unit_path(names)
        rep = check_hitting_bound(net, "n5", "n4", {"n10"})
        assert rep.probability == Fraction(5, 6)
        assert rep.bound == Fraction(3, 4)
        assert rep.holds and not rep.vacuous

    def test_vacuous_case(self):
        rep = check_hitting_bound(unit_path("abc"), "b", "a", {"c"})
        assert rep.vacuous and rep.holds and rep.bound is None

    def test_never_violated_fuzz(self):
        rng = Random(51)
        for _ in range(1000):
            net = random_network(rng, 8, extra_edges=rng.randint(1, 5))
            x, y, a1, a2 = rng.sample(net.vertices, 4)
            rep = check_hitting_bound(net, x, y, {a1, a2})
            assert rep.holds

    def test_validation(self):
        with pytest.raises(ValueError, match="target set"):
            check_hitting_bound(unit_path("abc"), "a", "c", {"c"})
