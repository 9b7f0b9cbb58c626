"""Fractal graph generators: counts, nesting, symmetry, template rules."""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from lerw.fractal import (
    CarpetTemplate,
    adjacency_arrays,
    carpet_graph,
    corner_indices,
    gasket_graph,
    graph_to_text,
    standard_carpet,
    template_from_text,
    template_to_text,
    to_xy,
    uniform_network,
    validate_carpet_template,
)
from lerw.network import effective_resistance


class TestGasket:
    def test_counts(self):
        for m in range(4):
            g = gasket_graph(m)
            assert g.n == (3 ** (m + 1) + 3) // 2
            assert len(g.edges) == 3 ** (m + 1)

    def test_m0_is_triangle(self):
        g = gasket_graph(0)
        assert g.vertices == ((0, 0), (1, 0), (0, 1))
        assert sorted(g.edges) == [(0, 1), (0, 2), (1, 2)]

    def test_nested_sets(self):
        g = gasket_graph(3)
        sizes = [len(s) for s in g.nested]
        assert sizes == [(3 ** (j + 1) + 3) // 2 for j in range(4)]
        for small, big in zip(g.nested, g.nested[1:]):
            assert small < big
        assert g.nested[3] == frozenset(range(g.n))

    def test_no_duplicate_coordinates(self):
        g = gasket_graph(4)
        assert len(set(g.vertices)) == g.n
        assert g.grid == 16

    def test_triangle_symmetries_preserve_graph(self):
        for m in range(4):
            g = gasket_graph(m)
            pos = {p: i for i, p in enumerate(g.vertices)}
            d = g.grid
            swap = lambda a, b: (b, a)
            rot = lambda a, b: (d - a - b, a)
            for f in (swap, rot):
                perm = [pos[f(*p)] for p in g.vertices]
                assert sorted(perm) == list(range(g.n))
                mapped = {tuple(sorted((perm[a], perm[b]))) for a, b in g.edges}
                assert mapped == set(g.edges)

    def test_guard(self):
        with pytest.raises(ValueError, match="cap"):
            gasket_graph(3, max_vertices=10)

    def test_to_xy_unit_sides(self):
        g = gasket_graph(1)
        xy = to_xy(g)
        for a, b in g.edges:
            assert abs(np.hypot(*(xy[a] - xy[b])) - 0.5) < 1e-12


class TestTemplates:
    def test_standard_ok(self):
        assert validate_carpet_template(standard_carpet()) == []

    def test_corner_removed(self):
        cells = frozenset(c for c in standard_carpet().cells if c != (1, 1))
        bad = validate_carpet_template(CarpetTemplate(3, cells))
        assert any("Borders" in v for v in bad)
        assert any("Symmetry" in v for v in bad)

    def test_diagonal_block(self):
        k = 4
        border = {
            (i, j)
            for i in range(1, 5)
            for j in range(1, 5)
            if i in (1, 4) or j in (1, 4)
        }
        bad = validate_carpet_template(CarpetTemplate(k, frozenset(border | {(2, 2), (3, 3)})))
        assert any("Nondiagonality" in v for v in bad)

    def test_disconnected_center(self):
        k = 5
        border = {
            (i, j)
            for i in range(1, 6)
            for j in range(1, 6)
            if i in (1, 5) or j in (1, 5)
        }
        bad = validate_carpet_template(CarpetTemplate(k, frozenset(border | {(3, 3)})))
        assert bad == ["Connected: kept cells fall apart"]

    def test_cell_count_bounds(self):
        full = frozenset((i, j) for i in range(1, 4) for j in range(1, 4))
        assert any("cell count" in v for v in validate_carpet_template(CarpetTemplate(3, full)))

    def test_text_roundtrip(self):
        t = standard_carpet()
        assert template_from_text(template_to_text(t)) == t


class TestCarpet:
    def test_m0_square(self):
        g = carpet_graph(standard_carpet(), 0)
        assert g.n == 4 and len(g.edges) == 4

    def test_m1_sixteen_vertices(self):
        g = carpet_graph(standard_carpet(), 1)
        assert g.n == 16
        assert len(g.edges) == 24

    def test_matches_digit_oracle(self):
        # independent route: a grid point is a vertex iff some incident
        # cell survives the base-k digit test on both coordinates
        tpl = standard_carpet()
        k, m = tpl.k, 2
        g = carpet_graph(tpl, m)
        side = k**m

        def kept(cx, cy):
            if not (0 <= cx < side and 0 <= cy < side):
                return False
            for _ in range(m):
                if (cx % k + 1, cy % k + 1) not in tpl.cells:
                    return False
                cx //= k
                cy //= k
            return True

        expect = set()
        for x, y in product(range(side + 1), repeat=2):
            if any(kept(x - dx, y - dy) for dx, dy in product((0, 1), repeat=2)):
                expect.add((x, y))
        assert set(g.vertices) == expect
        for a, b in g.edges:
            (x1, y1), (x2, y2) = g.vertices[a], g.vertices[b]
            assert (x1 - x2) ** 2 + (y1 - y2) ** 2 == 1

    def test_nested_sets(self):
        g = carpet_graph(standard_carpet(), 3)
        for small, big in zip(g.nested, g.nested[1:]):
            assert small < big
        assert len(g.nested[0]) == 4
        assert len(g.nested[1]) == 16
        assert g.nested[3] == frozenset(range(g.n))

    def test_square_symmetries_preserve_graph(self):
        g = carpet_graph(standard_carpet(), 2)
        pos = {p: i for i, p in enumerate(g.vertices)}
        d = g.grid
        maps = [
            lambda a, b: (d - a, b),
            lambda a, b: (a, d - b),
            lambda a, b: (b, a),
            lambda a, b: (d - b, d - a),
        ]
        for f in maps:
            perm = [pos[f(*p)] for p in g.vertices]
            assert sorted(perm) == list(range(g.n))
            mapped = {tuple(sorted((perm[a], perm[b]))) for a, b in g.edges}
            assert mapped == set(g.edges)

    def test_invalid_template_rejected(self):
        cells = frozenset(c for c in standard_carpet().cells if c != (1, 1))
        with pytest.raises(ValueError, match="invalid carpet template"):
            carpet_graph(CarpetTemplate(3, cells), 1)

    def test_coordinates_exact(self):
        g = carpet_graph(standard_carpet(), 2)
        coords = g.coordinates()
        assert coords[corner_indices(g)[3]] == (Fraction(1), Fraction(1))
        assert all(c[0].denominator in (1, 3, 9) for c in coords)


class TestGraphPlumbing:
    def test_corners(self):
        g = gasket_graph(2)
        ids = corner_indices(g)
        assert len(ids) == 3
        assert g.vertices[ids[0]] == (0, 0)
        c = carpet_graph(standard_carpet(), 1)
        assert len(corner_indices(c)) == 4

    def test_uniform_network_gasket_m0(self):
        net = uniform_network(gasket_graph(0))
        assert effective_resistance(net, 0, 1) == Fraction(2, 3)

    def test_degrees_match(self):
        g = carpet_graph(standard_carpet(), 1)
        net = uniform_network(g)
        indptr, nbr = adjacency_arrays(g)
        for v in range(g.n):
            row = nbr[indptr[v] : indptr[v + 1]]
            assert sorted(row) == list(row)
            assert len(row) == len(net.neighbors(v))

    def test_export_format(self):
        g = gasket_graph(1)
        vtext, etext = graph_to_text(g)
        first = vtext.splitlines()[0].split()
        assert first == ["0", "0", "1", "0", "1"]
        assert len(etext.splitlines()) == len(g.edges)
