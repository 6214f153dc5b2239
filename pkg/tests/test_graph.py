import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geocano.errors import AllAtomsRemoved, CutoffExceedsCell, InputError
from geocano.geometry import random_euclidean
from geocano.graph import build_radius_graph, image_range, rewire_remove_tag0
from geocano.system import AtomicSystem, PeriodicCell, random_system

from oracles import brute_force_graph


def oracle_for(s, cutoff, max_neighbors):
    if s.cell is None:
        return brute_force_graph(s.positions, None, None, cutoff, max_neighbors, (0, 0, 0))
    widths = s.cell.perpendicular_widths()
    # one spare shell beyond what the cutoff needs, so the oracle cannot share a blind spot
    reach = [math.ceil(cutoff / w) + 1 for w in widths]
    return brute_force_graph(s.positions, s.cell.lattice, s.cell.pbc, cutoff, max_neighbors, reach)


def graph_tuples(g):
    return [(int(d), float(r), int(s), tuple(int(v) for v in n))
            for s, d, n, r in zip(g.src, g.dst, g.shift, g.distance)]


def random_test_system(rng, periodic):
    n = int(rng.integers(1, 31))
    if not periodic:
        return random_system(rng, n, box=float(rng.uniform(3.0, 12.0)))
    box = float(rng.uniform(4.0, 12.0))
    lattice = box * np.eye(3) + rng.uniform(-1.0, 1.0, (3, 3)) * (1 - np.eye(3))
    pbc = [(True, True, True), (True, True, False), (False, True, True)][int(rng.integers(0, 3))]
    frac = rng.uniform(-0.2, 1.2, (n, 3))  # some atoms start outside the home cell
    return AtomicSystem(frac @ lattice, rng.choice([1, 6, 8, 29], n), cell=PeriodicCell(lattice, pbc))


class TestExamples:
    def test_two_atoms_short_cutoff(self):
        s = AtomicSystem([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]], [1, 1])
        assert build_radius_graph(s, cutoff=1.0).edge_count == 0

    def test_two_atoms_no_cell(self):
        s = AtomicSystem([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]], [1, 1])
        g = build_radius_graph(s, cutoff=6.0)
        assert g.edge_count == 2
        np.testing.assert_array_equal(g.distance, [2.0, 2.0])
        assert sorted(zip(g.src.tolist(), g.dst.tolist())) == [(0, 1), (1, 0)]
        np.testing.assert_array_equal(g.displacement[g.dst == 1][0], [2.0, 0.0, 0.0])

    def test_single_atom_sees_its_images(self):
        s = AtomicSystem([[0.5, 0.5, 0.5]], [1], cell=PeriodicCell(np.eye(3) * 3.0, (True, True, True)))
        g = build_radius_graph(s, cutoff=3.0, max_neighbors=None)
        assert g.edge_count == 6
        np.testing.assert_allclose(g.distance, 3.0)

    def test_csv_and_json_exports(self):
        s = AtomicSystem([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]], [1, 1])
        g = build_radius_graph(s)
        lines = g.to_csv().splitlines()
        assert lines[0] == "src,dst,dx,dy,dz,dist"
        assert len(lines) == 3
        d = json.loads(g.to_json())
        assert len(d["edges"]) == 2 and d["cutoff"] == 6.0

    def test_invalid_arguments(self):
        s = random_system(0, 4)
        with pytest.raises(InputError):
            build_radius_graph(s, cutoff=0.0)
        with pytest.raises(InputError):
            build_radius_graph(s, max_neighbors=0)

    def test_cutoff_exceeds_cell_without_image_search(self):
        s = random_system(0, 5, box=5.0, periodic=True)
        with pytest.raises(CutoffExceedsCell):
            build_radius_graph(s, cutoff=6.0, image_search=False)
        assert build_radius_graph(s, cutoff=2.0, image_search=False).edge_count >= 0

    def test_multi_shell_reach(self):
        s = random_system(0, 3, box=4.0, periodic=True)
        np.testing.assert_array_equal(image_range(s, 10.0), [3, 3, 3])


class TestAgainstBruteForce:
    def test_periodic_20_atoms_default_knobs(self):
        rng = np.random.default_rng(100)
        for _ in range(200):
            s = random_system(rng, 20, periodic=True, cell_jitter=1.0)
            g = build_radius_graph(s, cutoff=6.0, max_neighbors=40)
            assert graph_tuples(g) == oracle_for(s, 6.0, 40)

    @pytest.mark.parametrize("cutoff", [1.0, 6.0, 10.0])
    @pytest.mark.parametrize("max_neighbors", [10, 40, None])
    def test_mixed_systems(self, cutoff, max_neighbors):
        rng = np.random.default_rng(int(cutoff * 100) + (max_neighbors or 0))
        for i in range(12):
            s = random_test_system(rng, periodic=bool(i % 2))
            g = build_radius_graph(s, cutoff=cutoff, max_neighbors=max_neighbors)
            assert graph_tuples(g) == oracle_for(s, cutoff, max_neighbors)

    def test_displacement_convention(self):
        rng = np.random.default_rng(101)
        s = random_test_system(rng, periodic=True)
        g = build_radius_graph(s, cutoff=6.0, max_neighbors=None)
        lat = s.cell.lattice
        expected = s.positions[g.dst] - (s.positions[g.src] + g.shift @ lat)
        np.testing.assert_allclose(g.displacement, expected, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(g.displacement, axis=1), g.distance, atol=1e-12)


def edge_multiset(g, decimals=8):
    return sorted(zip(g.src.tolist(), g.dst.tolist(), np.round(g.distance, decimals).tolist()))


class TestInvariants:
    def test_rigid_transform_nonperiodic(self):
        rng = np.random.default_rng(200)
        for _ in range(20):
            s = random_system(rng, 25)
            g = random_euclidean(rng)
            a = build_radius_graph(s, 6.0, None)
            b = build_radius_graph(s.transformed(g), 6.0, None)
            ka = sorted(zip(a.src.tolist(), a.dst.tolist()))
            kb = sorted(zip(b.src.tolist(), b.dst.tolist()))
            assert ka == kb
            da = dict(zip(zip(a.src.tolist(), a.dst.tolist()), a.distance))
            for (i, j), r in zip(zip(b.src.tolist(), b.dst.tolist()), b.distance):
                assert abs(da[(i, j)] - r) < 1e-9

    def test_rigid_transform_periodic(self):
        rng = np.random.default_rng(201)
        for _ in range(10):
            s = random_system(rng, 15, periodic=True, box=8.0)
            g = random_euclidean(rng)
            a = build_radius_graph(s, 6.0, None)
            b = build_radius_graph(s.transformed(g), 6.0, None)
            assert a.edge_count == b.edge_count
            np.testing.assert_allclose(np.sort(a.distance), np.sort(b.distance), atol=1e-9)

    def test_lattice_translation(self):
        rng = np.random.default_rng(202)
        for _ in range(20):
            s = random_system(rng, 15, periodic=True, cell_jitter=1.0)
            n = rng.integers(-2, 3, 3)
            moved = s.with_positions(s.positions + n @ s.cell.lattice)
            a = build_radius_graph(s, 6.0, None)
            b = build_radius_graph(moved, 6.0, None)
            np.testing.assert_array_equal(a.src, b.src)
            np.testing.assert_array_equal(a.dst, b.dst)
            np.testing.assert_allclose(a.distance, b.distance, atol=1e-9)

    def test_monotone_in_cutoff(self):
        rng = np.random.default_rng(203)
        for _ in range(10):
            s = random_test_system(rng, periodic=True)
            prev = set()
            for cutoff in (1.0, 2.5, 4.0, 6.0, 8.0):
                keys = set(build_radius_graph(s, cutoff, None).edge_keys())
                assert prev <= keys
                prev = keys

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 15), st.floats(1.0, 8.0))
    def test_degree_cap(self, seed, k, cutoff):
        s = random_system(seed, 25, periodic=True, box=7.0)
        g = build_radius_graph(s, cutoff, k)
        assert np.all(g.in_degree() <= k)
        full = build_radius_graph(s, cutoff, None)
        np.testing.assert_array_equal(g.in_degree(), np.minimum(full.in_degree(), k))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.5, 9.0))
    def test_edges_come_in_pairs(self, seed, cutoff):
        # without a cap, j->i under shift n pairs with i->j under -n at the same distance
        s = random_system(seed, 12, periodic=True, box=6.0)
        g = build_radius_graph(s, cutoff, None)
        keys = set(g.edge_keys())
        for src, dst, n in keys:
            assert (dst, src, tuple(-v for v in n)) in keys


class TestRewire:
    def test_mixed_tags(self):
        s = AtomicSystem(np.arange(9.0).reshape(3, 3), [29, 29, 8], tags=[0, 1, 2])
        out, index_map = rewire_remove_tag0(s)
        assert out.n_atoms == 2
        np.testing.assert_array_equal(out.positions, s.positions[1:])
        np.testing.assert_array_equal(index_map, [1, 2])

    def test_all_tag2_unchanged(self):
        s = random_system(3, 6)
        out, index_map = rewire_remove_tag0(s)
        assert out is s
        np.testing.assert_array_equal(index_map, np.arange(6))

    def test_all_removed(self):
        s = AtomicSystem(np.zeros((2, 3)), [1, 1], tags=[0, 0])
        with pytest.raises(AllAtomsRemoved):
            rewire_remove_tag0(s)

    def test_random_matches_direct_filter(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            s = random_system(rng, 30, periodic=True, tags=True)
            if np.all(s.tags == 0):
                continue
            out, index_map = rewire_remove_tag0(s)
            mask = s.tags != 0
            np.testing.assert_array_equal(out.positions, s.positions[mask])
            np.testing.assert_array_equal(out.atomic_numbers, s.atomic_numbers[mask])
            assert np.all(out.tags != 0)
            np.testing.assert_array_equal(s.positions[index_map], out.positions)
