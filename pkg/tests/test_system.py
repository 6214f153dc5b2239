import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geocano.errors import InputError, ParseError, ShapeMismatch, SingularCell
from geocano.geometry import random_euclidean
from geocano.system import (
    ATOMIC_NUMBERS,
    ELEMENTS,
    AtomicSystem,
    PeriodicCell,
    centroid,
    number_to_symbol,
    random_system,
    read_extxyz,
    save_extxyz,
    symbol_to_number,
    write_extxyz,
)

H2 = """2
comment line without keys
H 0.0 0.0 0.0
H 0.0 0.0 0.74
"""

PERIODIC = """3
Lattice="5.0 0.0 0.0 0.0 6.0 0.0 0.0 0.0 7.0" pbc="T T T" Properties=species:S:1:pos:R:3:tags:I:1 id=slab-1 energy=-1.5
Cu 0.0 0.0 0.0 0
Cu 2.5 3.0 0.0 1
O 1.0 1.0 2.0 2
"""


def assert_same(a: AtomicSystem, b: AtomicSystem):
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.atomic_numbers, b.atomic_numbers)
    np.testing.assert_array_equal(a.tags, b.tags)
    assert (a.cell is None) == (b.cell is None)
    if a.cell is not None:
        np.testing.assert_array_equal(a.cell.lattice, b.cell.lattice)
        assert tuple(a.cell.pbc) == tuple(b.cell.pbc)
    assert a.id == b.id
    assert a.info == b.info
    assert a.arrays.keys() == b.arrays.keys()
    for key in a.arrays:
        np.testing.assert_array_equal(a.arrays[key], b.arrays[key])


class TestCentroid:
    def test_single_atom(self):
        s = AtomicSystem([[1.0, 2.0, 3.0]], [1])
        np.testing.assert_array_equal(centroid(s), [1.0, 2.0, 3.0])

    def test_two_atoms(self):
        s = AtomicSystem([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]], [1, 1])
        np.testing.assert_array_equal(centroid(s), [1.0, 0.0, 0.0])

    def test_matches_naive_accumulation(self):
        rng = np.random.default_rng(0)
        s = random_system(rng, 50)
        acc = [0.0, 0.0, 0.0]
        for row in s.positions.tolist():
            for c in range(3):
                acc[c] += row[c]
        np.testing.assert_allclose(centroid(s), np.array(acc) / 50, rtol=0, atol=1e-12)

    def test_equivariant(self):
        rng = np.random.default_rng(1)
        s = random_system(rng, 30)
        g = random_euclidean(rng)
        np.testing.assert_allclose(centroid(s.transformed(g)), g.apply(centroid(s)[None])[0], atol=1e-12)


class TestAtomicSystem:
    def test_default_tags(self):
        s = AtomicSystem(np.zeros((3, 3)), [1, 6, 8])
        np.testing.assert_array_equal(s.tags, [2, 2, 2])

    def test_arrays_read_only(self):
        s = AtomicSystem(np.zeros((2, 3)), [1, 1])
        with pytest.raises(ValueError):
            s.positions[0, 0] = 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            AtomicSystem(np.zeros((2, 3)), [1])

    def test_bad_atomic_number(self):
        with pytest.raises(InputError):
            AtomicSystem(np.zeros((1, 3)), [119])

    def test_bad_tag(self):
        with pytest.raises(InputError):
            AtomicSystem(np.zeros((1, 3)), [1], tags=[3])

    def test_nonfinite_positions(self):
        with pytest.raises(InputError):
            AtomicSystem([[np.nan, 0.0, 0.0]], [1])

    def test_singular_cell(self):
        with pytest.raises(SingularCell):
            PeriodicCell(np.diag([1.0, 1.0, 0.0]), (True, True, True))

    def test_left_handed_cell_accepted(self):
        cell = PeriodicCell(np.diag([1.0, 1.0, -1.0]), (True, True, True))
        assert cell.volume == pytest.approx(1.0)

    def test_perpendicular_widths_of_box(self):
        cell = PeriodicCell(np.diag([2.0, 3.0, 4.0]), (True, True, True))
        np.testing.assert_allclose(cell.perpendicular_widths(), [2.0, 3.0, 4.0])

    def test_subset(self):
        s = random_system(2, 5, tags=True)
        sub = s.subset([0, 3])
        np.testing.assert_array_equal(sub.positions, s.positions[[0, 3]])
        np.testing.assert_array_equal(sub.tags, s.tags[[0, 3]])


class TestElements:
    def test_table_size(self):
        assert len(ELEMENTS) == 118
        assert len(set(ELEMENTS)) == 118

    def test_bijection(self):
        for z in range(1, 119):
            assert symbol_to_number(number_to_symbol(z)) == z
        for sym, z in ATOMIC_NUMBERS.items():
            assert number_to_symbol(z) == sym

    def test_known_values(self):
        assert symbol_to_number("H") == 1
        assert symbol_to_number("Cu") == 29
        assert symbol_to_number("og") == 118

    def test_unknown(self):
        with pytest.raises(KeyError):
            symbol_to_number("Xx")


class TestReadExtxyz:
    def test_h2_without_lattice(self):
        (s,) = read_extxyz(H2)
        assert s.cell is None
        np.testing.assert_array_equal(s.atomic_numbers, [1, 1])
        np.testing.assert_array_equal(s.positions[1], [0.0, 0.0, 0.74])

    def test_periodic_frame(self):
        (s,) = read_extxyz(PERIODIC)
        assert s.cell is not None
        assert all(s.cell.pbc)
        np.testing.assert_array_equal(s.cell.lattice, np.diag([5.0, 6.0, 7.0]))
        np.testing.assert_array_equal(s.tags, [0, 1, 2])
        assert s.id == "slab-1"
        assert s.info == {"energy": "-1.5"}

    def test_multiple_frames(self):
        systems = read_extxyz(H2 + PERIODIC + "\n")
        assert [x.n_atoms for x in systems] == [2, 3]

    def test_sources(self, tmp_path):
        path = tmp_path / "h2.xyz"
        path.write_text(H2)
        for src in (str(path), path, H2.encode(), io.StringIO(H2), io.BytesIO(H2.encode())):
            (s,) = read_extxyz(src)
            assert s.n_atoms == 2

    def test_partial_pbc(self):
        text = PERIODIC.replace('pbc="T T T"', 'pbc="T T F"')
        (s,) = read_extxyz(text)
        assert tuple(s.cell.pbc) == (True, True, False)

    @pytest.mark.parametrize(
        "text, line",
        [
            ("x\ncomment\n", 1),
            ("2\ncomment\nH 0 0 0\n", 1),
            ("1\ncomment\nH 0 0\n", 3),
            ("1\ncomment\nQq 0 0 0\n", 3),
            ("1\ncomment\nH 0 zero 0\n", 3),
            ('1\nLattice="1 0 0 0 1 0 0 0"\nH 0 0 0\n', 2),
            ('1\nLattice="1 0 0 0 1 0 0 0 0"\nH 0 0 0\n', 2),
            ('1\nLattice="1 0 0 0 1 0 0 0 1" pbc="T X T"\nH 0 0 0\n', 2),
            ("1\nProperties=species:S:1:pos:Q:3\nH 0 0 0\n", 2),
            ("1\nok\nH 0 0 0\n0\nbad\n", 4),
        ],
    )
    def test_parse_errors_carry_line(self, text, line):
        with pytest.raises(ParseError) as info:
            read_extxyz(text)
        assert info.value.line == line

    def test_extra_columns(self):
        text = "2\nProperties=species:S:1:pos:R:3:forces:R:3:fixed:L:1\n" \
               "H 0 0 0 1 2 3 T\nO 1 1 1 4 5 6 F\n"
        (s,) = read_extxyz(text)
        np.testing.assert_array_equal(s.arrays["forces"], [[1, 2, 3], [4, 5, 6]])
        np.testing.assert_array_equal(s.arrays["fixed"], [True, False])


class TestWriteExtxyz:
    def test_empty_list(self):
        assert write_extxyz([]) == b""

    def test_count_line(self):
        s = random_system(3, 7)
        assert write_extxyz([s]).decode().splitlines()[0] == "7"

    def test_tags_omitted_when_default(self):
        s = random_system(4, 3)
        assert b"tags" not in write_extxyz([s])

    def test_roundtrip_100_random(self):
        rng = np.random.default_rng(5)
        systems = []
        for i in range(100):
            s = random_system(rng, int(rng.integers(1, 40)), periodic=bool(i % 2), tags=bool(i % 3),
                              cell_jitter=0.5 * (i % 4 == 1))
            # scale to exercise exponents and many digits
            s = s.with_positions(s.positions * rng.uniform(0.1, 100.0) - 17.0)
            systems.append(s)
        once = read_extxyz(write_extxyz(systems))
        twice = read_extxyz(write_extxyz(once))
        assert len(once) == len(twice) == 100
        for a, b, orig in zip(once, twice, systems):
            assert_same(a, b)
            np.testing.assert_array_equal(a.positions, orig.positions)

    def test_roundtrip_preserves_metadata(self, tmp_path):
        (s,) = read_extxyz(PERIODIC)
        s = AtomicSystem(s.positions, s.atomic_numbers, s.tags, s.cell, "a b", {"note": "two words"},
                         {"q": np.array([0.5, -0.25, 1.0])})
        path = tmp_path / "out.xyz"
        save_extxyz(path, [s])
        (back,) = read_extxyz(path)
        assert_same(s, back)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.tuples(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False),
                           st.floats(-1e6, 1e6, allow_nan=False)), min_size=1, max_size=12),
        st.integers(1, 118),
    )
    def test_property_roundtrip(self, coords, z):
        s = AtomicSystem(np.array(coords), [z] * len(coords))
        (back,) = read_extxyz(write_extxyz([s]))
        assert_same(s, back)
