"""Atomic systems and extended-XYZ serialization."""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .errors import InputError, ParseError, ShapeMismatch, SingularCell
from .geometry import RigidTransform

# fmt: off
ELEMENTS = (
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar",
    "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe",
    "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu",
    "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn",
    "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr",
    "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
)
# fmt: on
ATOMIC_NUMBERS = {sym: z for z, sym in enumerate(ELEMENTS, start=1)}

DEFAULT_TAG = 2
MIN_CELL_VOLUME = 1e-6


def symbol_to_number(symbol: str) -> int:
    try:
        return ATOMIC_NUMBERS[symbol]
    except KeyError:
        # tolerate upper/lower-case variants such as "FE" or "fe"
        norm = symbol[:1].upper() + symbol[1:].lower()
        if norm in ATOMIC_NUMBERS:
            return ATOMIC_NUMBERS[norm]
        raise


def number_to_symbol(z: int) -> str:
    return ELEMENTS[int(z) - 1]


@dataclass(frozen=True)
class PeriodicCell:
    """Lattice vectors as rows (Å) and per-axis periodicity flags."""

    lattice: np.ndarray
    pbc: tuple = (True, True, True)

    def __post_init__(self):
        lattice = np.asarray(self.lattice, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "pbc", tuple(bool(p) for p in self.pbc))
        if any(self.pbc) and not abs(np.linalg.det(lattice)) > MIN_CELL_VOLUME:
            raise SingularCell(f"cell volume {np.linalg.det(lattice):.3g} Å^3 is (nearly) zero")

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.lattice)))

    def perpendicular_widths(self) -> np.ndarray:
        """Distance between opposite faces of the cell along each axis."""
        v = self.lattice
        areas = np.array([
            np.linalg.norm(np.cross(v[1], v[2])),
            np.linalg.norm(np.cross(v[2], v[0])),
            np.linalg.norm(np.cross(v[0], v[1])),
        ])
        return self.volume / areas

    def transformed(self, g: RigidTransform) -> "PeriodicCell":
        return PeriodicCell(g.rotate(self.lattice), self.pbc)


@dataclass(frozen=True, eq=False)
class AtomicSystem:
    positions: np.ndarray
    atomic_numbers: np.ndarray
    tags: np.ndarray | None = None
    cell: PeriodicCell | None = None
    id: str | None = None
    info: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        z = np.array(self.atomic_numbers, dtype=np.int64).reshape(-1)
        n = len(pos)
        if n < 1:
            raise InputError("a system needs at least one atom")
        if len(z) != n:
            raise ShapeMismatch(f"{n} positions but {len(z)} atomic numbers")
        if not np.all(np.isfinite(pos)):
            raise InputError("positions must be finite")
        if np.any(z < 1) or np.any(z > len(ELEMENTS)):
            raise InputError("atomic numbers must lie in 1..118")
        tags = np.full(n, DEFAULT_TAG, dtype=np.int64) if self.tags is None else np.array(self.tags, dtype=np.int64).reshape(-1)
        if len(tags) != n:
            raise ShapeMismatch(f"{n} atoms but {len(tags)} tags")
        if not np.all(np.isin(tags, (0, 1, 2))):
            raise InputError("tags must be 0, 1 or 2")
        arrays = {}
        for key, value in self.arrays.items():
            value = np.asarray(value)
            if len(value) != n:
                raise ShapeMismatch(f"per-atom array {key!r} has {len(value)} rows for {n} atoms")
            arrays[key] = value
        for name, value in (("positions", pos), ("atomic_numbers", z), ("tags", tags)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "arrays", arrays)
        object.__setattr__(self, "info", dict(self.info))

    def __len__(self):
        return len(self.positions)

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def symbols(self) -> list[str]:
        return [number_to_symbol(z) for z in self.atomic_numbers]

    @property
    def is_periodic(self) -> bool:
        return self.cell is not None and any(self.cell.pbc)

    def with_positions(self, positions, cell=None, keep_cell=True) -> "AtomicSystem":
        new_cell = cell if cell is not None else (self.cell if keep_cell else None)
        return replace(self, positions=positions, cell=new_cell)

    def transformed(self, g: RigidTransform) -> "AtomicSystem":
        """Apply a rigid motion to positions (and the cell's lattice vectors)."""
        cell = None if self.cell is None else self.cell.transformed(g)
        return replace(self, positions=g.apply(self.positions), cell=cell)

    def subset(self, index) -> "AtomicSystem":
        index = np.asarray(index)
        arrays = {k: v[index] for k, v in self.arrays.items()}
        return replace(self, positions=self.positions[index], atomic_numbers=self.atomic_numbers[index],
                       tags=self.tags[index], arrays=arrays)


def centroid(s: AtomicSystem) -> np.ndarray:
    return s.positions.mean(axis=0)


def random_system(rng, n_atoms: int = 20, box: float = 10.0, periodic: bool = False,
                  elements=(1, 6, 7, 8, 29), tags: bool = False, cell_jitter: float = 0.0) -> AtomicSystem:
    """A random system for tests and demos.

    With ``periodic=True`` the cell is ``box`` times the identity, optionally
    sheared by up to ``cell_jitter`` Å per off-diagonal entry.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    pos = rng.uniform(0.0, box, size=(n_atoms, 3))
    z = rng.choice(np.asarray(elements), size=n_atoms)
    t = rng.integers(0, 3, size=n_atoms) if tags else None
    cell = None
    if periodic:
        lattice = box * np.eye(3)
        if cell_jitter:
            lattice = lattice + rng.uniform(-cell_jitter, cell_jitter, (3, 3)) * (1 - np.eye(3))
        cell = PeriodicCell(lattice, (True, True, True))
    return AtomicSystem(pos, z, t, cell)


# ---------------------------------------------------------------- extended XYZ

_KEY_VALUE = re.compile(r'([A-Za-z_][A-Za-z0-9_\-]*)\s*=\s*("([^"]*)"|\{([^}]*)\}|(\S+))')
_FLOAT_FMT = "{:.17g}"


def _parse_comment(line: str) -> dict:
    out = {}
    for m in _KEY_VALUE.finditer(line):
        key = m.group(1)
        value = next(g for g in (m.group(3), m.group(4), m.group(5)) if g is not None)
        out[key] = value
    return out


def _parse_bool(token: str, lineno: int) -> bool:
    t = token.strip().upper()
    if t in ("T", "TRUE", "1"):
        return True
    if t in ("F", "FALSE", "0"):
        return False
    raise ParseError(f"cannot parse boolean {token!r}", lineno)


def _parse_properties(spec: str, lineno: int):
    parts = spec.split(":")
    if len(parts) % 3:
        raise ParseError(f"malformed Properties declaration {spec!r}", lineno)
    cols = []
    for i in range(0, len(parts), 3):
        name, kind, count = parts[i], parts[i + 1].upper(), parts[i + 2]
        if kind not in ("S", "R", "I", "L") or not count.isdigit() or int(count) < 1:
            raise ParseError(f"malformed Properties entry {name}:{kind}:{count}", lineno)
        cols.append((name, kind, int(count)))
    return cols


_DEFAULT_PROPERTIES = [("species", "S", 1), ("pos", "R", 3)]
_RESERVED = {"Lattice", "pbc", "Properties"}


def _convert(tokens, kind, lineno):
    try:
        if kind == "R":
            return [float(t) for t in tokens]
        if kind == "I":
            return [int(t) for t in tokens]
        if kind == "L":
            return [_parse_bool(t, lineno) for t in tokens]
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None
    return list(tokens)


def _read_frame(lines, start):
    lineno = start + 1
    try:
        n = int(lines[start].strip())
    except ValueError:
        raise ParseError(f"expected an atom count, got {lines[start].strip()!r}", lineno) from None
    if n < 1:
        raise ParseError(f"atom count must be positive, got {n}", lineno)
    if start + 1 >= len(lines):
        raise ParseError("missing comment line", lineno + 1)
    if start + 2 + n > len(lines):
        raise ParseError(f"frame declares {n} atoms but the file ends early", lineno)

    comment_lineno = lineno + 1
    info = _parse_comment(lines[start + 1])
    props = _parse_properties(info["Properties"], comment_lineno) if "Properties" in info else _DEFAULT_PROPERTIES
    width = sum(c for _, _, c in props)

    cell = None
    if "Lattice" in info:
        try:
            values = [float(t) for t in info["Lattice"].split()]
        except ValueError:
            raise ParseError("Lattice must hold 9 numbers", comment_lineno) from None
        if len(values) != 9:
            raise ParseError("Lattice must hold 9 numbers", comment_lineno)
        pbc = (True, True, True)
        if "pbc" in info:
            flags = info["pbc"].split()
            if len(flags) != 3:
                raise ParseError("pbc must hold 3 flags", comment_lineno)
            pbc = tuple(_parse_bool(f, comment_lineno) for f in flags)
        try:
            cell = PeriodicCell(np.array(values).reshape(3, 3), pbc)
        except SingularCell as exc:
            raise ParseError(str(exc), comment_lineno) from None

    columns = {name: [] for name, _, _ in props}
    for k in range(n):
        row_no = start + 2 + k
        tokens = lines[row_no].split()
        if len(tokens) != width:
            raise ParseError(f"expected {width} columns, found {len(tokens)}", row_no + 1)
        offset = 0
        for name, kind, count in props:
            values = _convert(tokens[offset:offset + count], kind, row_no + 1)
            if name in ("species", "symbols"):
                try:
                    values = [symbol_to_number(values[0])]
                except KeyError:
                    raise ParseError(f"unknown element symbol {values[0]!r}", row_no + 1) from None
            columns[name].append(values if count > 1 else values[0])
            offset += count

    if "pos" in columns:
        positions = np.array(columns.pop("pos"), dtype=np.float64)
    elif "positions" in columns:
        positions = np.array(columns.pop("positions"), dtype=np.float64)
    else:
        raise ParseError("frame has no pos column", comment_lineno)
    if "species" in columns:
        numbers = columns.pop("species")
    elif "symbols" in columns:
        numbers = columns.pop("symbols")
    elif "Z" in columns:
        numbers = columns.pop("Z")
    else:
        raise ParseError("frame has no species column", comment_lineno)
    columns.pop("Z", None)
    tags = columns.pop("tags", None)
    extra_info = {k: v for k, v in info.items() if k not in _RESERVED}
    system_id = extra_info.pop("id", None)
    arrays = {k: np.array(v) for k, v in columns.items()}
    try:
        system = AtomicSystem(positions, numbers, tags, cell, system_id, extra_info, arrays)
    except InputError as exc:
        raise ParseError(str(exc), lineno) from None
    return system, start + 2 + n


def read_extxyz(source) -> list[AtomicSystem]:
    """Parse every frame of an extended-XYZ text.

    ``source`` may be a path, ``str``/``bytes`` content, or a file object.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str) and ("\n" in source or source == ""):
        text = source
    elif hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    lines = text.splitlines()
    systems = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        system, i = _read_frame(lines, i)
        systems.append(system)
    return systems


def _fmt(x) -> str:
    return _FLOAT_FMT.format(float(x))


def _info_value(value) -> str:
    s = str(value)
    return f'"{s}"' if (not s or any(c.isspace() for c in s) or "=" in s) else s


def _write_frame(s: AtomicSystem, out: io.StringIO):
    n = s.n_atoms
    props = [("species", "S", 1), ("pos", "R", 3)]
    columns = [[sym] for sym in s.symbols]
    for i, row in enumerate(s.positions):
        columns[i].extend(_fmt(v) for v in row)
    if np.any(s.tags != DEFAULT_TAG):
        props.append(("tags", "I", 1))
        for i, t in enumerate(s.tags):
            columns[i].append(str(int(t)))
    for key, value in s.arrays.items():
        value = np.asarray(value)
        width = 1 if value.ndim == 1 else value.shape[1]
        flat = value.reshape(n, width)
        if value.dtype.kind == "f":
            kind, fmt = "R", _fmt
        elif value.dtype.kind in "iu":
            kind, fmt = "I", lambda v: str(int(v))
        elif value.dtype.kind == "b":
            kind, fmt = "L", lambda v: "T" if v else "F"
        else:
            kind, fmt = "S", str
        props.append((key, kind, width))
        for i in range(n):
            columns[i].extend(fmt(v) for v in flat[i])

    fields = []
    if s.cell is not None:
        fields.append('Lattice="' + " ".join(_fmt(v) for v in s.cell.lattice.reshape(-1)) + '"')
        fields.append('pbc="' + " ".join("T" if p else "F" for p in s.cell.pbc) + '"')
    fields.append("Properties=" + ":".join(f"{a}:{b}:{c}" for a, b, c in props))
    if s.id is not None:
        fields.append(f"id={_info_value(s.id)}")
    for key, value in s.info.items():
        fields.append(f"{key}={_info_value(value)}")
    out.write(f"{n}\n")
    out.write(" ".join(fields) + "\n")
    for row in columns:
        out.write(" ".join(row) + "\n")


def write_extxyz(systems: Iterable[AtomicSystem]) -> bytes:
    """Serialize systems to UTF-8 extended XYZ with 17 significant digits."""
    out = io.StringIO()
    for s in systems:
        _write_frame(s, out)
    return out.getvalue().encode("utf-8")


def save_extxyz(path, systems: Iterable[AtomicSystem]) -> None:
    with open(path, "wb") as fh:
        fh.write(write_extxyz(systems))
