"""Command-line entry point: ``geocano <subcommand> ...``.

Every subcommand prints one JSON summary line on stdout.  Exit codes: 0 ok,
1 bad input, 2 numerical degeneracy, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audit import (Wrapper, measure_symmetry, reference_invariant_predictor, reference_raw_predictor,
                    reports_to_csv, canonical_frame, wrap)
from .errors import InputError, NumericalDegeneracy
from .ewald import long_range_messages, make_basis
from .frames import FrameMode, canonical_system, pca_frames
from .graph import build_radius_graph, rewire_remove_tag0
from .noisy_nodes import AuxWeightSchedule, cosine_similarity_matrix, mad, noisy_transform
from .signnet import SignNetSpec
from .system import AtomicSystem, read_extxyz, save_extxyz
from .vn import VNCanonNet

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(message)


def _max_neighbors(text: str):
    if text.lower() in ("none", "unlimited"):
        return None
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("max neighbors must be positive (or 'none')")
    return value


def _derived(path: str, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("GEO_SEED", "0"))


def _summary(command: str, **fields) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, **fields}


def _frame_info(frame, source_index, frame_index=None) -> dict:
    info = {"source": source_index,
            "rotation": " ".join(repr(float(v)) for v in frame.rotation.reshape(-1)),
            "translation": " ".join(repr(float(v)) for v in frame.translation)}
    if frame_index is not None:
        info["frame"] = frame_index
    return info


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------- commands


def cmd_build_graph(args) -> dict:
    systems = read_extxyz(args.input)
    if not 0 <= args.frame < len(systems):
        raise InputError(f"frame {args.frame} not in file with {len(systems)} frames")
    g = build_radius_graph(systems[args.frame], args.cutoff, args.max_neighbors, not args.no_image_search)
    out = Path(args.output) if args.output else _derived(args.input, f".edges.{args.format}")
    out.write_text(g.to_csv() if args.format == "csv" else g.to_json(), encoding="utf-8")
    return _summary("build-graph", output=str(out), nodes=g.node_count, edges=g.edge_count,
                    cutoff=args.cutoff, max_neighbors=args.max_neighbors,
                    max_in_degree=int(g.in_degree().max(initial=0)))


def cmd_rewire(args) -> dict:
    systems = read_extxyz(args.input)
    rewired = [rewire_remove_tag0(s)[0] for s in systems]
    out = Path(args.output) if args.output else _derived(args.input, ".rewired.xyz")
    save_extxyz(out, rewired)
    return _summary("rewire", output=str(out), frames=len(systems),
                    atoms_before=sum(s.n_atoms for s in systems), atoms_after=sum(s.n_atoms for s in rewired))


def _canon_wrapper(args, seed) -> Wrapper:
    signnet = vn = None
    if args.wrapper == "sfa-signnet":
        signnet = SignNetSpec.from_dict(_load_json(args.signnet_spec)) if args.signnet_spec else SignNetSpec(args.parametrization)
    if args.wrapper == "vn":
        vn = VNCanonNet.from_dict(_load_json(args.vn_spec)) if args.vn_spec else VNCanonNet(seed, args.hidden_layers)
    return Wrapper(args.wrapper, seed, args.mode, signnet, vn)


def cmd_canonicalize(args) -> dict:
    seed = _seed(args)
    systems = read_extxyz(args.input)
    wrapper = _canon_wrapper(args, seed)
    out_systems = []
    for i, s in enumerate(systems):
        if wrapper.kind.value == "fa":
            for j, frame in enumerate(pca_frames(s, wrapper.frame_mode).frames):
                c = canonical_system(s, frame)
                out_systems.append(AtomicSystem(c.positions, c.atomic_numbers, c.tags, c.cell, c.id,
                                                {**s.info, **_frame_info(frame, i, j)}))
        else:
            frame = canonical_frame(s, Wrapper(wrapper.kind, seed + i, wrapper.frame_mode, wrapper.signnet, wrapper.vn))
            c = canonical_system(s, frame)
            out_systems.append(AtomicSystem(c.positions, c.atomic_numbers, c.tags, c.cell, c.id,
                                            {**s.info, **_frame_info(frame, i)}))
    out = Path(args.output) if args.output else _derived(args.input, f".{args.wrapper}.xyz")
    save_extxyz(out, out_systems)
    return _summary("canonicalize", output=str(out), wrapper=wrapper.describe(), frames_in=len(systems),
                    frames_out=len(out_systems), seed=seed)


def _read_channels(path, n):
    if path is None:
        return np.ones((n, 1))
    data = _load_json(path)
    if isinstance(data, dict):
        data = data.get("h", data.get("channels"))
    h = np.asarray(data, dtype=np.float64)
    if h.ndim == 1:
        h = h[:, None]
    return h


def cmd_ewald(args) -> dict:
    systems = read_extxyz(args.input)
    s = systems[args.frame]
    if s.cell is None:
        raise InputError("ewald needs a periodic system (Lattice=... in the comment line)")
    h = _read_channels(args.channels, s.n_atoms)
    basis = make_basis(s.cell, args.k_cutoff, args.profile)
    msgs, residual = long_range_messages(s, h, basis, return_residual=True)
    out = Path(args.output) if args.output else _derived(args.input, ".ewald.csv")
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["atom"] + [f"m{c}" for c in range(msgs.shape[1])])
        for i, row in enumerate(msgs):
            w.writerow([i] + [repr(float(v)) for v in row])
    return _summary("ewald", output=str(out), atoms=s.n_atoms, channels=int(msgs.shape[1]),
                    kvectors=len(basis), k_cutoff=args.k_cutoff, profile=args.profile,
                    imaginary_residual=residual)


def cmd_noisy_nodes(args) -> dict:
    seed = _seed(args)
    inits, rels = read_extxyz(args.initial), read_extxyz(args.relaxed)
    if len(inits) != len(rels):
        raise InputError(f"{len(inits)} initial frames but {len(rels)} relaxed frames")
    schedule = AuxWeightSchedule(args.total_steps, args.aux_start, args.aux_end)
    out_systems, meta = [], []
    for i, (a, b) in enumerate(zip(inits, rels)):
        if a.n_atoms != b.n_atoms or not np.array_equal(a.atomic_numbers, b.atomic_numbers):
            raise InputError(f"frame {i}: initial and relaxed structures differ in composition")
        sample = noisy_transform(a.positions, b.positions, args.sigma, np.random.default_rng(seed ^ i), args.formula)
        out_systems.append(AtomicSystem(sample.x_tilde, a.atomic_numbers, a.tags, a.cell, a.id,
                                        {"gamma": repr(sample.gamma), "branch": sample.branch.value},
                                        {"delta_pos": sample.delta_pos, "noise": sample.noise_draw}))
        meta.append({"index": i, **sample.metadata(), "aux_weight": schedule(i)})
    out = Path(args.output) if args.output else _derived(args.initial, ".noisy.xyz")
    save_extxyz(out, out_systems)
    meta_path = Path(args.metadata) if args.metadata else out.with_suffix(".json")
    meta_path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, "sigma": args.sigma,
                                     "formula": args.formula, "seed": seed,
                                     "schedule": {"start": args.aux_start, "end": args.aux_end,
                                                  "total_steps": args.total_steps},
                                     "samples": meta}, indent=2), encoding="utf-8")
    return _summary("noisy-nodes", output=str(out), metadata=str(meta_path), frames=len(out_systems),
                    interpolated=sum(m["branch"] == "interpolated" for m in meta), seed=seed)


def _read_matrix(path) -> np.ndarray:
    p = Path(path)
    if p.suffix == ".npy":
        return np.load(p)
    if p.suffix == ".json":
        return np.asarray(_load_json(p), dtype=np.float64)
    try:
        return np.loadtxt(p, delimiter=",", ndmin=2)
    except ValueError:
        return np.loadtxt(p, delimiter=",", ndmin=2, skiprows=1)


def cmd_mad(args) -> dict:
    e = _read_matrix(args.input)
    value = mad(e)
    fields = {"rows": int(e.shape[0]), "dim": int(e.shape[1]), "mad": value}
    if args.similarity:
        np.savetxt(args.similarity, cosine_similarity_matrix(e), delimiter=",", fmt="%.17g")
        fields["similarity"] = args.similarity
    return _summary("mad", **fields)


def _dataset(path) -> list[AtomicSystem]:
    p = Path(path)
    files = sorted(p.glob("*.xyz")) + sorted(p.glob("*.extxyz")) if p.is_dir() else [p]
    systems = [s for f in files for s in read_extxyz(f)]
    if not systems:
        raise InputError(f"no systems found in {path}")
    return systems


def cmd_audit(args) -> dict:
    seed = _seed(args)
    data = _dataset(args.data)
    if args.max_systems:
        data = data[: args.max_systems]
    make = reference_raw_predictor if args.predictor == "raw" else reference_invariant_predictor
    base = make(seed)
    wrapper = _canon_wrapper(args, seed)
    report = measure_symmetry(wrap(base, wrapper), data, args.transforms, seed)
    out = Path(args.output) if args.output else Path(f"audit-{args.wrapper}.json")
    out.write_text(report.to_json(), encoding="utf-8")
    csv_path = Path(args.csv) if args.csv else out.with_suffix(".csv")
    csv_path.write_text(reports_to_csv([report]), encoding="utf-8")
    return _summary("audit", output=str(out), csv=str(csv_path), **{
        k: v for k, v in report.to_dict().items() if k not in ("schema_version", "wrapper")})


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geocano", description="Geometric preprocessing and symmetry audits for atomic systems.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("build-graph", help="radius graph as CSV/JSON edge list")
    g.add_argument("input")
    g.add_argument("--cutoff", type=float, default=6.0)
    g.add_argument("--max-neighbors", type=_max_neighbors, default=40)
    g.add_argument("--frame", type=int, default=0)
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--no-image-search", action="store_true",
                   help="refuse cutoffs beyond half the cell width instead of searching more images")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_build_graph)

    r = sub.add_parser("rewire", help="remove tag-0 (subsurface) atoms")
    r.add_argument("input")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_rewire)

    def canon_flags(q, default_mode, wrappers):
        q.add_argument("--mode", choices=[m.value for m in FrameMode], default=default_mode)
        q.add_argument("--wrapper", choices=wrappers, default="fa")
        q.add_argument("--parametrization", choices=("mlp", "vn"), default="vn", help="SignNet networks")
        q.add_argument("--signnet-spec", help="JSON SignNet spec")
        q.add_argument("--vn-spec", help="JSON VN canonicalizer spec")
        q.add_argument("--hidden-layers", type=int, choices=(0, 1, 2), default=1)
        q.add_argument("--seed", type=int)

    c = sub.add_parser("canonicalize", help="project systems into canonical frames")
    c.add_argument("input")
    canon_flags(c, "se3", ("fa", "sfa", "sfa-signnet", "vn"))
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_canonicalize)

    e = sub.add_parser("ewald", help="reciprocal-space long-range messages")
    e.add_argument("input")
    e.add_argument("--channels", help="JSON per-atom channels (list of rows or {'h': rows}); default all ones")
    e.add_argument("--k-cutoff", type=float, default=4.0)
    e.add_argument("--profile", default="gaussian:2.0", help="gaussian:SIGMA or coulomb:BETA")
    e.add_argument("--frame", type=int, default=0)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_ewald)

    n = sub.add_parser("noisy-nodes", help="noised inputs and denoising targets")
    n.add_argument("initial")
    n.add_argument("relaxed")
    n.add_argument("--sigma", type=float, default=0.3)
    n.add_argument("--formula", choices=("anchored", "literal"), default="anchored")
    n.add_argument("--aux-start", type=float, default=15.0)
    n.add_argument("--aux-end", type=float, default=1.0)
    n.add_argument("--total-steps", type=int, default=100)
    n.add_argument("--seed", type=int)
    n.add_argument("--metadata")
    n.add_argument("-o", "--output")
    n.set_defaults(func=cmd_noisy_nodes)

    m = sub.add_parser("mad", help="mean average cosine distance of an embedding matrix")
    m.add_argument("input", help=".csv, .npy or .json matrix")
    m.add_argument("--similarity", help="write the cosine-similarity matrix here (CSV)")
    m.set_defaults(func=cmd_mad)

    a = sub.add_parser("audit", help="rotation/reflection invariance report")
    a.add_argument("data", help="extended-XYZ file or directory of them")
    canon_flags(a, "e3", ("none", "fa", "sfa", "sfa-signnet", "vn"))
    a.add_argument("--predictor", choices=("raw", "invariant"), default="raw")
    a.add_argument("--transforms", type=int, default=10)
    a.add_argument("--max-systems", type=int)
    a.add_argument("--csv")
    a.add_argument("-o", "--output")
    a.set_defaults(func=cmd_audit)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.error("a subcommand is required")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        summary = args.func(args)
    except NumericalDegeneracy as exc:
        print(json.dumps(_summary(args.command, error=type(exc).__name__, message=str(exc))))
        return EXIT_DEGENERATE
    except (InputError, OSError, ValueError, IndexError) as exc:
        print(json.dumps(_summary(args.command, error=type(exc).__name__, message=str(exc))))
        return EXIT_INPUT
    print(json.dumps(summary))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
