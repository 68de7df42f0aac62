"""Command-line front end: decimate, bench, gradcheck, validate.

Exit codes: 0 ok, 1 check failure, 2 input error, 3 infeasible target.
"""

import argparse
import csv
import glob
import sys
import time
from dataclasses import dataclass

import numpy as np

from .decimate import (
    DecimationConfig,
    decimate_parallel,
    decimate_qem_oracle,
    quality_report,
)
from .errors import InfeasibleTargetError, MeshError, MeshFormatError
from .gradcheck import DEFAULT_TOLERANCE, run_all
from .io import MeshFileStats, load_mesh, save_mesh
from .mesh import (
    compute_facet_geometry,
    connected_component_count,
    duplicate_facet_count,
)
from .synthetic import delaunay_terrain

CSV_COLUMNS = [
    "input_vertices",
    "input_facets",
    "target_vertices",
    "algorithm",
    "wall_ms",
    "mean_quadric_error",
    "seed",
]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_INFEASIBLE = 3


@dataclass
class BenchRecord:
    """One benchmark measurement row."""

    input_vertices: int
    input_facets: int
    target_vertices: int
    algorithm: str
    wall_ms: float
    mean_quadric_error: float
    seed: int

    def row(self) -> list:
        return [
            self.input_vertices,
            self.input_facets,
            self.target_vertices,
            self.algorithm,
            f"{self.wall_ms:.3f}",
            f"{self.mean_quadric_error:.9g}",
            self.seed,
        ]


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_decimate(args) -> int:
    try:
        mesh = load_mesh(args.input, format=args.format)
    except MeshFormatError as exc:
        return _fail(str(exc), EXIT_INPUT_ERROR)
    rounds = args.rounds if args.rounds == "auto" else int(args.rounds)
    try:
        config = DecimationConfig(
            target_vertices=args.target_vertices,
            placement=args.placement,
            shuffle_seed=args.seed,
            rounds=rounds,
        )
        result = decimate_parallel(mesh, config)
    except InfeasibleTargetError as exc:
        return _fail(str(exc), EXIT_INFEASIBLE)
    except (MeshError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT_ERROR)
    save_mesh(result.mesh, args.output, format="auto" if args.format == "auto" else args.format)
    sidecar = args.output + ".clusters.npz"
    np.savez(sidecar, replace=result.replace, mapping=result.mapping)
    report = quality_report(mesh, result)
    print(report.describe())
    print(f"wrote {args.output} and {sidecar}")
    return EXIT_OK


def _bench_meshes(args):
    meshes = []
    for pattern in args.inputs:
        paths = sorted(glob.glob(pattern))
        if not paths:
            print(f"warning: no files match {pattern!r}", file=sys.stderr)
        for p in paths:
            try:
                meshes.append((p, load_mesh(p)))
            except MeshError as exc:
                print(f"warning: skipping {p}: {exc}", file=sys.stderr)
    if args.synthetic:
        for size in args.synthetic:
            meshes.append((f"synthetic:{size}", delaunay_terrain(size, seed=args.seed)))
    return meshes


def _targets_for(mesh, option: str) -> list[int]:
    if option == "half":
        return [-(-mesh.n_vertices // 2)]
    return [int(t) for t in option.split(",")]


def cmd_bench(args) -> int:
    meshes = _bench_meshes(args)
    if not meshes:
        return _fail("no input meshes (give files or --synthetic sizes)", EXIT_INPUT_ERROR)
    algorithms = args.algorithms.split(",")
    for algo in algorithms:
        if algo not in ("parallel", "qem_oracle"):
            return _fail(f"unknown algorithm {algo!r}", EXIT_INPUT_ERROR)

    records: list[BenchRecord] = []
    for name, mesh in meshes:
        for target in _targets_for(mesh, args.targets):
            for algo in algorithms:
                for repeat in range(args.repeats):
                    try:
                        start = time.perf_counter()
                        if algo == "parallel":
                            result = decimate_parallel(
                                mesh,
                                DecimationConfig(
                                    target_vertices=target, shuffle_seed=args.seed
                                ),
                            )
                        else:
                            result = decimate_qem_oracle(mesh, target_vertices=target)
                        wall_ms = (time.perf_counter() - start) * 1000.0
                    except MeshError as exc:
                        print(f"warning: {name} ({algo}, N={target}): {exc}", file=sys.stderr)
                        continue
                    records.append(
                        BenchRecord(
                            input_vertices=mesh.n_vertices,
                            input_facets=mesh.n_facets,
                            target_vertices=target,
                            algorithm=algo,
                            wall_ms=wall_ms,
                            mean_quadric_error=quality_report(mesh, result).mean_quadric_error,
                            seed=args.seed if args.seed is not None else 0,
                        )
                    )
                    print(
                        f"{name}: {algo} N={target} repeat={repeat} "
                        f"{records[-1].wall_ms:.1f} ms"
                    )

    if args.csv:
        with open(args.csv, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for record in records:
                writer.writerow(record.row())
        print(f"wrote {len(records)} rows to {args.csv}")
    _bench_summary(records)
    return EXIT_OK


def _median_by(records, key):
    groups: dict = {}
    for r in records:
        groups.setdefault(key(r), []).append(r.wall_ms)
    return {k: float(np.median(v)) for k, v in groups.items()}


def _bench_summary(records) -> None:
    parallel = [r for r in records if r.algorithm == "parallel"]
    oracle = [r for r in records if r.algorithm == "qem_oracle"]
    if parallel and oracle:
        p = _median_by(parallel, lambda r: (r.input_vertices, r.target_vertices))
        q = _median_by(oracle, lambda r: (r.input_vertices, r.target_vertices))
        shared = sorted(set(p) & set(q))
        if shared:
            speedups = [q[k] / p[k] for k in shared]
            print(f"speedup parallel vs qem_oracle: min {min(speedups):.1f}x, "
                  f"median {float(np.median(speedups)):.1f}x")
    if len({r.input_vertices for r in parallel}) >= 3:
        p = _median_by(parallel, lambda r: r.input_vertices)
        sizes = np.array(sorted(p))
        times = np.array([p[s] for s in sizes])
        r2 = linear_fit_r2(sizes, times)
        print(f"linear fit of parallel wall_ms vs input vertices: R^2 = {r2:.4f}")


def linear_fit_r2(x, y) -> float:
    """Coefficient of determination of the least-squares line through (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = ((y - y.mean()) ** 2).sum()
    if total == 0:
        return 1.0
    return float(1.0 - (residual**2).sum() / total)


def cmd_gradcheck(args) -> int:
    dtype = np.float64 if args.dtype == "float64" else np.float32
    sizes = tuple(int(s) for s in args.sizes.split(","))
    report = run_all(
        seed=args.seed, cases=args.cases, eps=args.eps, dtype=dtype, sizes=sizes
    )
    tolerance = args.tolerance
    failures = 0
    for name, err in report.items():
        status = "ok" if err < tolerance else "FAIL"
        if status == "FAIL":
            failures += 1
        print(f"{name:16s} max relative error {err:.3e}  {status}")
    if failures:
        print(f"{failures} operation(s) exceeded {tolerance:g}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        mesh = load_mesh(args.input, format=args.format)
    except MeshFormatError as exc:
        return _fail(str(exc), EXIT_INPUT_ERROR)
    stats = MeshFileStats.from_mesh(mesh)
    geometry = compute_facet_geometry(mesh)
    print(f"vertices:   {stats.vertex_count}")
    print(f"facets:     {stats.facet_count}")
    print(f"colors:     {'yes' if stats.has_color else 'no'}")
    print(f"bbox min:   {stats.bbox_min}")
    print(f"bbox max:   {stats.bbox_max}")
    print(f"degenerate facets: {int(geometry.degenerate.sum())}")
    print(f"duplicate facets:  {duplicate_facet_count(mesh)}")
    print(f"connected components: {connected_component_count(mesh)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshforge",
        description="Mesh decimation, pooling tensors, and convolution checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decimate", help="decimate a mesh and write cluster tensors")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--target-vertices", type=int, required=True, dest="target_vertices")
    p.add_argument("--rounds", default="auto")
    p.add_argument("--placement", choices=["average", "inverse"], default="average")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=["auto", "obj", "ply"], default="auto")
    p.set_defaults(func=cmd_decimate)

    p = sub.add_parser("bench", help="time decimation runs and write a CSV")
    p.add_argument("inputs", nargs="*", help="mesh files or globs")
    p.add_argument("--synthetic", type=lambda s: [int(v) for v in s.split(",")],
                   default=None, help="comma-separated synthetic vertex counts")
    p.add_argument("--targets", default="half",
                   help="'half' or comma-separated output vertex counts")
    p.add_argument("--algorithms", default="parallel",
                   help="comma-separated subset of parallel,qem_oracle")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gradcheck", help="finite-difference check of all backwards")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--sizes", default="6,9,12")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--dtype", choices=["float64", "float32"], default="float64")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("validate", help="parse a mesh and print structure statistics")
    p.add_argument("input")
    p.add_argument("--format", choices=["auto", "obj", "ply"], default="auto")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
