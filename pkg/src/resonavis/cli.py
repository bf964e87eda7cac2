"""Command-line driver: mesh info, solves, dispersion roots, studies.

All subcommands read one JSON configuration document and print either a
human-readable table or, with ``--json``, the full machine-readable report.
Reports carry the configuration echo and are byte-reproducible except for
the ``timing`` subtree.  Exit codes: 0 success, 1 numerical failure,
2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .assembly import AssemblyError, Fluid, MaterialConfig
from .dispersion import (
    DispersionError,
    DispersionProblem,
    contour_grid,
    f_m,
    find_roots,
    write_contour_csv,
    write_roots_json,
)
from .linalg import LinAlgError
from .mesh import (
    GeometryConfig,
    Mesh,
    MeshError,
    build_rect_mesh,
    mesh_stats,
    write_mesh_text,
)
from .solver import (
    EigenPair,
    NoConvergedPairsError,
    SolverError,
    SpectralBand,
    build_pencil,
    check_eigenpair,
    default_shift,
    essential_band,
    filter_spurious,
    fit_convergence_order,
    solve_qep,
)


class ConfigError(ValueError):
    """Configuration problem, reported with the offending field path."""

    def __init__(self, path: str, message: str) -> None:
        self.path = path
        super().__init__(f"{path}: {message}")


_MISSING = object()


def _field(obj: dict, path: str, key: str, default=_MISSING):
    if key in obj:
        return obj[key]
    if default is _MISSING:
        raise ConfigError(f"{path}.{key}", "missing required field")
    return default


def _mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(path, "expected an object")
    return value


def _check_keys(obj: dict, path: str, allowed: tuple[str, ...]) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown field")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {type(value).__name__}")
    return value


def _complex_pair(value, path: str) -> complex:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(path, "expected a [re, im] pair")
    return complex(_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


@dataclass(frozen=True)
class SolverConfig:
    shift: complex | None
    nev: int
    krylov_dim: int
    tol: float
    seed: int


@dataclass(frozen=True)
class OracleConfig:
    modes: tuple[int, ...]
    box: tuple[tuple[float, float], tuple[float, float]]
    grid: tuple[int, int]
    tol: float
    roots: tuple[complex, ...] | None


@dataclass(frozen=True)
class OutputConfig:
    directory: str | None
    formats: tuple[str, ...]


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig
    materials: MaterialConfig
    mesh_n: int | None
    mesh_levels: tuple[int, ...] | None
    solver: SolverConfig
    oracle: OracleConfig
    output: OutputConfig
    raw: dict

    def __eq__(self, other) -> bool:  # raw echo decides equality
        return isinstance(other, RunConfig) and self.raw == other.raw


def _parse_geometry(raw: dict) -> GeometryConfig:
    section = _mapping(_field(raw, "config", "geometry"), "geometry")
    _check_keys(section, "geometry", ("width", "height", "interface_height"))
    kwargs = {
        key: _number(_field(section, "geometry", key), f"geometry.{key}")
        for key in ("width", "height", "interface_height")
    }
    try:
        return GeometryConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError("geometry", str(exc)) from exc


def _parse_fluid(section: dict, path: str) -> Fluid:
    _check_keys(section, path, ("rho", "c", "nu"))
    rho = _number(_field(section, path, "rho"), f"{path}.rho")
    c = _number(_field(section, path, "c"), f"{path}.c")
    nu = _number(_field(section, path, "nu", 0.0), f"{path}.nu")
    try:
        return Fluid(rho=rho, c=c, nu=nu)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_materials(raw: dict) -> MaterialConfig:
    section = _mapping(_field(raw, "config", "materials"), "materials")
    _check_keys(section, "materials", ("lower", "upper"))
    lower = _parse_fluid(
        _mapping(_field(section, "materials", "lower"), "materials.lower"),
        "materials.lower",
    )
    upper = _parse_fluid(
        _mapping(_field(section, "materials", "upper"), "materials.upper"),
        "materials.upper",
    )
    return MaterialConfig(lower=lower, upper=upper)


def _parse_mesh(raw: dict) -> tuple[int | None, tuple[int, ...] | None]:
    section = _mapping(_field(raw, "config", "mesh", {}), "mesh")
    _check_keys(section, "mesh", ("n", "n_levels"))
    n = section.get("n")
    levels = section.get("n_levels")
    if n is not None and levels is not None:
        raise ConfigError("mesh", "give either n or n_levels, not both")
    if n is not None:
        n = _integer(n, "mesh.n")
        if n < 1:
            raise ConfigError("mesh.n", "must be at least 1")
    if levels is not None:
        if not isinstance(levels, list) or not levels:
            raise ConfigError("mesh.n_levels", "expected a non-empty list")
        levels = tuple(
            _integer(v, f"mesh.n_levels[{i}]") for i, v in enumerate(levels)
        )
        if any(v < 1 for v in levels):
            raise ConfigError("mesh.n_levels", "entries must be at least 1")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigError("mesh.n_levels", "must be strictly increasing")
    return n, levels


def _parse_solver(raw: dict) -> SolverConfig:
    section = _mapping(_field(raw, "config", "solver", {}), "solver")
    _check_keys(section, "solver", ("shift", "nev", "krylov_dim", "tol", "seed"))
    shift = section.get("shift")
    if shift is not None:
        shift = _complex_pair(shift, "solver.shift")
    nev = _integer(_field(section, "solver", "nev", 12), "solver.nev")
    krylov = _integer(
        _field(section, "solver", "krylov_dim", 110), "solver.krylov_dim"
    )
    tol = _number(_field(section, "solver", "tol", 1e-8), "solver.tol")
    seed = _integer(_field(section, "solver", "seed", 0), "solver.seed")
    if nev < 1:
        raise ConfigError("solver.nev", "must be at least 1")
    if not nev < krylov <= 200:
        raise ConfigError("solver.krylov_dim", "need nev < krylov_dim <= 200")
    if tol <= 0.0:
        raise ConfigError("solver.tol", "must be positive")
    if seed < 0:
        raise ConfigError("solver.seed", "must be nonnegative")
    return SolverConfig(shift=shift, nev=nev, krylov_dim=krylov, tol=tol, seed=seed)


def _parse_oracle(raw: dict) -> OracleConfig:
    section = _mapping(_field(raw, "config", "oracle", {}), "oracle")
    _check_keys(section, "oracle", ("modes", "box", "grid", "tol", "roots"))
    modes = section.get("modes", [0, 1, 2, 3])
    if not isinstance(modes, list) or not modes:
        raise ConfigError("oracle.modes", "expected a non-empty list")
    modes = tuple(_integer(v, f"oracle.modes[{i}]") for i, v in enumerate(modes))
    if any(m < 0 for m in modes):
        raise ConfigError("oracle.modes", "mode indices must be nonnegative")

    box_raw = section.get("box", [[-250.0, 50.0], [900.0, 3700.0]])
    if not isinstance(box_raw, list) or len(box_raw) != 2:
        raise ConfigError("oracle.box", "expected [[re_lo, re_hi], [im_lo, im_hi]]")
    axes = []
    for i, pair in enumerate(box_raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"oracle.box[{i}]", "expected a [lo, hi] pair")
        lo = _number(pair[0], f"oracle.box[{i}][0]")
        hi = _number(pair[1], f"oracle.box[{i}][1]")
        if not lo < hi:
            raise ConfigError(f"oracle.box[{i}]", "lower bound must be below upper")
        axes.append((lo, hi))
    box = (axes[0], axes[1])

    grid_raw = section.get("grid", [48, 48])
    if not isinstance(grid_raw, list) or len(grid_raw) != 2:
        raise ConfigError("oracle.grid", "expected [nx, ny]")
    grid = (
        _integer(grid_raw[0], "oracle.grid[0]"),
        _integer(grid_raw[1], "oracle.grid[1]"),
    )
    if min(grid) < 16:
        raise ConfigError("oracle.grid", "need at least 16 points per axis")

    tol = _number(_field(section, "oracle", "tol", 1e-8), "oracle.tol")
    if tol <= 0.0:
        raise ConfigError("oracle.tol", "must be positive")

    roots = section.get("roots")
    if roots is not None:
        if not isinstance(roots, list) or not roots:
            raise ConfigError("oracle.roots", "expected a non-empty list")
        roots = tuple(
            _complex_pair(v, f"oracle.roots[{i}]") for i, v in enumerate(roots)
        )
    return OracleConfig(modes=modes, box=box, grid=grid, tol=tol, roots=roots)


def _parse_output(raw: dict) -> OutputConfig:
    section = _mapping(_field(raw, "config", "output", {}), "output")
    _check_keys(section, "output", ("directory", "formats"))
    directory = section.get("directory")
    if directory is not None and not isinstance(directory, str):
        raise ConfigError("output.directory", "expected a string")
    formats = section.get("formats", ["json"])
    if not isinstance(formats, list):
        raise ConfigError("output.formats", "expected a list")
    for i, fmt in enumerate(formats):
        if fmt not in ("json", "csv", "vtk"):
            raise ConfigError(f"output.formats[{i}]", f"unknown format {fmt!r}")
    return OutputConfig(directory=directory, formats=tuple(formats))


def parse_config(raw: dict) -> RunConfig:
    """Validate a configuration document; errors carry the field path."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    _check_keys(
        raw, "config",
        ("geometry", "materials", "mesh", "solver", "oracle", "output"),
    )
    mesh_n, mesh_levels = _parse_mesh(raw)
    return RunConfig(
        geometry=_parse_geometry(raw),
        materials=_parse_materials(raw),
        mesh_n=mesh_n,
        mesh_levels=mesh_levels,
        solver=_parse_solver(raw),
        oracle=_parse_oracle(raw),
        output=_parse_output(raw),
        raw=raw,
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}") from exc
    return parse_config(raw)


def _worker_count(tasks: int) -> int:
    cap = os.environ.get("RESONAVIS_THREADS")
    if cap is None:
        limit = os.cpu_count() or 1
    else:
        try:
            limit = int(cap)
        except ValueError:
            raise ConfigError("RESONAVIS_THREADS", f"not an integer: {cap!r}")
        if limit < 1:
            raise ConfigError("RESONAVIS_THREADS", "must be at least 1")
    return max(1, min(tasks, limit))


def _out_dir(config: RunConfig, args) -> Path | None:
    target = args.out or config.output.directory
    if target is None:
        return None
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _band_json(band: SpectralBand) -> dict:
    def finite(x: float):
        return x if math.isfinite(x) else None

    return {
        "mu_interval": [band.mu_interval[0], band.mu_interval[1]],
        "magnitude_interval": [
            finite(band.magnitude_interval[0]),
            finite(band.magnitude_interval[1]),
        ],
    }


def _dump_json(report: dict, path: Path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _print_json(report: dict) -> None:
    print(json.dumps(report, indent=2, sort_keys=True))


def _pair_json(pair: EigenPair) -> dict:
    return {
        "lambda_re": float(pair.value.real),
        "lambda_im": float(pair.value.imag),
        "residual": float(pair.residual),
        "converged": bool(pair.converged),
        "warnings": list(pair.warnings),
    }


def _format_lambda(value: complex, inviscid: bool) -> str:
    if inviscid:
        return f"{value.imag:.2f}i"
    return f"{value.real:.2f}{value.imag:+.2f}i"


def cmd_mesh_info(config: RunConfig, args) -> int:
    if config.mesh_n is None:
        raise ConfigError("mesh.n", "missing required field")
    mesh = build_rect_mesh(config.geometry, config.mesh_n)
    stats = mesh_stats(mesh)
    out = _out_dir(config, args)
    if out is not None:
        _dump_json(stats, out / "mesh_stats.json")
        write_mesh_text(mesh, out / "mesh.txt")
    if args.json:
        _print_json(stats)
    else:
        for key in sorted(stats):
            print(f"{key:>20}  {stats[key]}")
    return 0


def _solve_sorted(
    pencil, band, sigma: complex, solver: SolverConfig
) -> tuple[list[EigenPair], list[EigenPair]]:
    pairs = solve_qep(
        pencil,
        sigma,
        nev=solver.nev,
        krylov_dim=solver.krylov_dim,
        tol=solver.tol,
        seed=solver.seed,
    )
    checked = []
    for pair in pairs:
        report = check_eigenpair(pencil, pair, tol=solver.tol)
        checked.append(replace(pair, warnings=pair.warnings + report.warnings))
    kept, discarded = filter_spurious(checked, band)
    key = lambda p: (abs(p.value.imag), p.value.real)
    return sorted(kept, key=key), sorted(discarded, key=key)


def cmd_solve(config: RunConfig, args) -> int:
    if config.mesh_n is None:
        raise ConfigError("mesh.n", "missing required field")
    started = time.perf_counter()
    mesh = build_rect_mesh(config.geometry, config.mesh_n)
    pencil = build_pencil(mesh, config.materials)
    assembled = time.perf_counter()
    band = essential_band(config.materials)
    sigma = config.solver.shift
    if sigma is None:
        sigma = default_shift(config.geometry, config.materials)
    kept, discarded = _solve_sorted(pencil, band, sigma, config.solver)
    solved = time.perf_counter()

    report = {
        "command": "solve",
        "config": config.raw,
        "mesh": mesh_stats(mesh),
        "shift": [sigma.real, sigma.imag],
        "band": _band_json(band),
        "pairs": [_pair_json(p) for p in kept],
        "discarded": [_pair_json(p) for p in discarded],
        "files": {"eigenvectors": [], "modes_vtk": []},
        "timing": {
            "assemble_s": assembled - started,
            "solve_s": solved - assembled,
            "total_s": time.perf_counter() - started,
        },
    }

    out = _out_dir(config, args)
    if out is not None:
        if "csv" in config.output.formats:
            for i, pair in enumerate(kept):
                name = f"eigenvector_{i:03d}.csv"
                _write_eigenvector_csv(out / name, mesh, pair.vector)
                report["files"]["eigenvectors"].append(name)
        if "vtk" in config.output.formats:
            for i, pair in enumerate(kept):
                name = f"mode_{i:03d}.vtk"
                _write_divergence_vtk(out / name, mesh, pair.vector)
                report["files"]["modes_vtk"].append(name)
        _dump_json(report, out / "solve.json")

    if args.json:
        _print_json(report)
    else:
        inviscid = config.materials.inviscid
        print(f"shift {sigma:.6g}, {len(kept)} kept, {len(discarded)} discarded")
        print(f"{'lambda (1/s)':>24}  {'residual':>10}  converged")
        for pair in kept:
            mark = "yes" if pair.converged else "NO"
            extra = f"  [{'; '.join(pair.warnings)}]" if pair.warnings else ""
            print(
                f"{_format_lambda(pair.value, inviscid):>24}  "
                f"{pair.residual:10.2e}  {mark}{extra}"
            )
    return 0


def _write_eigenvector_csv(path: Path, mesh: Mesh, vector: np.ndarray) -> None:
    interior = mesh.interior_edges()
    midpoints = mesh.edge_midpoints()[interior]
    normals = mesh.edge_normals()[interior]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("edge_index,midpoint_x,midpoint_y,normal_x,normal_y,coeff_re,coeff_im\n")
        for edge, mid, nrm, coeff in zip(interior, midpoints, normals, vector):
            fh.write(
                f"{int(edge)},{mid[0]:.17g},{mid[1]:.17g},"
                f"{nrm[0]:.17g},{nrm[1]:.17g},"
                f"{coeff.real:.17g},{coeff.imag:.17g}\n"
            )


def _divergence_per_triangle(mesh: Mesh, vector: np.ndarray) -> np.ndarray:
    coeff = np.zeros(mesh.num_edges, dtype=complex)
    coeff[mesh.interior_edges()] = vector
    lengths = mesh.edge_lengths()
    contributions = (
        mesh.triangle_edge_signs
        * lengths[mesh.triangle_edges]
        * coeff[mesh.triangle_edges]
    )
    return contributions.sum(axis=1) / mesh.triangle_areas()


def _write_divergence_vtk(path: Path, mesh: Mesh, vector: np.ndarray) -> None:
    """Legacy-VTK unstructured grid with div(u_h) as cell data."""
    div = _divergence_per_triangle(mesh, vector)
    nt = mesh.num_triangles
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write("displacement divergence per triangle\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_vertices} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0.0\n")
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        for _ in range(nt):
            fh.write("5\n")
        fh.write(f"CELL_DATA {nt}\n")
        for name, part in (("div_re", div.real), ("div_im", div.imag)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for value in part:
                fh.write(f"{value:.17g}\n")


def cmd_oracle(config: RunConfig, args) -> int:
    started = time.perf_counter()
    entries = []
    empty_modes = []
    for m in config.oracle.modes:
        problem = DispersionProblem(
            m=m, geometry=config.geometry, materials=config.materials
        )
        roots = find_roots(
            problem, config.oracle.box, config.oracle.grid, config.oracle.tol
        )
        if not roots:
            empty_modes.append(m)
        for root in roots:
            entries.append(
                {
                    "m": m,
                    "lambda_re": float(root.real),
                    "lambda_im": float(root.imag),
                    "abs_fm": float(abs(f_m(problem, root))),
                }
            )
    entries.sort(key=lambda e: (abs(e["lambda_im"]), e["m"]))
    report = {
        "command": "oracle",
        "config": config.raw,
        "roots": entries,
        "empty_modes": empty_modes,
        "timing": {"total_s": time.perf_counter() - started},
    }

    out = _out_dir(config, args)
    if out is not None:
        write_roots_json(out / "roots.json", entries)
        _dump_json(report, out / "oracle.json")

    if args.json:
        _print_json(report)
    else:
        inviscid = config.materials.inviscid
        print(f"{'m':>3}  {'root (1/s)':>24}  {'|f_m|':>10}")
        for entry in entries:
            root = complex(entry["lambda_re"], entry["lambda_im"])
            print(
                f"{entry['m']:>3}  {_format_lambda(root, inviscid):>24}  "
                f"{entry['abs_fm']:10.2e}"
            )
        for m in empty_modes:
            print(f"warning: no roots found for m={m} in the search box")
    return 0


def _oracle_roots(config: RunConfig) -> list[tuple[int | None, complex]]:
    """Tracked roots for a study: supplied directly or found per mode."""
    if config.oracle.roots is not None:
        tracked = [(None, root) for root in config.oracle.roots]
    else:
        tracked = []
        for m in config.oracle.modes:
            problem = DispersionProblem(
                m=m, geometry=config.geometry, materials=config.materials
            )
            for root in find_roots(
                problem, config.oracle.box, config.oracle.grid, config.oracle.tol
            ):
                tracked.append((m, root))
    tracked.sort(key=lambda t: abs(t[1].imag))
    return tracked


def _study_level(
    config: RunConfig, n: int, roots: list[complex]
) -> list[EigenPair]:
    """Solve one refinement level with one shift per tracked root."""
    mesh = build_rect_mesh(config.geometry, n)
    pencil = build_pencil(mesh, config.materials)
    band = essential_band(config.materials)
    pool: list[EigenPair] = []
    for root in roots:
        sigma = root + 0.03 * abs(root)  # real offset clears the spectrum
        try:
            kept, _ = _solve_sorted(pencil, band, sigma, config.solver)
        except NoConvergedPairsError:
            continue
        pool.extend(p for p in kept if p.converged)
    deduped: list[EigenPair] = []
    for pair in sorted(pool, key=lambda p: (p.residual, abs(p.value.imag))):
        if any(
            abs(pair.value - q.value) <= 1e-6 * max(1.0, abs(pair.value), abs(q.value))
            for q in deduped
        ):
            continue
        deduped.append(pair)
    if not deduped:
        raise NoConvergedPairsError(f"no converged eigenvalues at refinement {n}")
    deduped.sort(key=lambda p: (abs(p.value.imag), p.value.real))
    return deduped


def _match_level(
    roots: list[complex], values: list[complex], radius: float = 0.05
) -> tuple[dict[int, int], set[int]]:
    """Nearest-value matching with a relative rejection radius.

    Returns (column -> value index) plus the set of conflicted columns
    (several roots claiming one computed value).
    """
    chosen: dict[int, int] = {}
    claims: dict[int, list[int]] = {}
    for col, root in enumerate(roots):
        if not values:
            continue
        distances = [abs(v - root) for v in values]
        best = int(np.argmin(distances))
        if distances[best] <= radius * max(abs(root), 1e-300):
            chosen[col] = best
            claims.setdefault(best, []).append(col)
    conflicted = {
        col for cols in claims.values() if len(cols) > 1 for col in cols
    }
    return chosen, conflicted


def cmd_convergence(config: RunConfig, args) -> int:
    if config.mesh_levels is None:
        raise ConfigError("mesh.n_levels", "missing required field")
    if len(config.mesh_levels) < 3:
        raise ConfigError("mesh.n_levels", "need at least three levels")
    started = time.perf_counter()

    tracked = _oracle_roots(config)
    if not tracked:
        raise ConfigError("oracle", "no tracked roots: search box found none")
    roots = [root for _, root in tracked]

    levels = list(config.mesh_levels)
    with ThreadPoolExecutor(max_workers=_worker_count(len(levels))) as pool:
        futures = [
            pool.submit(_study_level, config, n, roots) for n in levels
        ]
        per_level = [f.result() for f in futures]

    columns = []
    for col, (m, root) in enumerate(tracked):
        columns.append(
            {
                "m": m,
                "exact_re": float(root.real),
                "exact_im": float(root.imag),
                "values": [],
                "order": None,
                "status": "ok",
            }
        )

    matched_values: dict[tuple[int, int], complex] = {}
    for li, (n, pairs) in enumerate(zip(levels, per_level)):
        values = [p.value for p in pairs]
        chosen, conflicted = _match_level(roots, values)
        for col, (m, root) in enumerate(tracked):
            record = {"n": n, "h": config.geometry.width / n}
            if col in conflicted:
                columns[col]["status"] = "conflict"
                record["conflict"] = True
            elif col in chosen:
                value = values[chosen[col]]
                matched_values[(col, li)] = value
                record.update(
                    {
                        "lambda_re": float(value.real),
                        "lambda_im": float(value.imag),
                        "error": float(abs(value - root)),
                    }
                )
            else:
                if columns[col]["status"] == "ok":
                    columns[col]["status"] = "unmatched"
            columns[col]["values"].append(record)

    for col, column in enumerate(columns):
        if column["status"] != "ok":
            continue
        samples = [
            (record["h"], record["error"])
            for record in column["values"]
            if "error" in record
        ]
        if len(samples) >= 3 and all(err > 0.0 for _, err in samples):
            column["order"] = fit_convergence_order(samples)

    report = {
        "command": "convergence",
        "config": config.raw,
        "levels": levels,
        "band": _band_json(essential_band(config.materials)),
        "columns": columns,
        "timing": {"total_s": time.perf_counter() - started},
    }

    out = _out_dir(config, args)
    if out is not None:
        _dump_json(report, out / "convergence.json")
        _write_convergence_csv(out / "convergence.csv", levels, columns)

    if args.json:
        _print_json(report)
    else:
        _print_convergence_table(levels, columns, config.materials.inviscid)
    return 0


def _write_convergence_csv(path: Path, levels: list[int], columns: list[dict]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(
            "column,m,exact_re,exact_im,n,computed_re,computed_im,error,order,status\n"
        )
        for col, column in enumerate(columns):
            order = "" if column["order"] is None else f"{column['order']:.17g}"
            m = "" if column["m"] is None else column["m"]
            for record in column["values"]:
                if "error" in record:
                    body = (
                        f"{record['lambda_re']:.17g},{record['lambda_im']:.17g},"
                        f"{record['error']:.17g}"
                    )
                else:
                    body = ",,"
                fh.write(
                    f"{col},{m},{column['exact_re']:.17g},{column['exact_im']:.17g},"
                    f"{record['n']},{body},{order},{column['status']}\n"
                )


def _print_convergence_table(
    levels: list[int], columns: list[dict], inviscid: bool
) -> None:
    width = 13 if inviscid else 20
    block = 6 if inviscid else 4
    for start in range(0, len(columns), block):
        chunk = columns[start : start + block]
        headers = []
        for col, column in enumerate(chunk, start=start):
            label = f"m={column['m']}" if column["m"] is not None else f"#{col}"
            headers.append(f"{label:>{width}}")
        print(f"{'':>6}" + "".join(headers))
        for li, n in enumerate(levels):
            cells = []
            for column in chunk:
                record = column["values"][li]
                if "error" in record:
                    value = complex(record["lambda_re"], record["lambda_im"])
                    cells.append(f"{_format_lambda(value, inviscid):>{width}}")
                else:
                    cells.append(f"{'--':>{width}}")
            print(f"{'N=' + str(n):>6}" + "".join(cells))
        order_cells = []
        exact_cells = []
        for column in chunk:
            order = column["order"]
            order_cells.append(
                f"{order:>{width}.2f}" if order is not None else f"{'n/a':>{width}}"
            )
            exact = complex(column["exact_re"], column["exact_im"])
            exact_cells.append(f"{_format_lambda(exact, inviscid):>{width}}")
        print(f"{'Order':>6}" + "".join(order_cells))
        print(f"{'Exact':>6}" + "".join(exact_cells))
        print()


def cmd_contour(config: RunConfig, args) -> int:
    out = _out_dir(config, args)
    if out is None:
        raise ConfigError("output.directory", "contour output needs a directory")
    started = time.perf_counter()
    files = []
    minima = []
    for m in config.oracle.modes:
        problem = DispersionProblem(
            m=m, geometry=config.geometry, materials=config.materials
        )
        re_axis, im_axis, values = contour_grid(
            problem, config.oracle.box, config.oracle.grid
        )
        name = f"contour_m{m}.csv"
        write_contour_csv(out / name, re_axis, im_axis, values)
        files.append(name)
        j, i = np.unravel_index(int(np.argmin(values)), values.shape)
        minima.append(
            {
                "m": m,
                "re": float(re_axis[i]),
                "im": float(im_axis[j]),
                "log10_abs_fm": float(values[j, i]),
            }
        )
    report = {
        "command": "contour",
        "config": config.raw,
        "files": files,
        "minima": minima,
        "timing": {"total_s": time.perf_counter() - started},
    }
    if args.json:
        _print_json(report)
    else:
        for entry in minima:
            print(
                f"m={entry['m']}: grid minimum at {entry['re']:.4g} "
                f"{entry['im']:+.4g}i (log10|f| = {entry['log10_abs_fm']:.2f})"
            )
    return 0


_COMMANDS = {
    "mesh-info": (cmd_mesh_info, "print mesh statistics"),
    "solve": (cmd_solve, "solve the eigenvalue problem on one mesh"),
    "oracle": (cmd_oracle, "find dispersion-relation roots"),
    "convergence": (cmd_convergence, "run a mesh refinement study"),
    "contour": (cmd_contour, "export |f_m| contour grids"),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="resonavis",
        description="Vibration eigenmodes of two layered dissipative fluids "
        "in a rigid rectangular cavity.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, metavar="PATH",
                         help="JSON configuration file")
        sub.add_argument("--json", action="store_true",
                         help="print the JSON report instead of a table")
        sub.add_argument("--out", metavar="DIR",
                         help="directory for report files "
                         "(overrides output.directory)")
        sub.set_defaults(func=func)
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        return args.func(config, args)
    except (ConfigError, MeshError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, LinAlgError, AssemblyError, DispersionError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
