"""On-disk formats: snapshot tables, run manifests, report files.

Snapshots are comma-separated text with 17 significant digits so a
round-trip through disk reproduces the float64 arrays bit for bit; a
JSON sidecar carries the grid geometry, units, and case id.  Manifests
are written before a run starts and hold the fully resolved
configuration, which is all the reproduction needs since every random
draw fans out from the single seed inside it.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import MismatchRecord, MismatchReport, ScalingRecord, ScalingReport
from .domain import CaseConfig, UnitSystem, config_to_text, default_units, parse_config_text
from .fd_solver import FieldState

_AXES = ("x", "y", "z")
_VCOLS = ("vx", "vy", "vz")


class FormatError(ValueError):
    """Raised for files that do not match the expected layout."""


def snapshot_columns(dimension: int) -> tuple[str, ...]:
    return (*_AXES[:dimension], "t", "rho", *_VCOLS[:dimension], "phi")


def _sidecar(path) -> Path:
    return Path(str(path) + ".meta.json")


def write_snapshot(path, points, t, rho, v, phi, *, case: str,
                   units: UnitSystem | None = None, grid_shape=None,
                   spacing=None) -> None:
    """Write one table of fields at spatial points and a metadata sidecar.

    `t` may be a scalar (one time slice) or a per-point array.  Columns for
    axes beyond the dimension are omitted entirely.
    """
    u = units or default_units()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    t_col = np.broadcast_to(np.asarray(t, dtype=float), (n,))
    v = np.asarray(v, dtype=float).reshape(n, d)
    cols = [points[:, i] for i in range(d)]
    cols.append(t_col)
    cols.append(np.asarray(rho, dtype=float).reshape(n))
    cols.extend(v[:, i] for i in range(d))
    cols.append(np.asarray(phi, dtype=float).reshape(n))
    names = snapshot_columns(d)
    table = np.column_stack(cols)
    np.savetxt(path, table, fmt="%.17g", delimiter=",",
               header=",".join(names), comments="")
    meta = {
        "case": case,
        "dimension": d,
        "columns": list(names),
        "grid_shape": list(grid_shape) if grid_shape is not None else None,
        "spacing": list(spacing) if spacing is not None else None,
        "units": {"c_s": u.c_s, "four_pi_g": u.four_pi_g, "rho0": u.rho0},
    }
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")


def write_state_snapshot(path, state: FieldState, *, case: str,
                         units: UnitSystem | None = None) -> None:
    """Snapshot a grid state: one row per node in C order."""
    axes = state.grid_axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    d = len(axes)
    vel = state.velocity()
    v = np.stack([vel[i].ravel() for i in range(d)], axis=-1)
    write_snapshot(path, points, state.t, state.rho.ravel(), v,
                   state.phi.ravel(), case=case, units=units,
                   grid_shape=state.rho.shape, spacing=state.spacing)


def read_snapshot(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a snapshot table and its sidecar.

    Returns the columns by name and the metadata dict; 17-digit formatting
    makes the arrays bitwise equal to what was written.
    """
    with open(path) as fh:
        header = fh.readline().strip()
    names = tuple(header.split(","))
    for d in (1, 2, 3):
        if names == snapshot_columns(d):
            break
    else:
        raise FormatError(f"unrecognized snapshot header: {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(names):
        raise FormatError("row width disagrees with the header")
    table = {name: data[:, i].copy() for i, name in enumerate(names)}
    sidecar = _sidecar(path)
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return table, meta


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to replay a run: the command line and the fully
    resolved configuration with its seed.  The timestamp is informational
    and takes no part in reproduction."""

    command: str
    config_text: str
    seed: int
    output_dir: str
    version: str = __version__
    created: str = ""

    @property
    def config(self) -> CaseConfig:
        return parse_config_text(self.config_text)


def make_manifest(command: str, config: CaseConfig, output_dir) -> RunManifest:
    return RunManifest(command=command, config_text=config_to_text(config),
                       seed=config.seed, output_dir=str(output_dir),
                       created=time.strftime("%Y-%m-%dT%H:%M:%S"))


def write_manifest(directory, manifest: RunManifest) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    payload = {
        "command": manifest.command,
        "config": manifest.config_text,
        "seed": manifest.seed,
        "output_dir": manifest.output_dir,
        "version": manifest.version,
        "created": manifest.created,
    }
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def read_manifest(path) -> RunManifest:
    try:
        payload = json.loads(Path(path).read_text())
        return RunManifest(command=payload["command"],
                           config_text=payload["config"],
                           seed=int(payload["seed"]),
                           output_dir=payload["output_dir"],
                           version=payload.get("version", ""),
                           created=payload.get("created", ""))
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad manifest {path}: {exc}") from exc


def default_output_root() -> Path:
    """Run directories land here unless the command says otherwise."""
    return Path(os.environ.get("GRAVLAB_OUTPUT_ROOT", "runs"))


# ---------------------------------------------------------------------------
# Report files: line-oriented key-value heads plus a fixed-column body
# ---------------------------------------------------------------------------


def mismatch_report_text(report: MismatchReport) -> str:
    lines = ["# mismatch report",
             f"case {report.case}",
             f"solver_a {report.solver_a}",
             f"solver_b {report.solver_b}",
             "columns time field kind mean_percent max_percent"]
    for r in report.records:
        lines.append(f"{r.time!r} {r.fieldname} {r.kind} {r.mean!r} {r.max!r}")
    return "\n".join(lines) + "\n"


def parse_mismatch_report(text: str) -> MismatchReport:
    head, rows = _split_report(text, "# mismatch report",
                               ("case", "solver_a", "solver_b"))
    records = []
    for row in rows:
        parts = row.split()
        if len(parts) != 5:
            raise FormatError(f"bad mismatch row: {row!r}")
        records.append(MismatchRecord(time=float(parts[0]), fieldname=parts[1],
                                      kind=parts[2], mean=float(parts[3]),
                                      max=float(parts[4])))
    return MismatchReport(case=head["case"], solver_a=head["solver_a"],
                          solver_b=head["solver_b"], records=tuple(records))


def scaling_report_text(report: ScalingReport) -> str:
    lines = ["# scaling report",
             f"kind {report.kind}",
             "columns solver label quantity value repeats"]
    for r in report.records:
        lines.append(f"{r.solver} {r.label} {r.quantity} {r.value!r} {r.repeats}")
    return "\n".join(lines) + "\n"


def parse_scaling_report(text: str) -> ScalingReport:
    head, rows = _split_report(text, "# scaling report", ("kind",))
    records = []
    for row in rows:
        parts = row.split()
        if len(parts) != 5:
            raise FormatError(f"bad scaling row: {row!r}")
        records.append(ScalingRecord(solver=parts[0], label=parts[1],
                                     quantity=parts[2], value=float(parts[3]),
                                     repeats=int(parts[4])))
    return ScalingReport(kind=head["kind"], records=tuple(records))


def _split_report(text: str, magic: str, keys) -> tuple[dict, list[str]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != magic:
        raise FormatError(f"missing header line {magic!r}")
    head: dict[str, str] = {}
    body_start = None
    for i, ln in enumerate(lines[1:], start=1):
        if ln.startswith("columns "):
            body_start = i + 1
            break
        key, _, value = ln.partition(" ")
        head[key] = value
    if body_start is None:
        raise FormatError("report has no columns line")
    missing = [k for k in keys if k not in head]
    if missing:
        raise FormatError(f"report head missing {missing}")
    return head, lines[body_start:]
