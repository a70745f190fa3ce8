"""Code units, periodic box domains, case recipes, and collocation sampling.

Everything downstream (solvers, losses, benchmarks) reads scales from a
UnitSystem instead of hard-coding the default c_s = 4*pi*G = rho0 = 1, so
rescaled-unit runs stay consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

CASE_IDS = (
    "case1",
    "case1_oblique",
    "case2",
    "case3",
    "soundwave_linear",
    "soundwave_shock",
)

SOLVER_IDS = ("grinn", "fd", "lt")


class ConfigError(ValueError):
    """Raised for invalid or unknown case-configuration values."""


@dataclass(frozen=True)
class UnitSystem:
    """Physical scales: isothermal sound speed, 4*pi*G, background density."""

    c_s: float = 1.0
    four_pi_g: float = 1.0
    rho0: float = 1.0

    def __post_init__(self):
        for name in ("c_s", "four_pi_g", "rho0"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")

    @property
    def grav_constant(self) -> float:
        return self.four_pi_g / (4.0 * math.pi)

    def jeans_wavenumber(self) -> float:
        return math.sqrt(self.four_pi_g * self.rho0) / self.c_s

    def jeans_length(self) -> float:
        return 2.0 * math.pi / self.jeans_wavenumber()

    def free_fall_time(self) -> float:
        return 1.0 / math.sqrt(self.four_pi_g * self.rho0)


def default_units() -> UnitSystem:
    """Code units: c_s = 4*pi*G = rho0 = 1, so lambda_J = 2*pi and k_J = 1."""
    return UnitSystem()


@dataclass(frozen=True)
class DomainSpec:
    """Periodic box [0, extent[i]] per spatial axis, time window [t_start, t_end]."""

    extent: tuple[float, ...]
    t_start: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        if not self.extent or any(e <= 0.0 for e in self.extent):
            raise ConfigError("domain extents must be positive")
        if self.t_end <= self.t_start:
            raise ConfigError("t_end must exceed t_start")

    @property
    def dimension(self) -> int:
        return len(self.extent)

    @property
    def volume(self) -> float:
        return math.prod(self.extent)


def build_domain(dimension: int, wavelength: float, t_end: float,
                 wavelengths_per_axis: int = 3, t_start: float = 0.0) -> DomainSpec:
    if dimension not in (1, 2, 3):
        raise ConfigError("dimension must be 1, 2, or 3")
    if wavelength <= 0.0:
        raise ConfigError("wavelength must be positive")
    if wavelengths_per_axis < 1:
        raise ConfigError("wavelengths_per_axis must be at least 1")
    side = wavelengths_per_axis * wavelength
    return DomainSpec(extent=(side,) * dimension, t_start=t_start, t_end=t_end)


@dataclass(frozen=True)
class CaseConfig:
    """Full recipe for one run: physics, numerics, and training budgets."""

    case: str
    dimension: int
    amplitude: float
    wavelength_ratio: float
    orientation: tuple[float, ...]
    gravity: bool
    solver: str = "grinn"
    t_end: float = 3.0
    wavelengths_per_axis: int = 3
    grid_points: int = 1000
    courant: float = 0.5
    hidden: tuple[int, ...] = (32, 32, 32)
    n_interior: int = 5000
    n_boundary: int = 500
    n_initial: int = 500
    adam_epochs: int = 2000
    learning_rate: float = 1e-3
    lbfgs_max_iters: int = 3000
    lbfgs_gtol: float = 1e-10
    lbfgs_ftol: float = 0.0
    omega0: float = 1.0
    seed: int = 2024

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.case not in CASE_IDS:
            raise ConfigError(f"unknown case id {self.case!r}")
        if self.solver not in SOLVER_IDS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.dimension not in (1, 2, 3):
            raise ConfigError("dimension must be 1, 2, or 3")
        if self.amplitude <= 0.0:
            raise ConfigError("amplitude must be positive")
        if self.wavelength_ratio <= 0.0:
            raise ConfigError("wavelength_ratio must be positive")
        if len(self.orientation) != self.dimension:
            raise ConfigError("orientation must have one component per dimension")
        norm = math.sqrt(sum(c * c for c in self.orientation))
        if abs(norm - 1.0) > 1e-9:
            raise ConfigError("orientation must be a unit vector")
        if self.gravity == self.case.startswith("soundwave"):
            raise ConfigError("gravity flag is off exactly for soundwave cases")
        if self.t_end <= 0.0:
            raise ConfigError("t_end must be positive")
        if self.wavelengths_per_axis < 1:
            raise ConfigError("wavelengths_per_axis must be at least 1")
        if self.grid_points < 8:
            raise ConfigError("grid_points must be at least 8")
        if not 0.0 < self.courant <= 1.0:
            raise ConfigError("courant must lie in (0, 1]")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError("hidden layer widths must be positive")
        if min(self.n_interior, self.n_boundary, self.n_initial) < 1:
            raise ConfigError("sampling counts must be at least 1")
        if self.n_boundary % 2 != 0:
            raise ConfigError("n_boundary must be even (points come in face pairs)")
        if self.adam_epochs < 0 or self.lbfgs_max_iters < 0:
            raise ConfigError("optimizer budgets must be non-negative")
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate must be positive")
        if self.lbfgs_gtol < 0.0 or self.lbfgs_ftol < 0.0:
            raise ConfigError("lbfgs tolerances must be non-negative")
        if self.omega0 <= 0.0:
            raise ConfigError("omega0 must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def wavelength(self, units: UnitSystem | None = None) -> float:
        units = units or default_units()
        return self.wavelength_ratio * units.jeans_length()

    def wavevector(self, units: UnitSystem | None = None) -> np.ndarray:
        k_mag = 2.0 * math.pi / self.wavelength(units)
        return k_mag * np.asarray(self.orientation, dtype=float)

    def domain(self, units: UnitSystem | None = None) -> DomainSpec:
        return build_domain(self.dimension, self.wavelength(units), self.t_end,
                            self.wavelengths_per_axis)


_OBLIQUE = (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 0.0)

_PRESETS: dict[str, dict] = {
    # Perturbation one decade below background, box a bit above the stability
    # threshold; desk-scale sampling counts for the 1D variant.
    "case1": dict(dimension=1, amplitude=0.03, wavelength_ratio=1.11,
                  orientation=(1.0,), gravity=True, t_end=3.0,
                  grid_points=1000, courant=0.5),
    # Same mode driven along the (1,1,0)/sqrt(2) diagonal of a 3D box; full
    # sampling counts.
    "case1_oblique": dict(dimension=3, amplitude=0.03, wavelength_ratio=1.11,
                          orientation=_OBLIQUE, gravity=True, t_end=3.0,
                          grid_points=300, courant=0.5,
                          n_interior=47000, n_boundary=6300, n_initial=6300),
    # Nonlinear amplitude, finer grid and larger Courant number.
    "case2": dict(dimension=1, amplitude=0.3, wavelength_ratio=1.11,
                  orientation=(1.0,), gravity=True, t_end=3.0,
                  grid_points=2000, courant=0.6),
    # Stable oscillation below the Jeans length, followed for about one period.
    "case3": dict(dimension=1, amplitude=0.03, wavelength_ratio=0.8,
                  orientation=(1.0,), gravity=True, t_end=8.0,
                  grid_points=8000, courant=0.2),
    # Pressure-only traveling wave at linear amplitude.
    "soundwave_linear": dict(dimension=1, amplitude=0.03, wavelength_ratio=1.0,
                             orientation=(1.0,), gravity=False, t_end=1.0,
                             wavelengths_per_axis=1, grid_points=2000,
                             courant=0.5),
    # Pressure-only wave steep enough to steepen toward a shock; deeper network.
    "soundwave_shock": dict(dimension=1, amplitude=0.2, wavelength_ratio=1.0,
                            orientation=(1.0,), gravity=False, t_end=2.0,
                            wavelengths_per_axis=1, grid_points=4000,
                            courant=0.5, hidden=(32,) * 7),
}


def preset_case(case_id: str, **overrides) -> CaseConfig:
    """Return the stock recipe for a case id, with optional field overrides."""
    if case_id not in CASE_IDS:
        raise ConfigError(f"unknown case id {case_id!r}")
    kwargs = dict(_PRESETS[case_id])
    kwargs.update(overrides)
    return CaseConfig(case=case_id, **kwargs)


# ---------------------------------------------------------------------------
# Collocation sampling
# ---------------------------------------------------------------------------

# Stream labels fanning a single manifest seed out to independent generators.
SEED_INTERIOR = 0
SEED_BOUNDARY = 1
SEED_INITIAL = 2
SEED_NETWORK = 3


def seeded_rng(seed: int, label: int) -> np.random.Generator:
    """Counter-based generator (Philox) so streams are portable across platforms."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(
        entropy=seed, spawn_key=(label,))))


@dataclass(frozen=True)
class BoundaryPairs:
    """Point couples on the two faces normal to one axis, matched elsewhere."""

    axis: int
    lo: np.ndarray   # (n, d+1), coordinate `axis` is 0
    hi: np.ndarray   # (n, d+1), coordinate `axis` is the extent

    @property
    def count(self) -> int:
        return self.lo.shape[0]


@dataclass(frozen=True)
class CollocationSet:
    """Sampled training points: interior, per-axis boundary pairs, initial slice."""

    domain: DomainSpec
    interior: np.ndarray             # (n_interior, d+1), columns x_1..x_d, t
    boundary: tuple[BoundaryPairs, ...]
    initial: np.ndarray              # (n_initial, d+1), t column == t_start
    seed: int

    @property
    def n_interior(self) -> int:
        return self.interior.shape[0]

    @property
    def n_boundary(self) -> int:
        return 2 * sum(b.count for b in self.boundary)

    @property
    def n_initial(self) -> int:
        return self.initial.shape[0]


def _uniform_open(rng: np.random.Generator, lo: float, hi: float, n: int) -> np.ndarray:
    """Uniform samples strictly inside (lo, hi); endpoint draws are redrawn."""
    out = lo + (hi - lo) * rng.random(n)
    bad = (out <= lo) | (out >= hi)
    while np.any(bad):
        out[bad] = lo + (hi - lo) * rng.random(int(bad.sum()))
        bad = (out <= lo) | (out >= hi)
    return out


def sample_collocation(domain: DomainSpec, n_interior: int, n_boundary: int,
                       n_initial: int, seed: int) -> CollocationSet:
    """Draw the three point families used by the physics-informed losses.

    Interior points are uniform over the open space-time box.  Boundary points
    come as couples on opposite faces, n_boundary/(2d) couples per axis with
    any remainder assigned round-robin; couple members differ only in the
    paired coordinate.  Initial points sit exactly on t = t_start.
    """
    if min(n_interior, n_boundary, n_initial) < 1:
        raise ConfigError("sampling counts must be at least 1")
    if n_boundary % 2 != 0:
        raise ConfigError("n_boundary must be even (points come in face pairs)")
    d = domain.dimension

    rng = seeded_rng(seed, SEED_INTERIOR)
    cols = [_uniform_open(rng, 0.0, L, n_interior) for L in domain.extent]
    cols.append(_uniform_open(rng, domain.t_start, domain.t_end, n_interior))
    interior = np.column_stack(cols)

    rng = seeded_rng(seed, SEED_BOUNDARY)
    pairs_per_axis = [n_boundary // (2 * d)] * d
    for i in range((n_boundary // 2) % d):
        pairs_per_axis[i] += 1
    groups = []
    for axis, n_pairs in enumerate(pairs_per_axis):
        if n_pairs == 0:
            continue
        base = np.empty((n_pairs, d + 1))
        for j, L in enumerate(domain.extent):
            base[:, j] = _uniform_open(rng, 0.0, L, n_pairs)
        base[:, d] = _uniform_open(rng, domain.t_start, domain.t_end, n_pairs)
        lo = base.copy()
        hi = base.copy()
        lo[:, axis] = 0.0
        hi[:, axis] = domain.extent[axis]
        groups.append(BoundaryPairs(axis=axis, lo=lo, hi=hi))

    rng = seeded_rng(seed, SEED_INITIAL)
    cols = [_uniform_open(rng, 0.0, L, n_initial) for L in domain.extent]
    cols.append(np.full(n_initial, domain.t_start))
    initial = np.column_stack(cols)

    return CollocationSet(domain=domain, interior=interior,
                          boundary=tuple(groups), initial=initial, seed=seed)


# ---------------------------------------------------------------------------
# Key-value serialization of case recipes
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    return repr(float(x))

def _fmt_tuple_float(xs) -> str:
    return ",".join(_fmt_float(x) for x in xs)

def _fmt_tuple_int(xs) -> str:
    return ",".join(str(int(x)) for x in xs)

def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


_FIELD_CODECS = {
    "case": (str, lambda s: s),
    "solver": (str, lambda s: s),
    "dimension": (str, int),
    "amplitude": (_fmt_float, float),
    "wavelength_ratio": (_fmt_float, float),
    "orientation": (_fmt_tuple_float, lambda s: tuple(float(v) for v in s.split(","))),
    "gravity": (lambda b: "true" if b else "false", _parse_bool),
    "t_end": (_fmt_float, float),
    "wavelengths_per_axis": (str, int),
    "grid_points": (str, int),
    "courant": (_fmt_float, float),
    "hidden": (_fmt_tuple_int, lambda s: tuple(int(v) for v in s.split(","))),
    "n_interior": (str, int),
    "n_boundary": (str, int),
    "n_initial": (str, int),
    "adam_epochs": (str, int),
    "learning_rate": (_fmt_float, float),
    "lbfgs_max_iters": (str, int),
    "lbfgs_gtol": (_fmt_float, float),
    "lbfgs_ftol": (_fmt_float, float),
    "omega0": (_fmt_float, float),
    "seed": (str, int),
}


def decode_config_value(key: str, text: str):
    """Parse one field's text form, with the same rules as config files."""
    if key not in _FIELD_CODECS:
        raise ConfigError(f"unknown configuration key {key!r}")
    _, decode = _FIELD_CODECS[key]
    try:
        return decode(text)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from exc


def config_to_text(config: CaseConfig) -> str:
    """Serialize a recipe as `key = value` lines (round-trips exactly)."""
    lines = ["# gravlab case configuration"]
    for f in fields(CaseConfig):
        encode, _ = _FIELD_CODECS[f.name]
        lines.append(f"{f.name} = {encode(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config_text(text: str, base: CaseConfig | None = None) -> CaseConfig:
    """Parse `key = value` lines into a CaseConfig.

    Keys omitted from the text fall back to `base` (or to the preset for the
    `case` key named in the text).  Unknown keys and malformed values raise
    ConfigError naming the offender.
    """
    updates: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if key not in _FIELD_CODECS:
            raise ConfigError(f"unknown configuration key {key!r}")
        _, decode = _FIELD_CODECS[key]
        try:
            updates[key] = decode(value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc

    if base is None:
        case_id = updates.get("case")
        if case_id is None:
            raise ConfigError("configuration must name a case")
        base = preset_case(str(case_id))
    try:
        return replace(base, **updates)
    except ConfigError as exc:
        raise ConfigError(str(exc)) from exc
