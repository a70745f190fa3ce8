"""Dense sine-activated network with exact derivatives, self-contained.

Physics-informed losses need three things beyond a plain forward pass:
first derivatives of every output with respect to every input, pure second
spatial derivatives of selected outputs, and the gradient of a scalar loss
built from all of those with respect to every weight.  Forward passes
propagate (value, first, second) streams through each layer; the loss
gradient re-runs the same computation in reverse, so both directions are
exact up to floating-point rounding and never rely on finite differences.

Inputs are affinely rescaled to [-1, 1] per axis before the first layer
(sine networks train poorly on O(10) raw coordinates); the chain-rule
factors stay inside the jet so every derivative is with respect to the
raw physical coordinates.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np


class CheckpointError(ValueError):
    """Raised for malformed or inconsistent checkpoint files."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture plus the input box normalization."""

    n_inputs: int
    n_outputs: int
    hidden: tuple[int, ...]
    omega0: float = 1.0
    input_offset: tuple[float, ...] = ()
    input_scale: tuple[float, ...] = ()

    def __post_init__(self):
        if self.n_inputs < 1 or self.n_outputs < 1:
            raise ValueError("network needs at least one input and output")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive")
        if self.omega0 <= 0.0:
            raise ValueError("omega0 must be positive")
        if not self.input_offset:
            object.__setattr__(self, "input_offset", (0.0,) * self.n_inputs)
        if not self.input_scale:
            object.__setattr__(self, "input_scale", (1.0,) * self.n_inputs)
        if len(self.input_offset) != self.n_inputs or len(self.input_scale) != self.n_inputs:
            raise ValueError("normalization must have one entry per input")
        if any(s <= 0.0 for s in self.input_scale):
            raise ValueError("input scales must be positive")

    @classmethod
    def for_box(cls, lo, hi, hidden, n_outputs, omega0: float = 1.0) -> "NetworkSpec":
        """Spec whose normalization maps the box [lo, hi] onto [-1, 1]^n."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("box must satisfy lo < hi componentwise")
        offset = tuple(0.5 * (lo + hi))
        scale = tuple(2.0 / (hi - lo))
        return cls(n_inputs=lo.size, n_outputs=n_outputs, hidden=tuple(hidden),
                   omega0=omega0, input_offset=offset, input_scale=scale)

    @property
    def layer_sizes(self) -> tuple[tuple[int, int], ...]:
        widths = (self.n_inputs, *self.hidden, self.n_outputs)
        return tuple(zip(widths[:-1], widths[1:]))

    @property
    def param_count(self) -> int:
        return sum(n_in * n_out + n_out for n_in, n_out in self.layer_sizes)


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> np.ndarray:
    """He-normal weights truncated at two standard deviations, zero biases."""
    chunks = []
    for n_in, n_out in spec.layer_sizes:
        sigma = math.sqrt(2.0 / n_in)
        z = rng.standard_normal((n_in, n_out))
        bad = np.abs(z) > 2.0
        while np.any(bad):
            z[bad] = rng.standard_normal(int(bad.sum()))
            bad = np.abs(z) > 2.0
        chunks.append((sigma * z).ravel())
        chunks.append(np.zeros(n_out))
    return np.concatenate(chunks)


def unpack_params(spec: NetworkSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of the flat vector as per-layer (weights, bias) pairs."""
    params = np.asarray(params)
    if params.shape != (spec.param_count,):
        raise ValueError(f"expected {spec.param_count} parameters, got {params.shape}")
    layers = []
    pos = 0
    for n_in, n_out in spec.layer_sizes:
        w = params[pos:pos + n_in * n_out].reshape(n_in, n_out)
        pos += n_in * n_out
        b = params[pos:pos + n_out]
        pos += n_out
        layers.append((w, b))
    return layers


@dataclass(frozen=True)
class Jet:
    """Network outputs with exact input derivatives at a batch of points.

    value:  (B, n_outputs)
    first:  (B, len(first_axes), n_outputs), d(output)/d(input axis)
    second: (B, len(second_axes), n_outputs), pure d2/d(input axis)^2
    """

    value: np.ndarray
    first: np.ndarray
    second: np.ndarray
    first_axes: tuple[int, ...]
    second_axes: tuple[int, ...]

    def d(self, axis: int) -> np.ndarray:
        return self.first[:, self.first_axes.index(axis), :]

    def d2(self, axis: int) -> np.ndarray:
        return self.second[:, self.second_axes.index(axis), :]


@dataclass
class JetAdjoint:
    """Loss sensitivities to the jet entries; missing pieces mean zero."""

    value: np.ndarray | None = None
    first: np.ndarray | None = None
    second: np.ndarray | None = None


class _JetCache:
    __slots__ = ("x_streams", "layers")

    def __init__(self, x_streams):
        self.x_streams = x_streams
        self.layers = []    # per hidden layer: (a_prev, z, sin_z, cos_z); output: (a_prev,)


def _input_streams(spec: NetworkSpec, x: np.ndarray,
                   first_axes: tuple[int, ...], second_axes: tuple[int, ...]) -> np.ndarray:
    b = x.shape[0]
    scale = np.asarray(spec.input_scale)
    offset = np.asarray(spec.input_offset)
    n_streams = 1 + len(first_axes) + len(second_axes)
    s = np.zeros((n_streams, b, spec.n_inputs))
    s[0] = (x - offset) * scale
    for pos, axis in enumerate(first_axes, start=1):
        s[pos, :, axis] = scale[axis]
    # second-derivative streams of the affine map are exactly zero
    return s


def _jet_forward(spec: NetworkSpec, params: np.ndarray, x: np.ndarray,
                 first_axes: tuple[int, ...], second_axes: tuple[int, ...],
                 want_cache: bool) -> tuple[np.ndarray, _JetCache | None]:
    if any(a not in first_axes for a in second_axes):
        raise ValueError("second_axes must be a subset of first_axes")
    layers = unpack_params(spec, params)
    nf, ns = len(first_axes), len(second_axes)
    fpos = {axis: 1 + i for i, axis in enumerate(first_axes)}
    spos = {axis: 1 + nf + j for j, axis in enumerate(second_axes)}
    streams = _input_streams(spec, x, first_axes, second_axes)
    n_streams, b = streams.shape[0], streams.shape[1]
    cache = _JetCache(streams) if want_cache else None

    n_hidden = len(spec.hidden)
    for li, (w, bias) in enumerate(layers):
        a_prev = streams
        z = (a_prev.reshape(n_streams * b, -1) @ w).reshape(n_streams, b, -1)
        if li < n_hidden:
            z[0] += bias
            if li == 0 and spec.omega0 != 1.0:
                z *= spec.omega0
            sin_z = np.sin(z[0])
            cos_z = np.cos(z[0])
            out = np.empty_like(z)
            out[0] = sin_z
            for axis in first_axes:
                out[fpos[axis]] = cos_z * z[fpos[axis]]
            for axis in second_axes:
                out[spos[axis]] = cos_z * z[spos[axis]] - sin_z * z[fpos[axis]] ** 2
            if want_cache:
                cache.layers.append((a_prev, z, sin_z, cos_z))
            streams = out
        else:
            z[0] += bias
            if want_cache:
                cache.layers.append((a_prev,))
            streams = z
    return streams, cache


def _to_jet(streams: np.ndarray, first_axes, second_axes) -> Jet:
    nf, ns = len(first_axes), len(second_axes)
    value = streams[0]
    first = np.swapaxes(streams[1:1 + nf], 0, 1)
    second = np.swapaxes(streams[1 + nf:1 + nf + ns], 0, 1)
    return Jet(value=value, first=first, second=second,
               first_axes=tuple(first_axes), second_axes=tuple(second_axes))


def forward(spec: NetworkSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Plain forward pass: (B, n_inputs) -> (B, n_outputs)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    streams, _ = _jet_forward(spec, params, x, (), (), want_cache=False)
    return streams[0]


def input_jet(spec: NetworkSpec, params: np.ndarray, x: np.ndarray,
              first_axes=None, second_axes=()) -> Jet:
    """Outputs with exact first and pure-second input derivatives.

    first_axes defaults to all inputs; second_axes must be a subset of it.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if first_axes is None:
        first_axes = tuple(range(spec.n_inputs))
    first_axes = tuple(first_axes)
    second_axes = tuple(second_axes)
    streams, _ = _jet_forward(spec, params, x, first_axes, second_axes,
                              want_cache=False)
    return _to_jet(streams, first_axes, second_axes)


def _jet_backward(spec: NetworkSpec, params: np.ndarray, cache: _JetCache,
                  adjoint_streams: np.ndarray, first_axes, second_axes) -> np.ndarray:
    layers = unpack_params(spec, params)
    nf = len(first_axes)
    fpos = {axis: 1 + i for i, axis in enumerate(first_axes)}
    spos = {axis: 1 + nf + j for j, axis in enumerate(second_axes)}
    n_streams = adjoint_streams.shape[0]
    b = adjoint_streams.shape[1]
    grad = np.zeros_like(np.asarray(params, dtype=float))
    grad_layers = unpack_params(spec, grad)

    bar = adjoint_streams
    n_hidden = len(spec.hidden)
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        gw, gb = grad_layers[li]
        if li == n_hidden:                      # linear output layer
            (a_prev,) = cache.layers[li]
            bar_z = bar
        else:
            a_prev, z, sin_z, cos_z = cache.layers[li]
            bar_z = np.empty_like(bar)
            bar_z[0] = bar[0] * cos_z
            for axis in first_axes:
                fp = bar[fpos[axis]]
                bar_z[fpos[axis]] = fp * cos_z
                bar_z[0] -= fp * sin_z * z[fpos[axis]]
            for axis in second_axes:
                sp = bar[spos[axis]]
                zf = z[fpos[axis]]
                bar_z[spos[axis]] = sp * cos_z
                bar_z[fpos[axis]] -= 2.0 * sp * sin_z * zf
                bar_z[0] -= sp * (sin_z * z[spos[axis]] + cos_z * zf * zf)
            if li == 0 and spec.omega0 != 1.0:
                bar_z *= spec.omega0
        gw += (a_prev.reshape(n_streams * b, -1).T
               @ bar_z.reshape(n_streams * b, -1))
        gb += bar_z[0].sum(axis=0)
        if li > 0:
            bar = (bar_z.reshape(n_streams * b, -1) @ w.T).reshape(
                n_streams, b, -1)
    return grad


@dataclass(frozen=True)
class LossTerm:
    """One additive piece of a scalar loss evaluated on its own point batch.

    `fn` maps the Jet at `points` to (scalar value, JetAdjoint with the
    sensitivities of that scalar to the jet entries).
    """

    points: np.ndarray
    fn: object
    first_axes: tuple[int, ...] = ()
    second_axes: tuple[int, ...] = ()


def loss_gradient(spec: NetworkSpec, params: np.ndarray,
                  terms: list[LossTerm]) -> tuple[list[float], np.ndarray]:
    """Values of each term and the exact gradient of their sum.

    The reverse sweep includes the sensitivity of every input-derivative
    entry, so losses built from jets (PDE residuals) differentiate exactly.
    """
    values: list[float] = []
    grad = np.zeros(spec.param_count)
    for term in terms:
        x = np.atleast_2d(np.asarray(term.points, dtype=float))
        first_axes = tuple(term.first_axes)
        second_axes = tuple(term.second_axes)
        streams, cache = _jet_forward(spec, params, x, first_axes, second_axes,
                                      want_cache=True)
        jet = _to_jet(streams, first_axes, second_axes)
        value, adj = term.fn(jet)
        values.append(float(value))
        bar = np.zeros_like(streams)
        if adj.value is not None:
            bar[0] = adj.value
        nf = len(first_axes)
        if adj.first is not None:
            bar[1:1 + nf] = np.swapaxes(adj.first, 0, 1)
        if adj.second is not None:
            bar[1 + nf:] = np.swapaxes(adj.second, 0, 1)
        grad += _jet_backward(spec, params, cache, bar, first_axes, second_axes)
    return values, grad


# ---------------------------------------------------------------------------
# Checkpoints: text header + flat little-endian float64 parameters
# ---------------------------------------------------------------------------

_CHECKPOINT_MAGIC = "gravlab-network-checkpoint 1"


def save_checkpoint(path, spec: NetworkSpec, params: np.ndarray, seed: int):
    params = np.asarray(params, dtype=float)
    if params.shape != (spec.param_count,):
        raise CheckpointError("parameter vector does not match the spec")
    header = io.StringIO()
    header.write(_CHECKPOINT_MAGIC + "\n")
    header.write(f"n_inputs {spec.n_inputs}\n")
    header.write(f"n_outputs {spec.n_outputs}\n")
    header.write("hidden " + ",".join(str(h) for h in spec.hidden) + "\n")
    header.write(f"omega0 {spec.omega0!r}\n")
    header.write("input_offset " + ",".join(repr(v) for v in spec.input_offset) + "\n")
    header.write("input_scale " + ",".join(repr(v) for v in spec.input_scale) + "\n")
    header.write(f"seed {seed}\n")
    header.write(f"param_count {spec.param_count}\n")
    header.write("end_header\n")
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("ascii"))
        fh.write(params.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[NetworkSpec, np.ndarray, int]:
    with open(path, "rb") as fh:
        blob = fh.read()
    marker = b"end_header\n"
    cut = blob.find(marker)
    if cut < 0:
        raise CheckpointError("missing end_header marker")
    try:
        lines = blob[:cut].decode("ascii").splitlines()
    except UnicodeDecodeError as exc:
        raise CheckpointError("header is not ASCII") from exc
    if not lines or lines[0] != _CHECKPOINT_MAGIC:
        raise CheckpointError("unrecognized checkpoint format")
    fields: dict[str, str] = {}
    for line in lines[1:]:
        key, _, value = line.partition(" ")
        fields[key] = value
    try:
        spec = NetworkSpec(
            n_inputs=int(fields["n_inputs"]),
            n_outputs=int(fields["n_outputs"]),
            hidden=tuple(int(h) for h in fields["hidden"].split(",")),
            omega0=float(fields["omega0"]),
            input_offset=tuple(float(v) for v in fields["input_offset"].split(",")),
            input_scale=tuple(float(v) for v in fields["input_scale"].split(",")),
        )
        seed = int(fields["seed"])
        count = int(fields["param_count"])
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"bad checkpoint header: {exc}") from exc
    if count != spec.param_count:
        raise CheckpointError("param_count disagrees with the architecture")
    payload = blob[cut + len(marker):]
    if len(payload) != 8 * count:
        raise CheckpointError("parameter payload has the wrong size")
    params = np.frombuffer(payload, dtype="<f8").astype(float)
    return spec, params, seed
