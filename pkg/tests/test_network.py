"""Tests for the dense sine network: forward pass, exact input derivatives,
parameter gradients, initialization, and checkpointing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gravlab.network import (
    CheckpointError,
    JetAdjoint,
    LossTerm,
    NetworkSpec,
    forward,
    init_params,
    input_jet,
    load_checkpoint,
    loss_gradient,
    save_checkpoint,
)


def random_net(hidden, n_inputs=2, n_outputs=3, omega0=1.0, seed=0):
    spec = NetworkSpec(n_inputs=n_inputs, n_outputs=n_outputs,
                       hidden=tuple(hidden), omega0=omega0)
    params = init_params(spec, np.random.default_rng(seed))
    return spec, params


def relative_error(got, reference):
    scale = max(float(np.max(np.abs(reference))), 1e-12)
    return float(np.max(np.abs(got - reference))) / scale


def test_forward_matches_hand_computation():
    # One hidden unit: y = w2 sin(omega0 (w1 xn + b1)) + b2 with
    # xn = (x - offset) * scale, parameters packed [w1, b1, w2, b2].
    spec = NetworkSpec(1, 1, (1,), omega0=2.0,
                       input_offset=(0.5,), input_scale=(2.0,))
    params = np.array([0.7, 0.3, 1.5, -0.2])
    x = 1.3
    xn = (x - 0.5) * 2.0
    expected = 1.5 * math.sin(2.0 * (0.7 * xn + 0.3)) - 0.2
    assert forward(spec, params, np.array([[x]]))[0, 0] == pytest.approx(
        expected, rel=1e-15)


def test_omega0_scales_only_the_first_layer():
    spec = NetworkSpec(1, 1, (1, 1), omega0=2.0)
    params = np.array([0.7, 0.3, 0.9, 0.1, 1.5, -0.2])
    h1 = math.sin(2.0 * (0.7 * 1.3 + 0.3))
    h2 = math.sin(0.9 * h1 + 0.1)
    assert forward(spec, params, np.array([[1.3]]))[0, 0] == pytest.approx(
        1.5 * h2 - 0.2, rel=1e-15)


@pytest.mark.parametrize("hidden,omega0", [((8,), 1.0), ((8, 8), 3.0),
                                           ((32, 32, 32), 1.0)])
def test_jet_first_derivatives_match_central_differences(hidden, omega0):
    spec, params = random_net(hidden, omega0=omega0)
    rng = np.random.default_rng(7)
    x = rng.uniform(-1.0, 1.0, size=(20, spec.n_inputs))
    jet = input_jet(spec, params, x, second_axes=tuple(range(spec.n_inputs)))
    h = 1e-5
    for axis in range(spec.n_inputs):
        e = np.zeros(spec.n_inputs)
        e[axis] = h
        fd = (forward(spec, params, x + e) - forward(spec, params, x - e)) / (2 * h)
        assert relative_error(jet.d(axis), fd) < 1e-6


@pytest.mark.parametrize("hidden,omega0", [((8,), 1.0), ((8, 8), 3.0),
                                           ((32, 32, 32), 1.0)])
def test_jet_second_derivatives_match_central_differences(hidden, omega0):
    spec, params = random_net(hidden, omega0=omega0)
    rng = np.random.default_rng(11)
    x = rng.uniform(-1.0, 1.0, size=(20, spec.n_inputs))
    jet = input_jet(spec, params, x, second_axes=tuple(range(spec.n_inputs)))
    # Larger step than for first derivatives: the second difference divides
    # by h^2, so h = 1e-5 would drown in cancellation noise.
    h = 1e-3
    for axis in range(spec.n_inputs):
        e = np.zeros(spec.n_inputs)
        e[axis] = h
        fd = (forward(spec, params, x + e) - 2 * forward(spec, params, x)
              + forward(spec, params, x - e)) / h**2
        assert relative_error(jet.d2(axis), fd) < 1e-4


def test_zero_last_layer_means_constant_output_and_zero_derivatives():
    spec, params = random_net((8, 8))
    n_last = spec.hidden[-1] * spec.n_outputs + spec.n_outputs
    params = params.copy()
    params[-n_last:] = 0.0
    bias = np.array([0.4, -1.1, 2.0])
    params[-spec.n_outputs:] = bias
    x = np.random.default_rng(3).uniform(-1, 1, size=(10, 2))
    jet = input_jet(spec, params, x, second_axes=(0, 1))
    assert np.allclose(jet.value, bias, atol=0)
    assert np.all(jet.first == 0.0)
    assert np.all(jet.second == 0.0)


def test_second_axes_must_be_subset_of_first_axes():
    spec, params = random_net((8,))
    with pytest.raises(ValueError, match="subset"):
        input_jet(spec, params, np.zeros((4, 2)),
                  first_axes=(0,), second_axes=(1,))


def _quadratic_term(points, first_axes, second_axes):
    """Loss mean(u^2) + mean(u_x^2) + mean(u_xx^2), exercising every
    adjoint slot."""

    def fn(jet):
        b = jet.value.shape[0]
        value = (np.sum(jet.value**2) + np.sum(jet.first**2)
                 + np.sum(jet.second**2)) / b
        bar = JetAdjoint(value=2.0 * jet.value / b,
                         first=2.0 * jet.first / b,
                         second=2.0 * jet.second / b)
        return value, bar

    return LossTerm(points=points, fn=fn, first_axes=first_axes,
                    second_axes=second_axes)


@pytest.mark.parametrize("hidden", [(8, 8), (32, 32, 32)])
def test_loss_gradient_matches_finite_differences(hidden):
    spec, params = random_net(hidden, omega0=2.0)
    rng = np.random.default_rng(5)
    points = rng.uniform(-1.0, 1.0, size=(50, spec.n_inputs))
    terms = [_quadratic_term(points, (0, 1), (0,)),
             _quadratic_term(points[:10], (1,), ())]

    values, grad = loss_gradient(spec, params, terms)
    assert len(values) == 2

    def total(p):
        vals, _ = loss_gradient(spec, params=p, terms=terms)
        return sum(vals)

    h = 1e-6
    idx = rng.choice(params.size, size=40, replace=False)
    fd = np.empty(idx.size)
    for j, i in enumerate(idx):
        up, dn = params.copy(), params.copy()
        up[i] += h
        dn[i] -= h
        fd[j] = (total(up) - total(dn)) / (2 * h)
    assert relative_error(grad[idx], fd) < 1e-5


def test_loss_gradient_value_matches_term_evaluation():
    spec, params = random_net((8,))
    points = np.random.default_rng(9).uniform(-1, 1, size=(20, 2))
    term = _quadratic_term(points, (0, 1), (0, 1))
    values, _ = loss_gradient(spec, params, [term])
    jet = input_jet(spec, params, points, second_axes=(0, 1))
    direct, _ = term.fn(jet)
    assert values[0] == pytest.approx(direct, rel=1e-14)


def test_init_params_deterministic_truncated_and_zero_biased():
    spec = NetworkSpec(2, 3, (16, 16))
    a = init_params(spec, np.random.default_rng(42))
    b = init_params(spec, np.random.default_rng(42))
    assert np.array_equal(a, b)
    c = init_params(spec, np.random.default_rng(43))
    assert not np.array_equal(a, c)

    offset = 0
    for n_in, n_out in spec.layer_sizes:
        w = a[offset:offset + n_in * n_out]
        offset += n_in * n_out
        bias = a[offset:offset + n_out]
        offset += n_out
        sigma = math.sqrt(2.0 / n_in)
        assert np.max(np.abs(w)) <= 2.0 * sigma
        assert np.all(bias == 0.0)
    assert offset == a.size == spec.param_count


def test_checkpoint_round_trip_is_bitwise(tmp_path):
    spec = NetworkSpec(2, 3, (8, 8), omega0=6.0,
                       input_offset=(0.5, 1.5), input_scale=(0.1, 2.0))
    params = init_params(spec, np.random.default_rng(1))
    path = tmp_path / "net.bin"
    save_checkpoint(path, spec, params, seed=17)
    spec2, params2, seed2 = load_checkpoint(path)
    assert spec2 == spec
    assert seed2 == 17
    assert np.array_equal(params2, params)


def test_checkpoint_rejects_mismatched_parameter_vector(tmp_path):
    spec = NetworkSpec(1, 1, (4,))
    with pytest.raises(CheckpointError, match="does not match"):
        save_checkpoint(tmp_path / "x.bin", spec, np.zeros(3), seed=0)


def test_checkpoint_rejects_corruption(tmp_path):
    spec = NetworkSpec(1, 2, (4,))
    params = init_params(spec, np.random.default_rng(0))
    path = tmp_path / "net.bin"
    save_checkpoint(path, spec, params, seed=0)
    blob = path.read_bytes()

    truncated = tmp_path / "trunc.bin"
    truncated.write_bytes(blob[:-8])
    with pytest.raises(CheckpointError, match="payload"):
        load_checkpoint(truncated)

    garbled = tmp_path / "garbled.bin"
    garbled.write_bytes(b"not a checkpoint\n" + blob)
    with pytest.raises(CheckpointError):
        load_checkpoint(garbled)

    headless = tmp_path / "headless.bin"
    headless.write_bytes(blob.replace(b"end_header\n", b""))
    with pytest.raises(CheckpointError, match="end_header"):
        load_checkpoint(headless)


def test_spec_validation():
    with pytest.raises(ValueError):
        NetworkSpec(0, 1, (4,))
    with pytest.raises(ValueError):
        NetworkSpec(1, 1, ())
    with pytest.raises(ValueError):
        NetworkSpec(1, 1, (4,), omega0=0.0)
    with pytest.raises(ValueError):
        NetworkSpec(1, 1, (4,), input_scale=(0.0,))
    with pytest.raises(ValueError):
        NetworkSpec.for_box([0.0], [0.0], (4,), 1)


def test_for_box_maps_corners_to_unit_cube():
    spec = NetworkSpec.for_box([0.0, -2.0], [4.0, 2.0], (4,), 1)
    lo = (np.array([0.0, -2.0]) - spec.input_offset) * spec.input_scale
    hi = (np.array([4.0, 2.0]) - spec.input_offset) * spec.input_scale
    assert np.allclose(lo, -1.0) and np.allclose(hi, 1.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(2, 6),
       st.integers(0, 2**32 - 1))
def test_first_derivative_consistency_property(n_in, n_out, width, seed):
    spec = NetworkSpec(n_in, n_out, (width,))
    params = init_params(spec, np.random.default_rng(seed))
    x = np.random.default_rng(seed + 1).uniform(-1, 1, size=(5, n_in))
    jet = input_jet(spec, params, x)
    h = 1e-5
    for axis in range(n_in):
        e = np.zeros(n_in)
        e[axis] = h
        fd = (forward(spec, params, x + e) - forward(spec, params, x - e)) / (2 * h)
        assert relative_error(jet.d(axis), fd) < 1e-6
