from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm

from stereoscope.errors import DimMismatch, InputError, NegativeTerm, StepOverflow
from stereoscope.flow import (
    CONVERGED,
    PARALLEL,
    T0,
    FlowState,
    VelocityField,
    cycle_objective,
    euler_integrate,
    feed_forward_predict,
    flow_match_loss,
    lerp_path,
    stratified_times,
)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def _true_field(z0, z1):
    v = np.asarray(z1) - np.asarray(z0)
    return VelocityField.uniform(lambda z, t: v)


def _linear_error(a, z1, steps):
    z = euler_integrate(VelocityField.uniform(lambda z, t: a @ z), z1, steps, 1.0 / steps)
    return np.linalg.norm(z - expm(-a) @ z1)


def test_lerp_endpoints_are_exact():
    z0, z1 = np.array([0.1, -2.0, 3.3]), np.array([1e8, 0.7, -0.3])
    assert np.array_equal(lerp_path(z0, z1, 0.0).z, z0)
    assert np.array_equal(lerp_path(z0, z1, 1.0).z, z1)
    assert lerp_path(z0, z1, 0.25).z == pytest.approx(0.75 * z0 + 0.25 * z1)
    with pytest.raises(InputError):
        lerp_path(z0, z1, 1.5)
    with pytest.raises(DimMismatch):
        lerp_path(z0, z1[:2], 0.5)


def test_one_step_euler_with_true_field_recovers_z0():
    # dyadic values make every subtraction exact
    z0 = np.array([0.5, -1.25, 3.0, 0.0])
    z1 = np.array([2.0, 0.75, -1.5, 8.0])
    assert np.array_equal(euler_integrate(_true_field(z0, z1), z1, 1, 1.0), z0)


@settings(max_examples=100, deadline=None)
@given(z0=arrays(np.float64, 6, elements=finite), z1=arrays(np.float64, 6, elements=finite))
def test_one_step_euler_recovers_z0_to_rounding(z0, z1):
    out = euler_integrate(_true_field(z0, z1), z1, 1, 1.0)
    scale = np.maximum(np.abs(z0), np.abs(z1)).max() + 1e-300
    assert np.max(np.abs(out - z0)) <= 4 * np.finfo(float).eps * scale


@settings(max_examples=50, deadline=None)
@given(
    z0=arrays(np.float64, 4, elements=finite),
    z1=arrays(np.float64, 4, elements=finite),
    n=st.integers(1, 16),
)
def test_flow_match_loss_of_true_field_is_zero(z0, z1, n):
    assert flow_match_loss(_true_field(z0, z1), z0, z1, stratified_times(n, seed=n)) == 0.0


def test_flow_match_loss_hand_value():
    z0, z1 = np.zeros(2), np.array([1.0, 1.0])
    zero = VelocityField.uniform(lambda z, t: np.zeros_like(z))
    assert flow_match_loss(zero, z0, z1, [0.1, 0.9]) == pytest.approx(2.0)
    # v(z, t) = z: residual z_t - (1, 1) = (t - 1, t - 1)
    ident = VelocityField.uniform(lambda z, t: z)
    assert flow_match_loss(ident, z0, z1, [0.5]) == pytest.approx(0.5)


def test_euler_linear_field_is_first_order():
    rng = np.random.default_rng(0)
    a = rng.normal(scale=0.5, size=(4, 4))
    z1 = rng.normal(size=4)
    e1 = _linear_error(a, z1, 100)
    e2 = _linear_error(a, z1, 200)
    assert e2 / e1 == pytest.approx(0.5, rel=0.2)


def test_euler_trace_and_schedule_checks():
    trace = []
    z = euler_integrate(VelocityField.uniform(lambda z, t: np.full_like(z, t)), np.ones(2), 4, 0.25, trace=trace)
    assert [s.t for s in trace] == [0.75, 0.5, 0.25, 0.0]
    # v = t sampled at 1, 0.75, 0.5, 0.25
    assert z == pytest.approx(np.ones(2) - 0.25 * (1 + 0.75 + 0.5 + 0.25))
    with pytest.raises(StepOverflow):
        euler_integrate(_true_field(np.zeros(2), np.ones(2)), np.ones(2), 3, 0.5)
    with pytest.raises(InputError):
        euler_integrate(_true_field(np.zeros(2), np.ones(2)), np.ones(2), 2, 0.25)
    with pytest.raises(InputError):
        euler_integrate(_true_field(np.zeros(2), np.ones(2)), np.ones(2), 0, 1.0)


def test_euler_constant_field_many_steps():
    z0, z1 = np.array([1.0, -2.0]), np.array([3.0, 5.0])
    out = euler_integrate(_true_field(z0, z1), z1, 10, 0.1)
    assert out == pytest.approx(z0, abs=1e-12)


def test_feed_forward_is_single_evaluation_at_t0():
    calls = []

    def fn(z, t):
        calls.append(t)
        return 2 * z

    out = feed_forward_predict(VelocityField.uniform(fn), np.array([1.0, 2.0]))
    assert calls == [T0] and T0 == 0.001
    assert np.array_equal(out, [2.0, 4.0])


def test_tag_routing():
    field = VelocityField.affine({PARALLEL: (np.eye(2), np.zeros(2)), CONVERGED: (-np.eye(2), np.ones(2))})
    z = np.array([1.0, 2.0])
    assert np.array_equal(field(z, 0.5, PARALLEL), z)
    assert np.array_equal(field(z, 0.5, CONVERGED), [0.0, -1.0])
    assert set(field.tags) == {PARALLEL, CONVERGED}
    with pytest.raises(InputError):
        field(z, 0.5, "s_unknown")
    bad = VelocityField.uniform(lambda z, t: np.zeros(3))
    with pytest.raises(DimMismatch):
        bad(z, 0.5)
    with pytest.raises(DimMismatch):
        field(np.zeros((2, 2)), 0.5)


def test_cycle_objective_hand_values():
    fwd = VelocityField.uniform(lambda z, t: z + 1.0)
    bwd = VelocityField.uniform(lambda z, t: z - 1.0)
    z_l, z_r = np.array([0.0, 1.0]), np.array([1.0, 2.5])
    terms = cycle_objective(fwd, bwd, z_l, z_r)
    # recon: |(1,2)-(1,2.5)|^2 + |(0,1.5)-(0,1)|^2 = 0.25 + 0.25; exact inverse -> no cycle error
    assert terms.recon == pytest.approx(0.5)
    assert terms.cycle == 0.0
    assert terms.total == pytest.approx(0.5)
    off = VelocityField.uniform(lambda z, t: z - 0.5)
    terms = cycle_objective(fwd, off, z_l, z_r, lam=0.5)
    assert terms.cycle == pytest.approx(0.5)
    assert terms.total == pytest.approx(terms.recon + 0.25)
    both = cycle_objective(fwd, off, z_l, z_r, reverse_cycle=True)
    assert both.cycle == pytest.approx(1.0)
    with pytest.raises(NegativeTerm):
        cycle_objective(fwd, bwd, z_l, z_r, lam=-1.0)


def test_stratified_times():
    assert np.allclose(stratified_times(4), [0.125, 0.375, 0.625, 0.875])
    t = stratified_times(10, seed=1)
    assert np.all((t >= np.arange(10) / 10) & (t < np.arange(1, 11) / 10))
    assert np.array_equal(t, stratified_times(10, seed=1))
    with pytest.raises(InputError):
        stratified_times(0)


def test_flow_state_bounds():
    with pytest.raises(InputError):
        FlowState(np.zeros(2), -0.1)


@settings(max_examples=50, deadline=None)
@given(z0=arrays(np.float64, 3, elements=finite), z1=arrays(np.float64, 3, elements=finite), t=st.floats(0, 1))
def test_lerp_path_is_linear(z0, z1, t):
    zt = lerp_path(z0, z1, t).z
    scale = np.maximum(np.abs(z0), np.abs(z1)).max() + 1.0
    assert np.max(np.abs((zt - z0) - t * (z1 - z0))) <= 8 * np.finfo(float).eps * scale


@settings(max_examples=40, deadline=None)
@given(z0=arrays(np.float64, 3, elements=finite), z1=arrays(np.float64, 3, elements=finite), n=st.integers(1, 64))
def test_true_field_euler_is_step_count_invariant(z0, z1, n):
    out = euler_integrate(_true_field(z0, z1), z1, n, 1.0 / n)
    scale = np.maximum(np.abs(z0), np.abs(z1)).max() + 1.0
    assert np.max(np.abs(out - z0)) <= 4 * n * np.finfo(float).eps * scale


def test_flow_match_loss_positive_for_wrong_field():
    z0, z1 = np.zeros(3), np.ones(3)
    off = VelocityField.uniform(lambda z, t: np.full(3, 1.0 + 1e-3))
    assert flow_match_loss(off, z0, z1, [0.3]) > 0.0


@settings(max_examples=40, deadline=None)
@given(lams=st.lists(st.floats(0, 10), min_size=2, max_size=6), seed=st.integers(0, 1000))
def test_cycle_objective_monotone_in_lambda(lams, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    fwd = VelocityField.uniform(lambda z, t: a @ z)
    bwd = VelocityField.uniform(lambda z, t: b @ z)
    z_l, z_r = rng.normal(size=2), rng.normal(size=2)
    totals = [cycle_objective(fwd, bwd, z_l, z_r, lam=lam).total for lam in sorted(lams)]
    assert all(y >= x for x, y in zip(totals, totals[1:]))
