"""Shape families, sector bounds, standing-assumption checks, and the
per-agent reference control laws."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensim import (CouplingShape, GainProfile, ProtocolSpec, SystemState,
                       VelocityShape, build_topology, gain_envelope, leader_control,
                       leaderless_control, sector_constants, validate_assumptions)
from consensim.dynamics import LeaderState

# Sector bounds of z + 0.5*sin(z): the lower constant sits at the first
# positive minimum of sin(z)/z (near z = 4.4934), the upper at z = 0.
SECTOR_HALF = (0.8913831858943891, 1.5)

finite_z = st.floats(min_value=-30.0, max_value=30.0, allow_nan=False)


def sine_shape(omega=0.5):
    return VelocityShape(kind="sine_perturbed", omega=omega)


def test_velocity_shapes_evaluate():
    lin = VelocityShape(kind="linear")
    assert lin.evaluate(2.5) == 2.5
    assert lin.is_linear
    s = sine_shape()
    assert s.evaluate(2.0) == pytest.approx(2.0 + 0.5 * math.sin(2.0), abs=0, rel=1e-15)
    assert s.derivative(2.0) == pytest.approx(1.0 + 0.5 * math.cos(2.0), abs=0, rel=1e-15)
    assert not s.is_linear
    assert sine_shape(0.0).is_linear


def test_velocity_shape_rejects_bad_parameters():
    with pytest.raises(ValueError):
        VelocityShape(kind="sine_perturbed", omega=-0.1)
    with pytest.raises(ValueError):
        VelocityShape(kind="linear", omega=0.3)
    with pytest.raises(ValueError):
        VelocityShape(kind="cubic")


def test_coupling_shapes_evaluate():
    lin = CouplingShape(kind="linear")
    cubic = CouplingShape(kind="linear_plus_cubic")
    assert lin.evaluate(2.0) == 2.0
    assert cubic.evaluate(2.0) == 10.0
    assert lin.antiderivative(2.0) == 2.0
    assert cubic.antiderivative(2.0) == 6.0


@given(finite_z)
def test_coupling_is_odd(z):
    for kind in ("linear", "linear_plus_cubic"):
        shape = CouplingShape(kind=kind)
        assert shape.evaluate(-z) == -shape.evaluate(z)
        assert shape.evaluate(0.0) == 0.0


@given(finite_z)
def test_coupling_antiderivative_is_even_nonnegative_and_consistent(z):
    for kind in ("linear", "linear_plus_cubic"):
        shape = CouplingShape(kind=kind)
        big = shape.antiderivative(z)
        assert big == shape.antiderivative(-z)
        assert big >= 0.0
        eps = 1e-6 * (1.0 + abs(z))
        slope = (shape.antiderivative(z + eps) - shape.antiderivative(z - eps)) / (2 * eps)
        assert slope == pytest.approx(float(shape.evaluate(z)), rel=1e-5, abs=1e-5)


@given(finite_z, st.floats(min_value=0.0, max_value=0.9))
def test_velocity_shape_is_odd(z, omega):
    shape = VelocityShape(kind="sine_perturbed", omega=omega)
    assert shape.evaluate(-z) == -shape.evaluate(z)


def test_gain_profiles():
    const = GainProfile(kind="constant", b0=0.4)
    assert const.evaluate(17.3) == 0.4
    assert const.bounds() == (0.4, 0.4)
    assert const.is_constant

    wavy = GainProfile(kind="cosine", b0=0.5, amplitude=0.15)
    assert wavy.evaluate(0.0) == pytest.approx(0.65, abs=1e-15)
    assert wavy.evaluate(math.pi) == pytest.approx(0.35, abs=1e-15)
    assert wavy.bounds() == (0.35, 0.65)
    assert not wavy.is_constant

    with pytest.raises(ValueError):
        GainProfile(kind="constant", b0=1.0, amplitude=0.2)


def test_gain_envelope_covers_all_profiles():
    profiles = [GainProfile(b0=0.2), GainProfile(kind="cosine", b0=1.0, amplitude=0.15)]
    assert gain_envelope(profiles) == (0.2, 1.15)


def test_sector_constants_linear_is_exact():
    assert sector_constants(VelocityShape(kind="linear")) == (1.0, 1.0)
    assert sector_constants(sine_shape(0.0)) == (1.0, 1.0)


def test_sector_constants_against_independent_minimizer():
    lo, hi = sector_constants(sine_shape(0.5))
    assert (lo, hi) == pytest.approx(SECTOR_HALF, abs=1e-12)

    from scipy.optimize import minimize_scalar
    ratio = lambda z: 1.0 + 0.5 * math.sin(z) / z
    bracket = minimize_scalar(ratio, bounds=(3.0, 6.0), method="bounded",
                              options={"xatol": 1e-12})
    assert lo == pytest.approx(ratio(bracket.x), abs=1e-9)
    assert hi == pytest.approx(1.5, abs=1e-12)


@given(st.floats(min_value=0.01, max_value=0.9),
       st.floats(min_value=-40.0, max_value=40.0).filter(lambda z: abs(z) > 1e-6))
@settings(max_examples=300)
def test_sector_containment(omega, z):
    # k_lo * z^2 <= z * f(z) <= k_hi * z^2 for every nonzero z in range.
    shape = VelocityShape(kind="sine_perturbed", omega=omega)
    lo, hi = sector_constants(shape)
    product = z * float(shape.evaluate(z))
    tol = 1e-9 * z * z
    assert lo * z * z - tol <= product <= hi * z * z + tol


def test_protocol_spec_leader_fields_come_together():
    gains = (GainProfile(b0=1.0),)
    with pytest.raises(ValueError):
        ProtocolSpec(velocity=VelocityShape(), coupling=CouplingShape(), gains=gains,
                     leader_gain=GainProfile(b0=0.6))
    with pytest.raises(ValueError):
        ProtocolSpec(velocity=VelocityShape(), coupling=CouplingShape(), gains=())


def all_pass_spec():
    return ProtocolSpec(
        velocity=sine_shape(),
        coupling=CouplingShape(kind="linear_plus_cubic"),
        gains=(GainProfile(b0=0.2), GainProfile(kind="cosine", b0=0.4, amplitude=0.15)),
    )


def test_validate_assumptions_all_pass():
    report = validate_assumptions(all_pass_spec())
    assert report.all_passed
    assert report.blocking_failures == ()
    assert report.sector == pytest.approx(SECTOR_HALF, abs=1e-12)
    assert report.gain_bounds == pytest.approx((0.2, 0.55), abs=1e-15)
    names = {c.name for c in report.checks}
    assert "coupling_odd" in names and "velocity_sector_positive" in names


def test_validate_assumptions_flags_gain_floor_violation():
    spec = ProtocolSpec(
        velocity=VelocityShape(),
        coupling=CouplingShape(),
        gains=(GainProfile(kind="cosine", b0=0.2, amplitude=0.25),),
    )
    report = validate_assumptions(spec)
    assert not report.all_passed
    failing = report.blocking_failures
    assert len(failing) == 1
    assert failing[0].name == "gain_1_positive_floor"


def test_validate_assumptions_covers_leader_shapes():
    spec = ProtocolSpec(
        velocity=VelocityShape(),
        coupling=CouplingShape(),
        gains=(GainProfile(b0=0.5),),
        leader_velocity=sine_shape(),
        leader_gain=GainProfile(b0=0.6),
    )
    report = validate_assumptions(spec)
    assert report.all_passed
    # Combined sector widens to cover the leader's nonlinear shape.
    assert report.velocity_sector == (1.0, 1.0)
    assert report.sector == pytest.approx(SECTOR_HALF, abs=1e-12)
    assert report.gain_bounds == (0.5, 0.6)


def chain6_state_and_wiring():
    topo = build_topology(6, [(i, i + 1, 0.2 * (2 * i + 1)) for i in range(1, 6)])
    state = SystemState(t=0.0,
                        p=[0.2 * i for i in range(1, 7)],
                        q=[0.3 * i for i in range(1, 7)])
    spec = ProtocolSpec(
        velocity=VelocityShape(),
        coupling=CouplingShape(kind="linear_plus_cubic"),
        gains=tuple(GainProfile(b0=0.2 * i) for i in range(1, 7)),
    )
    return topo, state, spec


def test_leaderless_control_hand_computed():
    # Agent 1: -0.2*0.3 + 0.6*(0.2 + 0.2^3) = 0.0648; the end agent sees one
    # neighbor only.
    topo, state, spec = chain6_state_and_wiring()
    u1 = leaderless_control(0, state, 0.0, topo, spec)
    assert u1 == pytest.approx(0.0648, abs=1e-15)
    # Agent 3 sees both neighbors at gap +-0.2 with weights 1.0 and 1.4:
    # -0.6*0.9 + 1.0*(-0.208) + 1.4*(0.208)
    u3 = leaderless_control(2, state, 0.0, topo, spec)
    assert u3 == pytest.approx(-0.54 - 0.208 + 1.4 * 0.208, abs=1e-14)


def test_leader_control_hand_computed():
    # Five-agent chain with a leader linked to agent 1, evaluated at t = 0:
    # -0.35*(0.4 + 0.5*sin 0.4) + 0.9*h(-0.3) + 1.0*h(1.3), h(z) = z + z^3.
    topo = build_topology(5, [(i, i + 1, 0.3 * (2 * i + 1)) for i in range(1, 5)],
                          leader_links=[(1, 1.0)])
    state = SystemState(t=0.0,
                        p=[-0.3 * i for i in range(1, 6)],
                        q=[0.4 * i for i in range(1, 6)],
                        leader=LeaderState(np.array([1.0]), np.array([0.3])))
    spec = ProtocolSpec(
        velocity=sine_shape(),
        coupling=CouplingShape(kind="linear_plus_cubic"),
        gains=tuple(GainProfile(kind="cosine", b0=0.2 * i, amplitude=0.15)
                    for i in range(1, 6)),
        leader_velocity=VelocityShape(),
        leader_gain=GainProfile(b0=0.6),
    )
    u1 = leader_control(0, state, state.leader, 0.0, topo, spec)
    assert u1 == pytest.approx(2.9945517900959864, abs=1e-14)
    # Unlinked agents feel no leader term.
    u2_leaderless = leaderless_control(1, state, 0.0, topo, spec)
    u2 = leader_control(1, state, state.leader, 0.0, topo, spec)
    assert u2 == u2_leaderless
