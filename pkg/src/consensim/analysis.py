"""Consensus analysis: energy bookkeeping along trajectories, the conserved
quantity and closed-form consensus values available under linear velocity
feedback with constant gains, and posterior consensus detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Mode, Scenario, SystemState, Trajectory, tracking_errors
from .errors import HypothesisViolated, InvalidBounds
from .graph import Topology, is_connected, leader_reaches_all
from .protocols import GainProfile, ProtocolSpec, gain_envelope, sector_constants


def lyapunov_leaderless(state: SystemState, topo: Topology, spec: ProtocolSpec, masses) -> float:
    """Energy of a leaderless state: half the mass-weighted kinetic term plus
    half the double sum, over ordered neighbor pairs, of the coupling
    antiderivative of the position differences. Each unordered pair is
    visited in both directions, which the even antiderivative makes equal."""
    masses = np.asarray(masses, dtype=float)
    value = 0.5 * float(np.sum(masses[:, None] * state.q * state.q))
    anti = spec.coupling.antiderivative
    for i, j, w in topo.edges:
        diff = state.p[j] - state.p[i]
        value += 0.5 * w * float(np.sum(anti(diff)) + np.sum(anti(-diff)))
    return value


def lyapunov_leader(
    state: SystemState,
    topo: Topology,
    spec: ProtocolSpec,
    leader_weight: float,
    gain_lower: float,
    sector_lower: float,
) -> float:
    """Tracking energy of a leader-mode state, in leader-relative errors.

    ``leader_weight`` multiplies the leader's kinetic term; ``gain_lower``
    and ``sector_lower`` are the global lower bounds on the gains and the
    velocity sector that scale the whole expression. Requires unit masses to
    mean anything; that is the caller's obligation.
    """
    if state.leader is None:
        raise HypothesisViolated("tracking energy needs a leader state")
    if not (gain_lower > 0.0 and sector_lower > 0.0):
        raise HypothesisViolated(
            f"gain_lower and sector_lower must be > 0, got {gain_lower}, {sector_lower}")
    bk = gain_lower * sector_lower
    p_err, q_err = tracking_errors(state)
    anti = spec.coupling.antiderivative
    value = leader_weight / (2.0 * bk) * float(state.leader.q @ state.leader.q)
    value += float(np.sum(q_err * q_err)) / bk
    for i, w in topo.leader_links:
        value += 2.0 / bk * w * float(np.sum(anti(p_err[i])))
    for i, j, w in topo.edges:
        diff = p_err[j] - p_err[i]
        value += w / bk * float(np.sum(anti(diff)) + np.sum(anti(-diff)))
    return value


def tracking_gain_lower_bound(
    n_agents: int,
    gain_lower: float,
    gain_upper: float,
    sector_lower: float,
    sector_upper: float,
) -> float:
    """Smallest leader kinetic weight for which the tracking energy is
    guaranteed nonincreasing: 2N(bk*BK + 3(bk)^2 + 2(BK)^2)/(bk)^2 with
    bk = gain_lower*sector_lower and BK = gain_upper*sector_upper.

    Linear in N; invariant under a common scaling of all four bounds.
    """
    if n_agents < 1:
        raise InvalidBounds(f"n_agents must be >= 1, got {n_agents}")
    vals = (gain_lower, gain_upper, sector_lower, sector_upper)
    if any(not math.isfinite(v) or v <= 0.0 for v in vals):
        raise InvalidBounds(f"bounds must be finite and > 0, got {vals}")
    if gain_lower > gain_upper or sector_lower > sector_upper:
        raise InvalidBounds(f"lower bounds exceed upper bounds: {vals}")
    low = gain_lower * sector_lower
    high = gain_upper * sector_upper
    return 2.0 * n_agents * (low * high + 3.0 * low * low + 2.0 * high * high) / (low * low)


def _protocol_envelopes(spec: ProtocolSpec) -> tuple[tuple[float, float], tuple[float, float]]:
    # Global (gain, sector) envelopes over followers and leader, the bounds
    # the tracking machinery is stated in.
    profiles = list(spec.gains)
    sector = sector_constants(spec.velocity)
    if spec.leader_gain is not None:
        profiles.append(spec.leader_gain)
        ls = sector_constants(spec.leader_velocity)
        sector = (min(sector[0], ls[0]), max(sector[1], ls[1]))
    return gain_envelope(profiles), sector


def default_tracking_weight(scenario: Scenario) -> float:
    """Leader kinetic weight used when none is given: 1.01 times the
    guaranteed-monotone lower bound for this scenario's envelopes."""
    if scenario.mode is not Mode.LEADER:
        raise HypothesisViolated("tracking weight applies to leader scenarios only")
    (g_lo, g_hi), (s_lo, s_hi) = _protocol_envelopes(scenario.protocol)
    if g_lo <= 0.0 or s_lo <= 0.0:
        raise HypothesisViolated(
            f"gain/sector envelopes must be positive, got {(g_lo, g_hi)}, {(s_lo, s_hi)}")
    return 1.01 * tracking_gain_lower_bound(scenario.n_agents, g_lo, g_hi, s_lo, s_hi)


def _constant_gain_values(gains) -> np.ndarray:
    values = []
    for g in gains:
        if isinstance(g, GainProfile):
            if not g.is_constant:
                raise HypothesisViolated("conserved quantity needs constant gains")
            values.append(g.b0)
        else:
            values.append(float(g))
    arr = np.array(values)
    if np.any(arr <= 0.0) or not np.all(np.isfinite(arr)):
        raise HypothesisViolated("gains must be finite and > 0")
    return arr


def conserved_quantity(state: SystemState, masses, gains) -> np.ndarray:
    """Gain-weighted position plus momentum, summed over agents, per
    component. Constant along leaderless trajectories with linear velocity
    feedback and constant gains; ``gains`` may be GainProfiles (must be
    constant) or plain positive numbers."""
    if state.leader is not None:
        raise HypothesisViolated("conserved quantity is a leaderless construction")
    b = _constant_gain_values(gains)
    m = np.asarray(masses, dtype=float)
    return np.sum(b[:, None] * state.p + m[:, None] * state.q, axis=0)


def predicted_consensus_leaderless(initial: SystemState, masses, gains) -> np.ndarray:
    """Common position every agent approaches (per component) under linear
    velocity feedback, constant gains, and a connected graph: the conserved
    quantity at t=0 divided by the total gain. Connectivity is the caller's
    obligation."""
    b = _constant_gain_values(gains)
    return conserved_quantity(initial, masses, gains) / float(np.sum(b))


def predicted_consensus_leader(leader_p0, leader_q0, gain_value: float) -> np.ndarray:
    """Position every follower approaches under a constant leader gain b and
    identity leader velocity feedback: p_L(0) + q_L(0)/b, the leader's own
    limit."""
    b = float(gain_value)
    if not (math.isfinite(b) and b > 0.0):
        raise HypothesisViolated(f"prediction needs a positive constant leader gain, got {b}")
    p0 = np.atleast_1d(np.asarray(leader_p0, dtype=float))
    q0 = np.atleast_1d(np.asarray(leader_q0, dtype=float))
    return p0 + q0 / b


@dataclass(frozen=True)
class Prediction:
    """Closed-form consensus value when the scenario's hypotheses allow one,
    otherwise the reason there is none."""

    value: np.ndarray | None
    reason: str | None

    @property
    def available(self) -> bool:
        return self.value is not None


def predict_consensus(scenario: Scenario) -> Prediction:
    """Closed-form consensus value of a scenario, or why none exists.

    Leaderless scenarios need linear velocity feedback, constant gains, and
    a connected graph; leader scenarios need a constant leader gain, linear
    leader velocity feedback, and a leader path to every agent.
    """
    spec = scenario.protocol
    if scenario.mode is Mode.LEADERLESS:
        if not spec.velocity.is_linear:
            return Prediction(None, "nonlinear velocity feedback has no closed-form consensus value")
        if not all(g.is_constant for g in spec.gains):
            return Prediction(None, "time-varying gains have no closed-form consensus value")
        if not is_connected(scenario.topology):
            return Prediction(None, "graph not connected")
        value = predicted_consensus_leaderless(scenario.initial, scenario.masses, spec.gains)
        return Prediction(value, None)
    if not spec.leader_velocity.is_linear:
        return Prediction(None, "nonlinear leader velocity feedback has no closed-form target")
    if not spec.leader_gain.is_constant:
        return Prediction(None, "a time-varying leader gain has no closed-form target")
    if not leader_reaches_all(scenario.topology):
        return Prediction(None, "leader does not reach every agent")
    p0, q0 = scenario.initial.leader
    return Prediction(predicted_consensus_leader(p0, q0, spec.leader_gain.b0), None)


@dataclass(frozen=True)
class ConsensusReport:
    """Posterior verdict on one trajectory.

    ``achieved`` means both criteria hold at the last sample and from
    ``t_consensus`` onward; spreads are leader-relative when a leader is
    present. ``predicted_value`` is filled only when the scenario was given
    and its hypotheses admit a closed form, otherwise ``prediction_reason``
    says why not.
    """

    achieved: bool
    t_consensus: float | None
    final_spread: float
    final_speed: float
    observed_value: np.ndarray
    predicted_value: np.ndarray | None
    prediction_reason: str | None
    pos_tol: float
    vel_tol: float


def detect_consensus(
    traj: Trajectory,
    pos_tol: float,
    vel_tol: float,
    scenario: Scenario | None = None,
) -> ConsensusReport:
    """Decide whether the trajectory reached (and kept) consensus.

    Per sample, the position spread is the largest pairwise position gap
    (largest distance to the leader when one is present) and the speed is
    the largest velocity magnitude (leader-relative when present). Consensus
    is achieved when both drop to the tolerances and stay there through the
    final sample; t_consensus is the earliest sample time of that trailing
    run. The observed value is the mean final agent position per component.
    """
    if not (pos_tol > 0.0 and vel_tol > 0.0):
        raise ValueError("tolerances must be > 0")
    has_leader = traj.samples[0].leader is not None
    spreads = np.empty(len(traj.samples))
    speeds = np.empty(len(traj.samples))
    for idx, s in enumerate(traj.samples):
        if has_leader:
            spreads[idx] = np.abs(s.p - s.leader.p).max()
            speeds[idx] = np.abs(s.q - s.leader.q).max()
        else:
            spreads[idx] = (s.p.max(axis=0) - s.p.min(axis=0)).max()
            speeds[idx] = np.abs(s.q).max()
    ok = (spreads <= pos_tol) & (speeds <= vel_tol)

    start = len(ok)
    while start > 0 and ok[start - 1]:
        start -= 1
    achieved = start < len(ok)

    predicted = None
    reason = None if scenario is not None else "no scenario attached"
    if scenario is not None:
        prediction = predict_consensus(scenario)
        predicted, reason = prediction.value, prediction.reason
    return ConsensusReport(
        achieved=achieved,
        t_consensus=traj.samples[start].t if achieved else None,
        final_spread=float(spreads[-1]),
        final_speed=float(speeds[-1]),
        observed_value=traj.samples[-1].p.mean(axis=0),
        predicted_value=predicted,
        prediction_reason=reason,
        pos_tol=float(pos_tol),
        vel_tol=float(vel_tol),
    )


def lyapunov_series(
    traj: Trajectory,
    scenario: Scenario,
    leader_weight: float | None = None,
) -> list[tuple[float, float]]:
    """Energy at every sample of the trajectory, as (t, value) pairs.

    Leaderless scenarios use the leaderless energy with the scenario's
    masses; leader scenarios use the tracking energy with the scenario's
    gain/sector envelopes and ``leader_weight`` (default: 1.01 times the
    guaranteed-monotone bound).
    """
    topo, spec = scenario.topology, scenario.protocol
    if scenario.mode is Mode.LEADERLESS:
        return [(s.t, lyapunov_leaderless(s, topo, spec, scenario.masses)) for s in traj.samples]
    if leader_weight is None:
        leader_weight = default_tracking_weight(scenario)
    (g_lo, _), (s_lo, _) = _protocol_envelopes(spec)
    return [(s.t, lyapunov_leader(s, topo, spec, leader_weight, g_lo, s_lo))
            for s in traj.samples]


def conserved_series(traj: Trajectory, scenario: Scenario) -> list[tuple[float, np.ndarray]]:
    """Conserved quantity at every sample; hypotheses checked once here."""
    if scenario.mode is not Mode.LEADERLESS:
        raise HypothesisViolated("conserved quantity is a leaderless construction")
    if not scenario.protocol.velocity.is_linear:
        raise HypothesisViolated("conservation needs linear velocity feedback")
    return [(s.t, conserved_quantity(s, scenario.masses, scenario.protocol.gains))
            for s in traj.samples]


def conservation_drift(traj: Trajectory, scenario: Scenario) -> float:
    """Largest relative excursion of the conserved quantity over the run:
    max_t |value(t) - value(0)|_inf / (1 + |value(0)|_inf)."""
    series = conserved_series(traj, scenario)
    initial = series[0][1]
    scale = 1.0 + float(np.abs(initial).max())
    worst = max(float(np.abs(value - initial).max()) for _, value in series)
    return worst / scale
