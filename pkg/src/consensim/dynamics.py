"""Closed-loop dynamics and fixed-step integration.

Each agent is a double integrator with its own mass, driven by the velocity
damping and position coupling defined in :mod:`consensim.protocols`. The
optional leader is a self-damped double integrator that nobody feeds back
into: coupling is one-way, leader to followers.

Integration is classical fixed-step RK4. Runs are deterministic: the same
scenario produces bitwise-identical trajectories on a given platform.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import HypothesisViolated, NoLeader, NonFiniteState, ValidationFailed
from .graph import Topology, is_connected, leader_reaches_all
from .protocols import AssumptionReport, ProtocolSpec, validate_assumptions


class Mode(str, Enum):
    LEADERLESS = "leaderless"
    LEADER = "leader"


class LeaderState(NamedTuple):
    """Leader position and velocity, each of shape (n_dims,)."""

    p: np.ndarray
    q: np.ndarray


def _agent_array(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{what} must be (n_agents, n_dims) or (n_agents,), got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SystemState:
    """Positions and velocities of all agents at time t.

    ``p`` and ``q`` have shape (n_agents, n_dims); a 1-D array is read as
    n_agents scalar coordinates. Arrays are copied on construction and
    frozen so states can be shared safely.
    """

    t: float
    p: np.ndarray
    q: np.ndarray
    leader: LeaderState | None = None

    def __post_init__(self):
        p = _agent_array(self.p, "positions")
        q = _agent_array(self.q, "velocities")
        if p.shape != q.shape:
            raise ValueError(f"position shape {p.shape} != velocity shape {q.shape}")
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        if self.leader is not None:
            raw_p, raw_q = self.leader
            lp = np.atleast_1d(np.array(raw_p, dtype=float))
            lq = np.atleast_1d(np.array(raw_q, dtype=float))
            if lp.shape != (p.shape[1],) or lq.shape != (p.shape[1],):
                raise ValueError("leader state dimension does not match the agents")
            lp.flags.writeable = False
            lq.flags.writeable = False
            object.__setattr__(self, "leader", LeaderState(lp, lq))

    @property
    def n_agents(self) -> int:
        return self.p.shape[0]

    @property
    def n_dims(self) -> int:
        return self.p.shape[1]


@dataclass(frozen=True)
class StateDerivative:
    """Time derivative of a SystemState under a scenario's closed loop."""

    p_dot: np.ndarray
    q_dot: np.ndarray
    leader_p_dot: np.ndarray | None = None
    leader_q_dot: np.ndarray | None = None


@dataclass(frozen=True)
class IntegratorSettings:
    dt: float = 1e-3
    t_end: float = 50.0
    record_every: int = 100


@dataclass(frozen=True)
class Scenario:
    """Complete description of one run: who the agents are, how they are
    wired, which protocol drives them, where they start, and how to
    integrate. Immutable; derive variants with :func:`dataclasses.replace`."""

    mode: Mode
    masses: tuple[float, ...]
    topology: Topology
    protocol: ProtocolSpec
    initial: SystemState
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    pos_tol: float = 1e-3
    vel_tol: float = 1e-3
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))

    @property
    def n_agents(self) -> int:
        return self.topology.n_agents

    @property
    def n_dims(self) -> int:
        return self.initial.n_dims


@dataclass(frozen=True)
class ScenarioValidation:
    """Blocking errors, advisory warnings, and the assumption report."""

    errors: tuple[str, ...]
    warnings: tuple[str, ...]
    assumptions: AssumptionReport

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class Trajectory:
    """Recorded samples of one run, first sample being the initial state,
    evenly spaced by dt*record_every. ``scenario_fingerprint`` ties the data
    back to the exact scenario content that produced it."""

    samples: tuple[SystemState, ...]
    scenario_fingerprint: str

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def positions(self) -> np.ndarray:
        """Stacked agent positions, shape (n_samples, n_agents, n_dims)."""
        return np.stack([s.p for s in self.samples])

    def velocities(self) -> np.ndarray:
        return np.stack([s.q for s in self.samples])

    def leader_positions(self) -> np.ndarray:
        if self.samples[0].leader is None:
            raise NoLeader("trajectory has no leader")
        return np.stack([s.leader.p for s in self.samples])

    def leader_velocities(self) -> np.ndarray:
        if self.samples[0].leader is None:
            raise NoLeader("trajectory has no leader")
        return np.stack([s.leader.q for s in self.samples])


def validate_scenario(scenario: Scenario) -> ScenarioValidation:
    """Run every blocking and advisory rule against the scenario.

    Blocking: structural consistency (shapes, masses, integrator grid),
    strict positivity of every gain profile, and the graph hypothesis for
    the mode (connected when leaderless, leader-reaches-all when tracking).
    Advisory: sampled shape checks and unit masses in leader mode.
    """
    errors: list[str] = []
    warnings: list[str] = []
    topo = scenario.topology
    state = scenario.initial
    n = topo.n_agents

    if len(scenario.masses) != n:
        errors.append(f"masses length {len(scenario.masses)} != n_agents {n}")
    if any(not math.isfinite(m) or m <= 0.0 for m in scenario.masses):
        errors.append("masses must be finite and > 0")
    if len(scenario.protocol.gains) != n:
        errors.append(f"gains length {len(scenario.protocol.gains)} != n_agents {n}")
    if state.p.shape != (n, state.n_dims):
        errors.append(f"initial state has {state.n_agents} agents, topology has {n}")
    if state.t != 0.0:
        errors.append(f"initial state must start at t=0, got t={state.t}")
    if not (np.all(np.isfinite(state.p)) and np.all(np.isfinite(state.q))):
        errors.append("initial positions/velocities must be finite")

    if scenario.mode is Mode.LEADER:
        if state.leader is None:
            errors.append("leader mode requires an initial leader state")
        elif not (np.all(np.isfinite(state.leader.p)) and np.all(np.isfinite(state.leader.q))):
            errors.append("initial leader state must be finite")
        if not scenario.protocol.has_leader:
            errors.append("leader mode requires leader_velocity and leader_gain")
        if not topo.leader_links:
            errors.append("leader mode requires at least one leader link")
        elif not leader_reaches_all(topo):
            errors.append("leader has no path to every agent")
        if any(m != 1.0 for m in scenario.masses):
            warnings.append(
                "tracking analysis assumes unit masses; results hold only empirically otherwise")
    else:
        if state.leader is not None:
            errors.append("leaderless mode cannot carry an initial leader state")
        if scenario.protocol.has_leader:
            errors.append("leaderless mode cannot carry leader_velocity/leader_gain")
        if topo.leader_links:
            errors.append("leaderless mode cannot carry leader links")
        if not is_connected(topo):
            errors.append("graph not connected")

    iset = scenario.integrator
    if not (math.isfinite(iset.dt) and iset.dt > 0.0):
        errors.append(f"dt must be finite and > 0, got {iset.dt}")
    if not (math.isfinite(iset.t_end) and iset.t_end >= iset.dt > 0.0):
        errors.append(f"t_end must be at least dt, got t_end={iset.t_end} dt={iset.dt}")
    if iset.record_every < 1:
        errors.append(f"record_every must be >= 1, got {iset.record_every}")
    if not errors:
        n_steps = round(iset.t_end / iset.dt)
        if n_steps < 1 or abs(n_steps * iset.dt - iset.t_end) > 1e-9 * max(1.0, iset.t_end):
            errors.append("t_end must be a whole number of dt steps")
        elif n_steps % iset.record_every != 0:
            errors.append(
                "t_end must cover a whole number of recording intervals (dt*record_every)")
    if not (scenario.pos_tol > 0.0 and scenario.vel_tol > 0.0):
        errors.append("consensus tolerances must be > 0")

    assumptions = validate_assumptions(scenario.protocol)
    for check in assumptions.blocking_failures:
        errors.append(f"assumption check failed: {check.name} ({check.detail})")
    for check in assumptions.checks:
        if not check.blocking and not check.passed:
            warnings.append(f"advisory assumption check failed: {check.name} ({check.detail})")

    return ScenarioValidation(tuple(errors), tuple(warnings), assumptions)


class _Compiled:
    """Scenario lowered to flat numpy arrays for the integration hot path.

    The state vector is [p.ravel(), q.ravel(), leader_p, leader_q]. Neighbor
    sums are a gather along precomputed edge endpoints followed by a dense
    scatter matmul, which keeps evaluation order fixed and runs bitwise
    reproducibly.
    """

    def __init__(self, scenario: Scenario):
        topo = scenario.topology
        spec = scenario.protocol
        self.n = topo.n_agents
        self.dims = scenario.initial.n_dims
        self.block = self.n * self.dims
        self.has_leader = scenario.mode is Mode.LEADER
        self.inv_mass = 1.0 / np.array(scenario.masses)[:, None]

        edges = topo.edges
        self.n_edges = len(edges)
        if self.n_edges:
            self.edge_i = np.array([e[0] for e in edges])
            self.edge_j = np.array([e[1] for e in edges])
            self.edge_w = np.array([e[2] for e in edges])[:, None]
            scatter = np.zeros((self.n, self.n_edges))
            scatter[self.edge_i, np.arange(self.n_edges)] = 1.0
            scatter[self.edge_j, np.arange(self.n_edges)] = -1.0
            self.scatter = scatter

        links = topo.leader_links
        self.n_links = len(links)
        if self.n_links:
            self.link_i = np.array([l[0] for l in links])
            self.link_w = np.array([l[1] for l in links])[:, None]
            lscatter = np.zeros((self.n, self.n_links))
            lscatter[self.link_i, np.arange(self.n_links)] = 1.0
            self.link_scatter = lscatter

        self.omega = 0.0 if spec.velocity.is_linear else spec.velocity.omega
        self.cubic = not spec.coupling.is_linear
        self.gain_base = np.array([g.b0 for g in spec.gains])[:, None]
        self.gain_ripple = np.array([g.amplitude for g in spec.gains])[:, None]
        if self.has_leader:
            self.leader_gain_base = spec.leader_gain.b0
            self.leader_gain_ripple = spec.leader_gain.amplitude
            self.leader_omega = 0.0 if spec.leader_velocity.is_linear else spec.leader_velocity.omega

    def flatten(self, state: SystemState) -> np.ndarray:
        parts = [state.p.ravel(), state.q.ravel()]
        if self.has_leader:
            parts += [state.leader.p, state.leader.q]
        return np.concatenate(parts)

    def unflatten(self, t: float, y: np.ndarray) -> SystemState:
        # SystemState copies on construction, so the views taken here are safe.
        b, d = self.block, self.dims
        leader = None
        if self.has_leader:
            leader = LeaderState(y[2 * b:2 * b + d], y[2 * b + d:])
        return SystemState(t=t, p=y[:b].reshape(self.n, d), q=y[b:2 * b].reshape(self.n, d),
                           leader=leader)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        b, d = self.block, self.dims
        p = y[:b].reshape(self.n, d)
        q = y[b:2 * b].reshape(self.n, d)
        out = np.empty_like(y)
        out[:b] = y[b:2 * b]

        damped = q + self.omega * np.sin(q) if self.omega else q
        u = (-(self.gain_base + self.gain_ripple * math.cos(t))) * damped
        if self.n_edges:
            diff = p[self.edge_j] - p[self.edge_i]
            coupled = diff + diff * diff * diff if self.cubic else diff
            u = u + self.scatter @ (self.edge_w * coupled)
        if self.has_leader:
            lp = y[2 * b:2 * b + d]
            lq = y[2 * b + d:]
            if self.n_links:
                ldiff = lp - p[self.link_i]
                lcoupled = ldiff + ldiff * ldiff * ldiff if self.cubic else ldiff
                u = u + self.link_scatter @ (self.link_w * lcoupled)
            ldamped = lq + self.leader_omega * np.sin(lq) if self.leader_omega else lq
            out[2 * b:2 * b + d] = lq
            out[2 * b + d:] = (-(self.leader_gain_base
                                 + self.leader_gain_ripple * math.cos(t))) * ldamped
        out[b:2 * b] = (u * self.inv_mass).ravel()
        return out

    def rk4(self, t: float, y: np.ndarray, dt: float) -> np.ndarray:
        half = 0.5 * dt
        k1 = self.rhs(t, y)
        k2 = self.rhs(t + half, y + half * k1)
        k3 = self.rhs(t + half, y + half * k2)
        k4 = self.rhs(t + dt, y + dt * k3)
        return y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def _check_state_matches(state: SystemState, scenario: Scenario) -> None:
    if state.p.shape != (scenario.n_agents, scenario.n_dims):
        raise ValidationFailed(
            f"state shape {state.p.shape} does not match scenario "
            f"({scenario.n_agents} agents, {scenario.n_dims} dims)")
    has_leader = state.leader is not None
    if has_leader != (scenario.mode is Mode.LEADER):
        raise ValidationFailed("state leader presence does not match scenario mode")
    if scenario.mode is Mode.LEADER and not scenario.protocol.has_leader:
        raise ValidationFailed("leader mode requires leader_velocity and leader_gain")


def rhs(state: SystemState, scenario: Scenario) -> StateDerivative:
    """Time derivative of the full state under the scenario's closed loop."""
    _check_state_matches(state, scenario)
    finite = np.all(np.isfinite(state.p)) and np.all(np.isfinite(state.q))
    if finite and state.leader is not None:
        finite = np.all(np.isfinite(state.leader.p)) and np.all(np.isfinite(state.leader.q))
    if not finite:
        raise NonFiniteState("state contains non-finite entries", last_good_time=None)
    comp = _Compiled(scenario)
    yd = comp.rhs(state.t, comp.flatten(state))
    b, d = comp.block, comp.dims
    leader_p_dot = leader_q_dot = None
    if comp.has_leader:
        leader_p_dot = yd[2 * b:2 * b + d]
        leader_q_dot = yd[2 * b + d:]
    return StateDerivative(
        p_dot=yd[:b].reshape(comp.n, d),
        q_dot=yd[b:2 * b].reshape(comp.n, d),
        leader_p_dot=leader_p_dot,
        leader_q_dot=leader_q_dot,
    )


def rk4_step(state: SystemState, scenario: Scenario) -> SystemState:
    """One classical RK4 step of length scenario.integrator.dt."""
    _check_state_matches(state, scenario)
    comp = _Compiled(scenario)
    dt = scenario.integrator.dt
    with np.errstate(over="ignore", invalid="ignore"):
        y = comp.rk4(state.t, comp.flatten(state), dt)
    return comp.unflatten(state.t + dt, y)


def scenario_fingerprint(scenario: Scenario) -> str:
    """Content hash (sha256 hex) of the scenario, stable across processes."""
    payload = json.dumps(_canonical(scenario), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def _canonical(obj):
    if isinstance(obj, Topology):
        return {"n_agents": obj.n_agents, "edges": _canonical(obj.edges),
                "leader_links": _canonical(obj.leader_links)}
    if isinstance(obj, LeaderState):
        return {"p": _canonical(obj.p), "q": _canonical(obj.q)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return _canonical(obj.tolist())
    if isinstance(obj, (tuple, list)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float):
        return repr(obj)
    if obj is None or isinstance(obj, (int, str, bool)):
        return obj
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _canonical(getattr(obj, k)) for k in obj.__dataclass_fields__}
    raise TypeError(f"cannot fingerprint {type(obj)!r}")


def simulate(scenario: Scenario) -> Trajectory:
    """Integrate the scenario from t=0 to t_end and record samples.

    The scenario is validated first; a blocking failure raises
    ValidationFailed with every broken rule in the message. The state is
    checked for finiteness after every step and a blow-up raises
    NonFiniteState carrying the last good time.

    Returns a Trajectory whose first sample is the initial state and whose
    samples are spaced dt*record_every apart, t_end inclusive.
    """
    validation = validate_scenario(scenario)
    if not validation.ok:
        raise ValidationFailed("; ".join(validation.errors))

    comp = _Compiled(scenario)
    iset = scenario.integrator
    n_steps = round(iset.t_end / iset.dt)
    y = comp.flatten(scenario.initial)
    samples = [comp.unflatten(0.0, y)]
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, n_steps + 1):
            t_prev = (step - 1) * iset.dt
            y = comp.rk4(t_prev, y, iset.dt)
            if not np.isfinite(y).all():
                raise NonFiniteState(
                    f"state became non-finite between t={t_prev:.6g} and t={step * iset.dt:.6g}",
                    last_good_time=t_prev)
            if step % iset.record_every == 0:
                samples.append(comp.unflatten(step * iset.dt, y))
    return Trajectory(samples=tuple(samples), scenario_fingerprint=scenario_fingerprint(scenario))


def tracking_errors(state: SystemState) -> tuple[np.ndarray, np.ndarray]:
    """Leader-relative errors (p - p_L, q - q_L), each (n_agents, n_dims)."""
    if state.leader is None:
        raise NoLeader("tracking errors need a leader state")
    return (state.p - state.leader.p, state.q - state.leader.q)


def leader_closed_form(leader_p0, leader_q0, gain_value: float, t):
    """Exact leader trajectory for a constant gain b and identity velocity
    feedback: position p0 + q0/b - (q0/b)*exp(-b t), velocity q0*exp(-b t).

    ``t`` may be a scalar or an array; arrays broadcast against the state
    dimension. Raises HypothesisViolated when the gain is not positive.
    """
    b = float(gain_value)
    if not (math.isfinite(b) and b > 0.0):
        raise HypothesisViolated(f"closed form needs a positive constant gain, got {b}")
    p0 = np.asarray(leader_p0, dtype=float)
    q0 = np.asarray(leader_q0, dtype=float)
    t = np.asarray(t, dtype=float)
    if t.ndim and p0.ndim:
        t = t[..., None]
    decay = np.exp(-b * t)
    drift = q0 / b
    return (p0 + drift - drift * decay, q0 * decay)


def leader_closed_form_for(scenario: Scenario, t):
    """Closed-form leader trajectory of a scenario, gated on its hypotheses:
    leader mode, constant leader gain, identity leader velocity feedback."""
    if scenario.mode is not Mode.LEADER or scenario.initial.leader is None:
        raise HypothesisViolated("closed form applies to leader scenarios only")
    spec = scenario.protocol
    if not spec.leader_gain.is_constant:
        raise HypothesisViolated("closed form needs a constant leader gain")
    if not spec.leader_velocity.is_linear:
        raise HypothesisViolated("closed form needs linear leader velocity feedback")
    p0, q0 = scenario.initial.leader
    return leader_closed_form(p0, q0, spec.leader_gain.b0, t)
