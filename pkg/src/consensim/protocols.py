"""Protocol building blocks: velocity feedback shapes, position coupling
shapes, velocity gain profiles, and the per-agent control inputs they induce.

The shape families are closed enumerations. Velocity feedback is either the
identity or a sine-perturbed identity z + omega*sin(z); position coupling is
either linear or linear-plus-cubic; gains are constant or constant plus a
cosine ripple. Everything downstream (integration, energy bookkeeping,
closed-form predictions) dispatches on these kinds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .graph import Topology


class VelocityKind(str, Enum):
    LINEAR = "linear"
    SINE_PERTURBED = "sine_perturbed"


class CouplingKind(str, Enum):
    LINEAR = "linear"
    LINEAR_PLUS_CUBIC = "linear_plus_cubic"


class GainKind(str, Enum):
    CONSTANT = "constant"
    COSINE = "cosine"


@dataclass(frozen=True)
class VelocityShape:
    """Odd velocity-feedback nonlinearity applied to each agent's velocity.

    LINEAR is z; SINE_PERTURBED is z + omega*sin(z) with omega >= 0.
    """

    kind: VelocityKind = VelocityKind.LINEAR
    omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", VelocityKind(self.kind))
        object.__setattr__(self, "omega", float(self.omega))
        if not math.isfinite(self.omega) or self.omega < 0.0:
            raise ValueError(f"omega must be finite and >= 0, got {self.omega}")
        if self.kind is VelocityKind.LINEAR and self.omega != 0.0:
            raise ValueError("linear velocity shape takes no omega")

    @property
    def is_linear(self) -> bool:
        """True when the shape is the identity (omega == 0 counts)."""
        return self.kind is VelocityKind.LINEAR or self.omega == 0.0

    def evaluate(self, z):
        if self.is_linear:
            return np.asarray(z, dtype=float) + 0.0
        z = np.asarray(z, dtype=float)
        return z + self.omega * np.sin(z)

    def derivative(self, z):
        """Slope of the shape; 1 or 1 + omega*cos(z). Exposed for inspection,
        no validation is attached to it."""
        z = np.asarray(z, dtype=float)
        if self.is_linear:
            return np.ones_like(z)
        return 1.0 + self.omega * np.cos(z)


@dataclass(frozen=True)
class CouplingShape:
    """Odd position-coupling nonlinearity applied to neighbor differences."""

    kind: CouplingKind = CouplingKind.LINEAR

    def __post_init__(self):
        object.__setattr__(self, "kind", CouplingKind(self.kind))

    @property
    def is_linear(self) -> bool:
        return self.kind is CouplingKind.LINEAR

    def evaluate(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind is CouplingKind.LINEAR:
            return z + 0.0
        return z + z * z * z

    def antiderivative(self, x):
        """Integral of the shape from 0 to x, componentwise. Even and
        nonnegative for these odd shapes; used by the energy functions."""
        x = np.asarray(x, dtype=float)
        half_sq = 0.5 * x * x
        if self.kind is CouplingKind.LINEAR:
            return half_sq
        return half_sq + 0.25 * (x * x) * (x * x)


@dataclass(frozen=True)
class GainProfile:
    """Velocity-feedback gain of one agent as a function of time.

    CONSTANT is b0; COSINE is b0 + amplitude*cos(t). The profile must stay
    strictly positive, i.e. b0 - |amplitude| > 0; that is checked by
    :func:`validate_assumptions` and is a blocking scenario rule.
    """

    kind: GainKind = GainKind.CONSTANT
    b0: float = 1.0
    amplitude: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", GainKind(self.kind))
        object.__setattr__(self, "b0", float(self.b0))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        if not math.isfinite(self.b0) or not math.isfinite(self.amplitude):
            raise ValueError("gain parameters must be finite")
        if self.kind is GainKind.CONSTANT and self.amplitude != 0.0:
            raise ValueError("constant gain takes no amplitude")

    @property
    def is_constant(self) -> bool:
        return self.kind is GainKind.CONSTANT or self.amplitude == 0.0

    def evaluate(self, t: float) -> float:
        if self.kind is GainKind.CONSTANT:
            return self.b0
        return self.b0 + self.amplitude * math.cos(t)

    def bounds(self) -> tuple[float, float]:
        """(lower, upper) envelope of the profile over all t."""
        a = abs(self.amplitude)
        return (self.b0 - a, self.b0 + a)


@dataclass(frozen=True)
class ProtocolSpec:
    """Everything the control law needs besides the graph: the follower
    velocity/coupling shapes, one gain profile per agent, and (for tracking
    scenarios) the leader's own velocity shape and gain."""

    velocity: VelocityShape
    coupling: CouplingShape
    gains: tuple[GainProfile, ...]
    leader_velocity: VelocityShape | None = None
    leader_gain: GainProfile | None = None

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(self.gains))
        if not self.gains:
            raise ValueError("at least one gain profile is required")
        if (self.leader_velocity is None) != (self.leader_gain is None):
            raise ValueError("leader_velocity and leader_gain must be given together")

    @property
    def has_leader(self) -> bool:
        return self.leader_gain is not None


def gain_envelope(profiles) -> tuple[float, float]:
    """Tightest (lower, upper) bounds covering every profile in `profiles`."""
    lows, highs = zip(*(p.bounds() for p in profiles))
    return (min(lows), max(highs))


@lru_cache(maxsize=64)
def _sector_numeric(omega: float, half_width: float, samples: int) -> tuple[float, float]:
    # Ratio f(z)/z = 1 + omega*sin(z)/z, extended continuously by its limit
    # 1 + omega at z = 0. Even in z. Grid scan plus golden-section polish.
    grid = np.linspace(-half_width, half_width, samples)
    vals = 1.0 + omega * np.sinc(grid / np.pi)
    spacing = grid[1] - grid[0]

    def ratio(z: float) -> float:
        if z == 0.0:
            return 1.0 + omega
        return 1.0 + omega * math.sin(z) / z

    i_min = int(np.argmin(vals))
    i_max = int(np.argmax(vals))
    lo = _golden_min(ratio, grid[i_min] - spacing, grid[i_min] + spacing)
    hi = -_golden_min(lambda z: -ratio(z), grid[i_max] - spacing, grid[i_max] + spacing)
    return (float(lo), float(hi))


def _golden_min(fn, lo: float, hi: float, iterations: int = 200) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iterations):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
        if b - a < 1e-14:
            break
    return min(fc, fd)


def sector_constants(
    shape: VelocityShape,
    half_width: float = 50.0,
    samples: int = 1_000_000,
) -> tuple[float, float]:
    """Sector bounds (lower, upper) of the velocity shape: the inf and sup of
    evaluate(z)/z over nonzero z, computed over [-half_width, half_width].

    Linear shapes give exactly (1, 1); sine-perturbed ones are scanned on a
    grid and refined. The defaults resolve the bounds well past the tolerance
    any caller here needs; both are overridable.
    """
    if shape.is_linear:
        return (1.0, 1.0)
    return _sector_numeric(shape.omega, float(half_width), int(samples))


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    blocking: bool
    detail: str


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of checking a protocol against the standing assumptions:
    velocity shapes vanish only at zero with positive sign, coupling shapes
    are odd with positive sign, gains stay strictly positive.

    ``sector`` and ``gain_bounds`` are the combined envelopes over followers
    and leader; they feed the tracking energy machinery.
    """

    checks: tuple[AssumptionCheck, ...]
    velocity_sector: tuple[float, float]
    leader_velocity_sector: tuple[float, float] | None
    sector: tuple[float, float]
    gain_bounds: tuple[float, float]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def blocking_failures(self) -> tuple[AssumptionCheck, ...]:
        return tuple(c for c in self.checks if c.blocking and not c.passed)


def validate_assumptions(
    spec: ProtocolSpec,
    grid_half_width: float = 10.0,
    grid_points: int = 10_000,
) -> AssumptionReport:
    """Check the protocol's shapes and gains against the standing assumptions.

    Shape checks are sampled on a z-grid and advisory; the strict-positivity
    check on each gain profile (lower envelope > 0) is exact and blocking.
    The report also carries the velocity sector constants.
    """
    z = np.linspace(-grid_half_width, grid_half_width, grid_points)
    z = z[np.abs(z) > 1e-12]
    checks: list[AssumptionCheck] = []

    def velocity_checks(shape: VelocityShape, prefix: str) -> None:
        at_zero = float(shape.evaluate(0.0))
        checks.append(AssumptionCheck(
            name=f"{prefix}zero_at_zero",
            passed=(at_zero == 0.0),
            blocking=False,
            detail=f"value at 0 is {at_zero!r}",
        ))
        signs = z * shape.evaluate(z)
        ok = bool(np.all(signs > 0.0))
        checks.append(AssumptionCheck(
            name=f"{prefix}sign",
            passed=ok,
            blocking=False,
            detail="z*value(z) > 0 on the grid" if ok else
                   f"z*value(z) <= 0 at z={z[np.argmin(signs)]:.6g}",
        ))

    velocity_checks(spec.velocity, "velocity_")
    if spec.leader_velocity is not None:
        velocity_checks(spec.leader_velocity, "leader_velocity_")

    h_pos = spec.coupling.evaluate(z)
    h_neg = spec.coupling.evaluate(-z)
    odd = bool(np.array_equal(h_neg, -h_pos)) and float(spec.coupling.evaluate(0.0)) == 0.0
    checks.append(AssumptionCheck(
        name="coupling_odd",
        passed=odd,
        blocking=False,
        detail="value(-z) == -value(z) exactly on the grid" if odd else "oddness broken on the grid",
    ))
    nonzero = bool(np.all(h_pos != 0.0))
    checks.append(AssumptionCheck(
        name="coupling_zero_only_at_zero",
        passed=nonzero,
        blocking=False,
        detail="no nonzero root on the grid" if nonzero else "vanishes at some nonzero z",
    ))
    sign_ok = bool(np.all(z * h_pos > 0.0))
    checks.append(AssumptionCheck(
        name="coupling_sign",
        passed=sign_ok,
        blocking=False,
        detail="z*value(z) > 0 on the grid" if sign_ok else "sign condition broken",
    ))

    def gain_check(profile: GainProfile, name: str) -> None:
        lo, hi = profile.bounds()
        checks.append(AssumptionCheck(
            name=name,
            passed=bool(lo > 0.0),
            blocking=True,
            detail=f"envelope [{lo:.6g}, {hi:.6g}]",
        ))

    for idx, profile in enumerate(spec.gains):
        gain_check(profile, f"gain_{idx + 1}_positive_floor")
    if spec.leader_gain is not None:
        gain_check(spec.leader_gain, "leader_gain_positive_floor")

    vel_sector = sector_constants(spec.velocity)
    leader_sector = None
    sector = vel_sector
    if spec.leader_velocity is not None:
        leader_sector = sector_constants(spec.leader_velocity)
        sector = (min(vel_sector[0], leader_sector[0]), max(vel_sector[1], leader_sector[1]))
    checks.append(AssumptionCheck(
        name="velocity_sector_positive",
        passed=bool(sector[0] > 0.0),
        blocking=False,
        detail=f"sector [{sector[0]:.6g}, {sector[1]:.6g}]",
    ))

    profiles = list(spec.gains) + ([spec.leader_gain] if spec.leader_gain is not None else [])
    return AssumptionReport(
        checks=tuple(checks),
        velocity_sector=vel_sector,
        leader_velocity_sector=leader_sector,
        sector=sector,
        gain_bounds=gain_envelope(profiles),
    )


def leaderless_control(i: int, state, t: float, topo: Topology, spec: ProtocolSpec) -> np.ndarray:
    """Control force on agent i (0-based): velocity damping through the
    agent's gain plus weighted coupling to each neighbor's position.

    Reference implementation, one agent at a time; the integrator uses a
    vectorized equivalent that is cross-checked against this in the tests.
    """
    gain = spec.gains[i].evaluate(t)
    u = -gain * spec.velocity.evaluate(state.q[i])
    for j, w in topo.neighbors(i):
        u = u + w * spec.coupling.evaluate(state.p[j] - state.p[i])
    return u


def leader_control(i: int, state, leader, t: float, topo: Topology, spec: ProtocolSpec) -> np.ndarray:
    """Control force on agent i when a leader is present: the leaderless
    force plus coupling toward the leader's position for linked agents.
    ``leader`` is the (position, velocity) pair; only the position enters."""
    leader_p, _leader_q = leader
    u = leaderless_control(i, state, t, topo, spec)
    for j, w in topo.leader_links:
        if j == i:
            u = u + w * spec.coupling.evaluate(np.asarray(leader_p, dtype=float) - state.p[i])
    return u
