"""Core data model: components, subsystem states, current edges, system state.

A system is a weighted sum of decoherent *components*. Each component is a
product of per-object subsystem states, each tagged ``ready`` (created by an
interaction, eligible to be realized by a collapse) or ``realized``. Directed
*current edges* move square-modulus weight between components at
piecewise-constant rates. Weights are real square moduli; no amplitudes or
phases are tracked.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field


class Status(enum.Enum):
    READY = "ready"
    REALIZED = "realized"


@dataclass(slots=True)
class SubsystemState:
    """One object's state inside a component.

    ``status`` may only move READY -> REALIZED (at a collapse), never back.
    """

    obj: str
    label: str
    status: Status

    @property
    def ready(self) -> bool:
        return self.status is Status.READY


@dataclass(slots=True)
class Component:
    """A decoherent branch: one state per object, plus a nonnegative weight."""

    id: str
    states: dict[str, SubsystemState]
    weight: float
    created_at: float = 0.0

    def state_of(self, obj: str) -> SubsystemState | None:
        return self.states.get(obj)

    def copy(self) -> "Component":
        return Component(
            self.id,
            {o: SubsystemState(s.obj, s.label, s.status) for o, s in self.states.items()},
            self.weight,
            self.created_at,
        )


def contains_ready(component: Component, obj: str) -> bool:
    """True iff ``component`` holds a READY state of ``obj``."""
    s = component.states.get(obj)
    return s is not None and s.status is Status.READY


def has_any_ready(component: Component) -> bool:
    return any(s.status is Status.READY for s in component.states.values())


@dataclass(frozen=True)
class RatePiece:
    """Constant absolute rate (weight per unit time) on [start, end)."""

    start: float
    end: float
    rate: float


@dataclass(frozen=True)
class DrainSpec:
    """Transfer a fraction of the source's weight, measured at window start.

    Resolved to a constant rate ``fraction * w_source(start) / (end - start)``
    when the window opens, so the realized profile is piecewise constant.
    """

    start: float
    end: float
    fraction: float


@dataclass(frozen=True)
class TemplateState:
    obj: str
    label: str
    ready: bool = True


@dataclass(frozen=True)
class TargetTemplate:
    """Blueprint for a component instantiated when an edge window opens."""

    id: str
    states: tuple[TemplateState, ...]

    def instantiate(self, t: float) -> Component:
        states = {
            ts.obj: SubsystemState(ts.obj, ts.label, Status.READY if ts.ready else Status.REALIZED)
            for ts in self.states
        }
        return Component(self.id, states, 0.0, created_at=t)


@dataclass(frozen=True)
class CurrentEdge:
    """Directed probability-current channel between two components.

    Exactly one of ``pieces`` / ``drain`` describes the rate profile. The
    target either pre-exists (``template is None``) or is created, with the
    template's ready flags, when the window opens and the source is present.
    """

    id: str
    source: str
    target: str
    pieces: tuple[RatePiece, ...] = ()
    drain: DrainSpec | None = None
    template: TargetTemplate | None = None

    def window(self) -> tuple[float, float]:
        if self.drain is not None:
            return (self.drain.start, self.drain.end)
        return (self.pieces[0].start, self.pieces[-1].end)

    def total(self) -> float | None:
        """Configured transfer total; None for drains (weight-dependent)."""
        if self.drain is not None:
            return None
        return sum(p.rate * (p.end - p.start) for p in self.pieces)


class EventKind(enum.Enum):
    COMPONENT_CREATED = "component-created"
    EDGE_BLOCKED = "edge-blocked"
    STOCHASTIC_HIT = "stochastic-hit"
    COLLAPSE = "collapse"
    INTERACTION_START = "interaction-start"
    INTERACTION_END = "interaction-end"


@dataclass(slots=True)
class TrajectoryEvent:
    time: float
    kind: EventKind
    ref: str
    weights_hash: str = ""


@dataclass(slots=True)
class TrajectoryRecord:
    """Ordered event log of one trajectory plus its terminal classification."""

    seed: int
    events: list[TrajectoryEvent] = field(default_factory=list)
    hit_sequence: list[str] = field(default_factory=list)
    hit_times: list[float] = field(default_factory=list)
    outcome: str = ""
    violations: dict[str, int] = field(default_factory=dict)
    max_modulus_drift: float = 0.0


class ConfigurationError(ValueError):
    """Scenario or config structure is invalid."""


class ContractViolation(RuntimeError):
    """An operation was called outside its contract."""


class DegenerateSystemError(RuntimeError):
    """Total square modulus is zero; hazards are undefined."""


class StepSizeError(RuntimeError):
    """An integration step would cross a discontinuity or drive weight < 0."""


@dataclass(slots=True)
class SystemState:
    """All live components and edges at the current time.

    ``s`` is the total square modulus; between collapses it is conserved
    (currents only move weight around) and after a collapse it is
    renormalized to 1. ``hazard_spent`` is the cumulative hazard integral
    since the last collapse; the sampler treats it directly as consumed
    first-hit probability.
    """

    components: dict[str, Component]
    edges: list  # list[EdgeRun]; runtime wrapper defined in trajectory.py
    time: float = 0.0
    s: float = 1.0
    hazard_spent: float = 0.0

    def weights_hash(self) -> str:
        parts = ";".join(
            f"{cid}:{self.components[cid].weight:.17g}" for cid in sorted(self.components)
        )
        return hashlib.md5(parts.encode()).hexdigest()[:12]


def total_modulus(state: SystemState) -> float:
    """Sum of component weights; maintained equal to ``state.s``."""
    return sum(c.weight for c in state.components.values())
