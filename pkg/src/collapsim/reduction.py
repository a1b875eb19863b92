"""Stochastic choice, collapse, and shared-ready-object transition blocking.

The three operations here implement the reduction process:

* ``blocked`` / ``blocked_edges`` — a transition between two components is
  forbidden when each holds a ready state of the same object.
* ``hazards`` — a component containing ready states and receiving positive
  net current J is a hit candidate with instantaneous hazard max(J, 0)/s.
* ``sample_next_hit`` / ``collapse`` — first-hit sampling and the reduction
  itself: the chosen component's states all become realized, every other
  component is dropped, and the survivor is renormalized to unit modulus.

Hit-time accounting is by direct integral: the cumulative hazard since the
last collapse is itself the consumed first-hit probability (survival
``1 - integral(H)``, not ``exp(-integral(H))``). With this convention a
branch's configured transfer total is exactly its outcome probability, and
a branch whose inflow integrates to the full remaining modulus is hit with
certainty. ``SystemState.hazard_spent`` carries the running integral and is
reset to zero by ``collapse``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .model import (
    Component,
    ContractViolation,
    DegenerateSystemError,
    Status,
    SystemState,
    TargetTemplate,
    has_any_ready,
)


def _ready_objects(x: Component | TargetTemplate) -> set[str]:
    if isinstance(x, TargetTemplate):
        return {ts.obj for ts in x.states if ts.ready}
    return {o for o, s in x.states.items() if s.status is Status.READY}


def blocked(a: Component | TargetTemplate, b: Component | TargetTemplate) -> bool:
    """True iff some object has a ready state in both components. Symmetric."""
    ra = _ready_objects(a)
    if not ra:
        return False
    return not ra.isdisjoint(_ready_objects(b))


def blocked_edges(state: SystemState) -> set[str]:
    """Ids of edges whose endpoints share a ready object.

    An edge whose target does not exist yet is evaluated against its
    target template, so a forbidden branch is known to be forbidden before
    it is ever instantiated.
    """
    out: set[str] = set()
    for er in state.edges:
        src = state.components.get(er.edge.source)
        if src is None:
            continue
        tgt = state.components.get(er.edge.target)
        probe = tgt if tgt is not None else er.edge.template
        if probe is not None and blocked(src, probe):
            out.add(er.edge.id)
    return out


@dataclass(slots=True)
class HazardState:
    """Per-component hazards max(J, 0)/s and their sum."""

    per_component: dict[str, float] = field(default_factory=dict)
    total: float = 0.0


def hazards(state: SystemState, flows) -> HazardState:
    """Hazards for ready-containing components from a flow snapshot.

    Components with no ready states are never hit candidates. Net currents
    are clamped at zero from below.
    """
    if state.s <= 0.0:
        raise DegenerateSystemError("total square modulus is zero")
    hs = HazardState()
    for cid, inflow in flows.inflow.items():
        comp = state.components.get(cid)
        if comp is None or not has_any_ready(comp):
            continue
        j = inflow - flows.outflow.get(cid, 0.0)
        if j <= 0.0:
            continue
        h = j / state.s
        hs.per_component[cid] = h
        hs.total += h
    return hs


def choose_component(hs: HazardState, v: float) -> str:
    """Categorical choice over per-component hazards; ``v`` uniform in [0, 1)."""
    if hs.total <= 0.0:
        raise ContractViolation("no positive hazard to choose from")
    acc = 0.0
    last = None
    for cid, h in hs.per_component.items():
        acc += h
        last = cid
        if v * hs.total < acc:
            return cid
    return last  # float dust fallthrough


def sample_next_hit(state: SystemState, horizon: float, rng):
    """First hit time and chosen component on [state.time, horizon], or None.

    Exact inverse-CDF on the piecewise-constant total hazard under the
    direct-integral accounting described in the module docstring. Pure:
    the walk runs on a deep copy so interaction windows opening inside the
    horizon are honoured without mutating ``state``. Deterministic given
    (state, rng state).
    """
    from .trajectory import walk_to_hit  # runtime import; trajectory sits above

    probe = copy.deepcopy(state)
    u = rng.random()
    v = rng.random()
    hit = walk_to_hit(probe, horizon, u, v)
    if hit is None:
        return None
    return hit


def collapse(state: SystemState, chosen_id: str, t: float) -> list[str]:
    """Realize the chosen component, drop all others, renormalize to s = 1.

    Returns the ids of removed components. Edges whose endpoints were
    removed are dead thereafter (flows require both endpoints live).
    Resets the consumed-hazard budget.
    """
    comp = state.components.get(chosen_id)
    if comp is None:
        raise ContractViolation(f"collapse target {chosen_id!r} does not exist")
    if not has_any_ready(comp):
        raise ContractViolation(f"collapse target {chosen_id!r} has no ready states")
    for s in comp.states.values():
        s.status = Status.REALIZED
    removed = [cid for cid in state.components if cid != chosen_id]
    for cid in removed:
        del state.components[cid]
    comp.weight = 1.0
    state.s = 1.0
    state.time = t
    state.hazard_spent = 0.0
    return removed
