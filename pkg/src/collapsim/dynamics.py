"""Current-flow integration and interaction activation.

Weight moves between components along edges with piecewise-constant rates,
so every step that does not cross a piece boundary is an exact linear
update. The stepper is required to split at boundaries; `advance` refuses
to integrate across one.

Interaction activation creates edge targets as all-ready components with
weight zero. A blocked edge still creates its target (the branch exists,
it just never receives current), which is what keeps forbidden branches
observable at weight zero in the logs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    ConfigurationError,
    CurrentEdge,
    StepSizeError,
    SystemState,
)
from .reduction import blocked

_EPS = 1e-12


@dataclass(slots=True)
class EdgeRun:
    """Runtime view of a CurrentEdge: resolved pieces plus bookkeeping."""

    edge: CurrentEdge
    pieces: list[tuple[float, float, float]]  # (start, end, rate); drains resolved on open
    resolved: bool = True
    started: bool = False
    ended: bool = False

    @classmethod
    def from_edge(cls, edge: CurrentEdge) -> "EdgeRun":
        if edge.drain is not None:
            d = edge.drain
            return cls(edge, [(d.start, d.end, 0.0)], resolved=False)
        return cls(edge, [(p.start, p.end, p.rate) for p in edge.pieces])

    def rate_at(self, t: float) -> float:
        for a, b, r in self.pieces:
            if a <= t < b:
                return r
        return 0.0

    def window(self) -> tuple[float, float]:
        return (self.pieces[0][0], self.pieces[-1][1])


@dataclass(slots=True)
class FlowSnapshot:
    """Instantaneous transfer picture at one time.

    ``net`` holds inflow minus outflow per component; the reduction engine
    clamps it at zero from below when forming hazards.
    """

    time: float
    edge_rates: dict[str, float] = field(default_factory=dict)
    inflow: dict[str, float] = field(default_factory=dict)
    outflow: dict[str, float] = field(default_factory=dict)

    def net(self, comp_id: str) -> float:
        return self.inflow.get(comp_id, 0.0) - self.outflow.get(comp_id, 0.0)


def boundaries(state: SystemState) -> list[float]:
    """All piece boundaries of all edges, sorted and deduplicated."""
    pts: set[float] = set()
    for er in state.edges:
        for a, b, _ in er.pieces:
            pts.add(a)
            pts.add(b)
    return sorted(pts)


def activate_interactions(state: SystemState, t: float, blocking: bool = True):
    """Open every edge window starting at ``t``: resolve drains, create targets.

    Returns (created_component_ids, started_edge_ids, blocked_edge_ids).
    Creation requires a live source; the target is created even when the
    edge is blocked. Re-creating an id that is already present with
    different content is a configuration error.
    """
    created: list[str] = []
    started: list[str] = []
    blocked_now: list[str] = []
    for er in state.edges:
        a = er.pieces[0][0]
        if a != t:
            continue
        src = state.components.get(er.edge.source)
        if src is None:
            continue
        if not er.resolved:
            d = er.edge.drain
            length = d.end - d.start
            rate = d.fraction * src.weight / length if length > 0 else 0.0
            er.pieces = [(d.start, d.end, rate)]
            er.resolved = True
        newly_started = not er.started
        if newly_started:
            er.started = True
            started.append(er.edge.id)
        made = ensure_target(state, er, t)
        if made:
            created.append(er.edge.target)
        if blocking and newly_started:
            tgt = state.components.get(er.edge.target)
            probe = tgt if tgt is not None else er.edge.template
            if probe is not None and blocked(src, probe):
                blocked_now.append(er.edge.id)
    return created, started, blocked_now


def ensure_target(state: SystemState, er: EdgeRun, t: float) -> bool:
    """Instantiate the edge's target from its template if absent.

    Also used after a collapse: an interaction whose window is still open
    and whose source survived regrows its target branch from weight zero.
    """
    if er.edge.target in state.components:
        return False
    if er.edge.template is None:
        return False
    comp = er.edge.template.instantiate(t)
    if comp.id != er.edge.target:
        raise ConfigurationError(
            f"edge {er.edge.id}: template id {comp.id!r} != target {er.edge.target!r}"
        )
    state.components[comp.id] = comp
    return True


def reinstate_targets(state: SystemState, t: float) -> list[str]:
    """Re-create missing targets of open edges with live sources (post-collapse)."""
    created = []
    for er in state.edges:
        a, b = er.window()
        if not (a <= t < b):
            continue
        if er.edge.source not in state.components:
            continue
        if ensure_target(state, er, t):
            created.append(er.edge.target)
    return created


def compute_flows(state: SystemState, t: float, blocking: bool = True) -> FlowSnapshot:
    """Edge rates and per-component net currents at time ``t``.

    Blocked edges and edges with a missing endpoint contribute nothing.
    """
    snap = FlowSnapshot(time=t)
    comps = state.components
    for er in state.edges:
        rate = er.rate_at(t)
        if rate == 0.0:
            continue
        src = comps.get(er.edge.source)
        if src is None:
            continue
        tgt = comps.get(er.edge.target)
        if tgt is None:
            continue
        if blocking and blocked(src, tgt):
            snap.edge_rates[er.edge.id] = 0.0
            continue
        snap.edge_rates[er.edge.id] = rate
        snap.inflow[tgt.id] = snap.inflow.get(tgt.id, 0.0) + rate
        snap.outflow[src.id] = snap.outflow.get(src.id, 0.0) + rate
    return snap


def advance(state: SystemState, dt: float, flows: FlowSnapshot | None = None,
            blocking: bool = True, check_boundaries: bool = True) -> None:
    """Move weight for ``dt`` at the current piece rates. Exact for constant rates.

    ``dt`` must not straddle a piece boundary; the caller splits steps.
    """
    if dt <= 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    t0, t1 = state.time, state.time + dt
    if check_boundaries:
        for b in boundaries(state):
            if t0 + _EPS < b < t1 - _EPS:
                raise StepSizeError(f"step ({t0}, {t1}) crosses piece boundary at {b}")
    if flows is None:
        flows = compute_flows(state, t0, blocking=blocking)
    comps = state.components
    for cid, r in flows.inflow.items():
        comps[cid].weight += r * dt
    for cid, r in flows.outflow.items():
        c = comps[cid]
        c.weight -= r * dt
        if c.weight < 0.0:
            if c.weight < -1e-9:
                raise StepSizeError(
                    f"component {cid} weight driven negative ({c.weight:.3e}); "
                    "configured transfer exceeds source mass"
                )
            c.weight = 0.0
    state.time = t1
