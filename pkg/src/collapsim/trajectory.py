"""Single-trajectory event loop.

A trajectory alternates deterministic evolution with stochastic hits:

1. Walk forward piece by piece (splitting at every window boundary), moving
   weight along unblocked edges and accumulating the hazard integral.
2. When the accumulated integral crosses a uniform draw, a hit lands; the
   chosen component collapses, the consumed-hazard budget resets, and open
   interactions regrow their wiped targets from weight zero.
3. Repeat until the horizon, or until nothing can ever flow again.

One trajectory owns one seeded generator; the draw order (one uniform per
epoch, one per hit) is fixed, so a (scenario, seed) pair replays
bit-identically.
"""

from __future__ import annotations

import heapq

import numpy as np

from .dynamics import (
    EdgeRun,
    activate_interactions,
    advance,
    compute_flows,
    reinstate_targets,
)
from .model import (
    Component,
    ContractViolation,
    CurrentEdge,
    EventKind,
    RatePiece,
    Status,
    SystemState,
    TargetTemplate,
    TemplateState,
    TrajectoryEvent,
    TrajectoryRecord,
    total_modulus,
)
from .reduction import HazardState, blocked, choose_component, collapse, hazards

_WEIGHT_TOL = 1e-12
_DRIFT_TOL = 1e-9


def build_state(scenario) -> SystemState:
    comps = {c.id: c.copy() for c in scenario.components}
    edges = [EdgeRun.from_edge(e) for e in scenario.edges]
    s = sum(c.weight for c in comps.values())
    return SystemState(components=comps, edges=edges, time=0.0, s=s)


class TrajectoryEngine:
    """Owns one SystemState and walks it to its terminal configuration."""

    def __init__(self, state: SystemState, horizon: float, blocking: bool = True,
                 collect_events: bool = False, scenario=None, rng=None):
        self.state = state
        self.horizon = horizon
        self.blocking = blocking
        self.collect = collect_events
        self.scenario = scenario
        self.rng = rng
        self.events: list[TrajectoryEvent] = []
        self.hit_sequence: list[str] = []
        self.hit_times: list[float] = []
        self.violations = {
            "negative_weight": 0,
            "blocked_inflow": 0,
            "realized_to_ready": 0,
            "phantom_event": 0,
        }
        self.max_drift = 0.0
        # components that started with weight, or ever received unblocked inflow
        self.ever_inflow = {c.id for c in state.components.values() if c.weight > 0.0}
        self._bounds: list[float] = []
        self._pushed: set[float] = set()
        self._spawn_index = 0
        self._cycles = 0
        self._attached: set[tuple[str, str]] = set()
        self._phantom = None
        self._phantom_after = None
        if scenario is not None and scenario.meta:
            self._phantom = scenario.meta.get("phantom")
            self._phantom_after = scenario.meta.get("phantom_idle_after")
        self._push(horizon)
        for er in state.edges:
            self._push_edge_bounds(er)

    # ---- bookkeeping -----------------------------------------------------

    def _push(self, t: float) -> None:
        if t not in self._pushed and t <= self.horizon:
            self._pushed.add(t)
            heapq.heappush(self._bounds, t)

    def _push_edge_bounds(self, er: EdgeRun) -> None:
        for a, b, _ in er.pieces:
            self._push(a)
            self._push(min(b, self.horizon))

    def _next_boundary(self, t: float) -> float | None:
        while self._bounds:
            if self._bounds[0] <= t:
                heapq.heappop(self._bounds)
                continue
            return self._bounds[0]
        return None

    def _log(self, t: float, kind: EventKind, ref: str) -> None:
        if self.collect:
            self.events.append(TrajectoryEvent(t, kind, ref, self.state.weights_hash()))

    # ---- spawn rules (recurrent scenarios) --------------------------------

    def _attach_spawns(self, comp: Component, trigger: str, t: float) -> bool:
        sc = self.scenario
        if sc is None or sc.spawn is None or t >= self.horizon:
            return False
        rules = sc.spawn
        st = comp.states.get(rules.obj)
        if st is None:
            return False
        proc = rules.processes.get(st.label)
        if proc is None or proc.trigger != trigger:
            return False
        key = (comp.id, trigger)
        if key in self._attached:
            return False
        self._attached.add(key)
        if proc.counts_cycle:
            if self._cycles >= rules.cycle_cap:
                return False
            self._cycles += 1
        for spec in proc.edges:
            n = self._spawn_index
            self._spawn_index += 1
            target_id = f"{spec.target_label}-{n}"
            edge = CurrentEdge(
                id=f"{spec.id_prefix}-{n}",
                source=comp.id,
                target=target_id,
                pieces=(RatePiece(t, self.horizon, spec.rate),),
                template=TargetTemplate(
                    target_id, (TemplateState(rules.obj, spec.target_label, True),)
                ),
            )
            er = EdgeRun.from_edge(edge)
            self.state.edges.append(er)
            self._push_edge_bounds(er)
        return True

    # ---- boundary processing ----------------------------------------------

    def _process_boundary(self, t: float) -> None:
        """Activations, target (re)creation, and spawn attach, to fixpoint."""
        state = self.state
        while True:
            created, started, blocked_ids = activate_interactions(state, t, self.blocking)
            created += reinstate_targets(state, t)
            for eid in started:
                self._log(t, EventKind.INTERACTION_START, eid)
            for eid in blocked_ids:
                self._log(t, EventKind.EDGE_BLOCKED, eid)
            progressed = False
            for cid in created:
                self._log(t, EventKind.COMPONENT_CREATED, cid)
                progressed = True
                self._attach_spawns(state.components[cid], "created", t)
            if not progressed:
                break
        if self.collect:
            for er in state.edges:
                if er.started and not er.ended and er.window()[1] <= t:
                    er.ended = True
                    self._log(t, EventKind.INTERACTION_END, er.edge.id)

    def _check_invariants(self) -> None:
        state = self.state
        drift = abs(total_modulus(state) - state.s)
        if drift > self.max_drift:
            self.max_drift = drift
        for comp in state.components.values():
            if comp.weight > _WEIGHT_TOL and comp.id not in self.ever_inflow:
                self.violations["blocked_inflow"] += 1
            if comp.weight < -_WEIGHT_TOL:
                self.violations["negative_weight"] += 1

    def _check_phantom(self, flows, t: float) -> None:
        # a phantom is the *ready* leftover of a finished interaction; once a
        # collapse has realized it, flow out of it is ordinary evolution
        pid = self._phantom
        if pid is None or self._phantom_after is None or t < self._phantom_after:
            return
        if flows.outflow.get(pid, 0.0) > 0.0:
            comp = self.state.components.get(pid)
            if comp is not None and any(s.status is Status.READY for s in comp.states.values()):
                self.violations["phantom_event"] += 1

    # ---- the walk ----------------------------------------------------------

    def _prune_edges(self, t: float) -> None:
        """Drop edges that can never flow again.

        An edge stays live if its window is still open and its source is
        either present or recreatable, i.e. the target of another live edge
        (a wiped component regrows when its feeding interaction reopens it).
        Computed to fixpoint so chains of regrowable components survive.
        """
        state = self.state
        candidates = [er for er in state.edges if er.window()[1] > t]
        reachable = set(state.components)
        live: set[int] = set()
        changed = True
        while changed:
            changed = False
            for idx, er in enumerate(candidates):
                if idx in live:
                    continue
                if er.edge.source in reachable:
                    live.add(idx)
                    if er.edge.target not in reachable:
                        reachable.add(er.edge.target)
                        changed = True
        kept = [er for idx, er in enumerate(candidates) if idx in live]
        if self.collect:
            for er in state.edges:
                if er.started and not er.ended and er not in kept:
                    er.ended = True
                    self._log(t, EventKind.INTERACTION_END, er.edge.id)
        state.edges = kept

    def run_epoch(self, u: float) -> tuple[float, HazardState] | None:
        """Advance until the hazard integral crosses ``u`` or nothing remains.

        Returns (hit time, hazard snapshot at the hit) with the state
        advanced to the hit time, or None if the epoch ends quietly.
        """
        state = self.state
        while state.time < self.horizon:
            t = state.time
            nb = self._next_boundary(t)
            if nb is None:
                return None
            flows = compute_flows(state, t, blocking=self.blocking)
            if flows.inflow:
                self.ever_inflow.update(flows.inflow)
                if self._phantom is not None:
                    self._check_phantom(flows, t)
                hs = hazards(state, flows)
            else:
                hs = None
            dt = nb - t
            if hs is not None and hs.total > 0.0:
                need = u - state.hazard_spent
                if hs.total * dt >= need:
                    t_hit = t + need / hs.total
                    if t_hit > t:
                        advance(state, t_hit - t, flows, check_boundaries=False)
                    else:
                        state.time = t_hit
                    state.hazard_spent = u
                    return (t_hit, hs)
                state.hazard_spent += hs.total * dt
            if dt > 0:
                advance(state, dt, flows, check_boundaries=False)
            else:
                state.time = nb
            self._process_boundary(nb)
            self._check_invariants()
        return None

    def apply_collapse(self, chosen: str, t: float) -> None:
        state = self.state
        self._log(t, EventKind.STOCHASTIC_HIT, chosen)
        if self._phantom is not None and self._phantom_after is not None:
            if chosen == self._phantom and t >= self._phantom_after:
                self.violations["phantom_event"] += 1
        comp = state.components[chosen]
        pre_realized = [s for s in comp.states.values() if s.status is Status.REALIZED]
        removed = collapse(state, chosen, t)
        # realized states never revert; guard is structural but counted anyway
        for s in pre_realized:
            if s.status is not Status.REALIZED:
                self.violations["realized_to_ready"] += 1
        self.hit_sequence.append(chosen)
        self.hit_times.append(t)
        self._log(t, EventKind.COLLAPSE, chosen)
        self._prune_edges(t)
        self._attach_spawns(state.components[chosen], "realized", t)
        self._process_boundary(t)
        self._check_invariants()

    def run(self, seed) -> TrajectoryRecord:
        rng = self.rng
        self.state.time = 0.0
        if self.scenario is not None and self.scenario.spawn is not None:
            for comp in list(self.state.components.values()):
                self._attach_spawns(comp, "created", 0.0)
                if not any(s.status is Status.READY for s in comp.states.values()):
                    self._attach_spawns(comp, "realized", 0.0)
        self._process_boundary(0.0)
        self._check_invariants()
        while True:
            u = rng.random()
            hit = self.run_epoch(u)
            if hit is None:
                break
            t_hit, hs = hit
            v = rng.random()
            chosen = choose_component(hs, v)
            self.apply_collapse(chosen, t_hit)
        record = TrajectoryRecord(
            seed=seed,
            events=self.events,
            hit_sequence=self.hit_sequence,
            hit_times=self.hit_times,
            violations=self.violations,
            max_modulus_drift=self.max_drift,
        )
        if self.scenario is not None:
            record.outcome = self.scenario.classifier(tuple(self.hit_sequence))
        return record


def walk_to_hit(state: SystemState, horizon: float, u: float, v: float,
                blocking: bool = True):
    """Piece-walk a bare SystemState to its first hit. Used by the sampler op."""
    eng = TrajectoryEngine(state, horizon, blocking=blocking)
    eng._process_boundary(state.time)
    hit = eng.run_epoch(u)
    if hit is None:
        return None
    t_hit, hs = hit
    return t_hit, choose_component(hs, v)


def run_trajectory(scenario, seed, collect_events: bool = False,
                   blocking: bool | None = None) -> TrajectoryRecord:
    """Run one seeded trajectory of a scenario.

    ``seed`` feeds a counter-mode seed sequence, so tuples like
    (master_seed, index) give independent per-trajectory streams.
    Deterministic: the same (scenario, seed) replays identically.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    if blocking is None:
        blocking = scenario.blocking
    state = build_state(scenario)
    eng = TrajectoryEngine(
        state,
        scenario.horizon,
        blocking=blocking,
        collect_events=collect_events,
        scenario=scenario,
        rng=rng,
    )
    return eng.run(seed)
