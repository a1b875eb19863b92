"""Built-in scenarios and the randomized family used for oracle cross-checks.

Numbers are chosen so that configured transfer totals are the outcome
probabilities directly (see reduction module docstring). Edges that fire
after a collapse are specified in the renormalized branch, i.e. their
totals are conditional probabilities given that branch.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .model import (
    Component,
    ConfigurationError,
    CurrentEdge,
    DrainSpec,
    RatePiece,
    Status,
    SubsystemState,
    TargetTemplate,
    TemplateState,
)

_LOOK_LEN = 0.01  # observation windows are short on the capture-current timescale


@dataclass(frozen=True)
class HitSequenceClassifier:
    """Maps the exact sequence of collapsed component ids to an outcome label."""

    rules: tuple[tuple[tuple[str, ...], str], ...]
    default: str | None = None

    def __call__(self, hit_sequence: tuple[str, ...]) -> str:
        for seq, label in self.rules:
            if seq == hit_sequence:
                return label
        if self.default is not None:
            return self.default
        raise ConfigurationError(f"unclassified hit sequence: {hit_sequence}")


@dataclass(frozen=True)
class HitCountClassifier:
    """Labels by how many collapsed component ids carry a given prefix."""

    id_prefix: str
    label_prefix: str
    cap: int

    def __call__(self, hit_sequence: tuple[str, ...]) -> str:
        k = sum(1 for cid in hit_sequence if cid.startswith(self.id_prefix))
        if k >= self.cap:
            return f"{self.label_prefix}{self.cap}plus"
        return f"{self.label_prefix}{k}"


@dataclass(frozen=True)
class SpawnEdgeSpec:
    id_prefix: str
    target_label: str
    rate: float


@dataclass(frozen=True)
class SpawnProcess:
    """Edges to attach when a component with a given state label appears.

    ``trigger`` is "created" (attach as soon as the branch exists, so
    blocking can hold it down while it is ready) or "realized" (attach only
    once a collapse has realized it).
    """

    edges: tuple[SpawnEdgeSpec, ...]
    trigger: str = "created"
    counts_cycle: bool = False


@dataclass(frozen=True)
class SpawnRules:
    obj: str
    processes: dict[str, SpawnProcess]
    cycle_cap: int


@dataclass
class Scenario:
    name: str
    objects: tuple[str, ...]
    components: tuple[Component, ...]
    edges: tuple[CurrentEdge, ...]
    classifier: object
    outcomes: dict[str, float]
    horizon: float
    blocking: bool = True
    spawn: SpawnRules | None = None
    schedule: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _comp(cid: str, states: dict[str, tuple[str, bool]], weight: float = 0.0) -> Component:
    built = {
        obj: SubsystemState(obj, label, Status.READY if ready else Status.REALIZED)
        for obj, (label, ready) in states.items()
    }
    return Component(cid, built, weight)


def _template(cid: str, states: dict[str, tuple[str, bool]]) -> TargetTemplate:
    return TargetTemplate(
        cid, tuple(TemplateState(obj, label, ready) for obj, (label, ready) in states.items())
    )


def validate(sc: Scenario) -> None:
    """Structural checks: ids, windows, rates, per-source transfer budgets."""
    seen = set()
    for c in sc.components:
        if c.id in seen:
            raise ConfigurationError(f"duplicate component id {c.id!r}")
        seen.add(c.id)
    for e in sc.edges:
        if e.template is not None and e.template.id in seen and e.template.id != e.target:
            raise ConfigurationError(f"edge {e.id}: template id collides with {e.template.id!r}")
    known_targets = seen | {e.target for e in sc.edges}
    totals: dict[str, float] = {}
    for e in sc.edges:
        if e.source not in known_targets:
            raise ConfigurationError(f"edge {e.id}: unknown source {e.source!r}")
        if e.target not in seen and e.template is None:
            raise ConfigurationError(f"edge {e.id}: target {e.target!r} has no template")
        if e.drain is not None:
            d = e.drain
            if d.end <= d.start:
                raise ConfigurationError(f"edge {e.id}: inverted window [{d.start}, {d.end}]")
            if not (0.0 < d.fraction <= 1.0):
                raise ConfigurationError(f"edge {e.id}: drain fraction {d.fraction} outside (0, 1]")
        else:
            if not e.pieces:
                raise ConfigurationError(f"edge {e.id}: no rate pieces")
            for p in e.pieces:
                if p.end <= p.start:
                    raise ConfigurationError(f"edge {e.id}: inverted window [{p.start}, {p.end}]")
                if p.rate < 0:
                    raise ConfigurationError(f"edge {e.id}: negative rate {p.rate}")
            totals[e.source] = totals.get(e.source, 0.0) + e.total()
    for src, tot in totals.items():
        if tot > 1.0 + 1e-9:
            raise ConfigurationError(
                f"absolute transfer totals out of {src!r} sum to {tot:.6g} > 1"
            )
    if sc.outcomes:
        total_p = sum(sc.outcomes.values())
        if abs(total_p - 1.0) > 1e-9:
            raise ConfigurationError(f"declared outcome law sums to {total_p!r}, not 1")


# ---------------------------------------------------------------------------
# built-ins
# ---------------------------------------------------------------------------


def primary_only(total: float = 0.6, window_end: float = 10.0,
                 split: float | None = None) -> Scenario:
    """Particle over a detector: one capture current, one possible hit.

    ``split`` optionally breaks the window into two constant pieces with the
    same total, which must not change the outcome law.
    """
    rate = total / window_end
    if split is None:
        pieces = (RatePiece(0.0, window_end, rate),)
    else:
        if not (0.0 < split < window_end):
            raise ConfigurationError("split must fall inside the window")
        pieces = (RatePiece(0.0, split, rate), RatePiece(split, window_end, rate))
    comps = (_comp("pass", {"particle": ("psi", False), "detector": ("D0", False)}, 1.0),)
    edges = (
        CurrentEdge(
            id="capture",
            source="pass",
            target="cap",
            pieces=pieces,
            template=_template("cap", {"detector": ("D1", True)}),
        ),
    )
    classifier = HitSequenceClassifier(rules=((("cap",), "capture"), ((), "no-capture")))
    return Scenario(
        name="primary-only",
        objects=("particle", "detector"),
        components=comps,
        edges=edges,
        classifier=classifier,
        outcomes={"capture": total, "no-capture": 1.0 - total},
        horizon=window_end + 0.5,
    )


def observer(pause_capture_during_look: bool = True) -> Scenario:
    """One observer checks the detector when capture probability is 50%.

    Capture current: total 0.6, of which 0.5 flows before the look. The
    look fully drains whichever branch survived; afterwards the capture
    current continues on the observed-ground branch with conditional total
    0.2 (= 0.1 unconditional). Expected law: 0.5 / 0.1 / 0.4.
    """
    t_look = 10.0
    look_end = t_look + _LOOK_LEN
    if pause_capture_during_look:
        cap_pieces = (RatePiece(0.0, t_look, 0.05),)
    else:
        # exploratory: capture current stays on during the look; the
        # declared law below no longer applies exactly
        cap_pieces = (RatePiece(0.0, look_end, 0.05),)
    comps = (
        _comp(
            "pass",
            {"particle": ("psi", False), "detector": ("D0", False), "observer": ("X", False)},
            1.0,
        ),
    )
    edges = (
        CurrentEdge(
            id="capture",
            source="pass",
            target="cap",
            pieces=cap_pieces,
            template=_template("cap", {"detector": ("D1", True), "observer": ("X", False)}),
        ),
        CurrentEdge(
            id="look-cap",
            source="cap",
            target="cap-look",
            drain=DrainSpec(t_look, look_end, 1.0),
            template=_template("cap-look", {"detector": ("D1'", True), "observer": ("B1", True)}),
        ),
        CurrentEdge(
            id="look-ground",
            source="pass",
            target="ground-look",
            drain=DrainSpec(t_look, look_end, 1.0),
            template=_template(
                "ground-look",
                {"particle": ("psi'", True), "detector": ("D0", True), "observer": ("B0", True)},
            ),
        ),
        CurrentEdge(
            id="capture-watched",
            source="ground-look",
            target="cap-watched",
            pieces=(RatePiece(look_end, look_end + 2.0, 0.1),),
            template=_template(
                "cap-watched", {"detector": ("D1", True), "observer": ("B1", True)}
            ),
        ),
    )
    classifier = HitSequenceClassifier(
        rules=(
            (("cap", "cap-look"), "capture-at-first-look"),
            (("ground-look", "cap-watched"), "ground-then-capture"),
            (("ground-look",), "ground-no-capture"),
            # reachable only with blocking disabled
            (("cap-look",), "anomaly-capture-without-hit"),
        )
    )
    outcomes = (
        {"capture-at-first-look": 0.5, "ground-then-capture": 0.1, "ground-no-capture": 0.4}
        if pause_capture_during_look
        else {}
    )
    return Scenario(
        name="observer",
        objects=("particle", "detector", "observer"),
        components=comps,
        edges=edges,
        classifier=classifier,
        outcomes=outcomes,
        horizon=look_end + 2.5,
        schedule={"t_look": t_look},
        meta={
            "blocked_without_prior_hit": ["cap-look"],
            "phantom": "cap-watched",
            "phantom_idle_after": look_end + 2.0,
        },
    )


def two_observers(second_look: str = "during") -> Scenario:
    """A second observer checks the detector after the first.

    ``second_look="during"`` puts the second look inside the remaining
    capture window (the agreement case); ``"after"`` delays it until the
    capture current is exhausted, so the leftover ready branch is a pure
    phantom that must drive nothing.
    """
    if second_look not in ("during", "after"):
        raise ConfigurationError(f"second_look must be 'during' or 'after', not {second_look!r}")
    t_look = 10.0
    look_end = t_look + _LOOK_LEN

    def obs2_states(det: str, b1: str, b2: str, all_ready: bool = True):
        return {
            "detector": (det, all_ready),
            "observer1": (b1, all_ready),
            "observer2": (b2, all_ready),
        }

    comps = (
        _comp(
            "pass",
            {
                "particle": ("psi", False),
                "detector": ("D0", False),
                "observer1": ("X", False),
                "observer2": ("X", False),
            },
            1.0,
        ),
    )
    if second_look == "during":
        watched_pieces = (RatePiece(look_end, look_end + 1.0, 0.1),)  # total 0.1
        t_look2 = look_end + 1.0
        final_capture_total = 1.0 / 9.0  # keeps overall capture at 0.6
        outcomes = {
            "capture-at-first-look": 0.5,
            "capture-before-second-look": 0.05,
            "ground-then-capture": 0.05,
            "ground-no-capture": 0.4,
        }
    else:
        watched_pieces = (RatePiece(look_end, look_end + 2.0, 0.1),)  # total 0.2
        t_look2 = 12.5
        final_capture_total = None
        outcomes = {
            "capture-at-first-look": 0.5,
            "ground-then-capture": 0.1,
            "ground-no-capture": 0.4,
        }
    look2_end = t_look2 + _LOOK_LEN

    edges = [
        CurrentEdge(
            id="capture",
            source="pass",
            target="cap",
            pieces=(RatePiece(0.0, t_look, 0.05),),
            template=_template(
                "cap",
                {"detector": ("D1", True), "observer1": ("X", False), "observer2": ("X", False)},
            ),
        ),
        CurrentEdge(
            id="look-cap",
            source="cap",
            target="cap-look",
            drain=DrainSpec(t_look, look_end, 1.0),
            template=_template(
                "cap-look",
                {"detector": ("D1'", True), "observer1": ("B1", True), "observer2": ("X", False)},
            ),
        ),
        CurrentEdge(
            id="look-ground",
            source="pass",
            target="ground-look",
            drain=DrainSpec(t_look, look_end, 1.0),
            template=_template(
                "ground-look",
                {
                    "particle": ("psi'", True),
                    "detector": ("D0", True),
                    "observer1": ("B0", True),
                    "observer2": ("X", False),
                },
            ),
        ),
        CurrentEdge(
            id="capture-watched",
            source="ground-look",
            target="cap-watched",
            pieces=watched_pieces,
            template=_template(
                "cap-watched",
                {"detector": ("D1", True), "observer1": ("B1", True), "observer2": ("X", False)},
            ),
        ),
        CurrentEdge(
            id="look2-cap",
            source="cap-look",
            target="both-cap-a",
            drain=DrainSpec(t_look2, look2_end, 1.0),
            template=_template("both-cap-a", obs2_states("D1''", "B1", "B1")),
        ),
        CurrentEdge(
            id="look2-ground",
            source="ground-look",
            target="both-ground",
            drain=DrainSpec(t_look2, look2_end, 1.0),
            template=_template(
                "both-ground",
                {
                    "particle": ("psi''", True),
                    "detector": ("D0", True),
                    "observer1": ("B0", True),
                    "observer2": ("B0", True),
                },
            ),
        ),
        CurrentEdge(
            id="look2-cap-late",
            source="cap-watched",
            target="both-cap-b",
            drain=DrainSpec(t_look2, look2_end, 1.0),
            template=_template("both-cap-b", obs2_states("D1'", "B1", "B1")),
        ),
    ]
    rules = [
        (("cap", "cap-look", "both-cap-a"), "capture-at-first-look"),
        (("ground-look", "cap-watched", "both-cap-b"), "ground-then-capture"),
        # reachable only with blocking disabled
        (("cap-look", "both-cap-a"), "anomaly-first-observer"),
        (("ground-look", "both-cap-b"), "anomaly-second-observer"),
        (("cap-look",), "anomaly-first-observer"),
    ]
    if second_look == "during":
        rules[1] = (("ground-look", "cap-watched", "both-cap-b"), "capture-before-second-look")
        edges.append(
            CurrentEdge(
                id="capture-after-both",
                source="both-ground",
                target="cap-final",
                pieces=(RatePiece(look2_end, look2_end + 1.0, final_capture_total),),
                template=_template("cap-final", obs2_states("D1", "B1", "B1")),
            )
        )
        rules.append((("ground-look", "both-ground", "cap-final"), "ground-then-capture"))
    rules.append((("ground-look", "both-ground"), "ground-no-capture"))
    meta = {
        "blocked_without_prior_hit": ["cap-look", "both-cap-b"],
        "phantom": "cap-watched",
    }
    if second_look == "after":
        meta["phantom_idle_after"] = look_end + 2.0
    return Scenario(
        name="two-observers" if second_look == "during" else "two-observers-late",
        objects=("particle", "detector", "observer1", "observer2"),
        components=comps,
        edges=tuple(edges),
        classifier=HitSequenceClassifier(rules=tuple(rules)),
        outcomes=outcomes,
        horizon=look2_end + 1.5,
        schedule={"t_look": t_look, "t_look2": t_look2},
        meta=meta,
    )


def counter_chain(k: int) -> Scenario:
    """A counter stepping 0..k-1 under continuous observation.

    Each forward transfer fully drains the previous reading, so every
    reading is realized with certainty, in order. Each forward edge also
    carries a small early window while its source is still ready; with
    blocking on that channel moves nothing, with blocking off it lets a hit
    skip a reading.
    """
    if k < 2:
        raise ConfigurationError("counter chain needs at least 2 readings")
    comps = [_comp("read0", {"counter": ("0", False), "observer": ("B0", False)}, 1.0)]

    def reading(i: int) -> TargetTemplate:
        return _template(f"read{i}", {"counter": (str(i), True), "observer": (f"B{i}", True)})

    edges = []
    for i in range(1, k):
        edges.append(
            CurrentEdge(
                id=f"advance{i}",
                source=f"read{i - 1}",
                target=f"read{i}",
                drain=DrainSpec(float(i), i + 0.5, 1.0),
                template=reading(i),
            )
        )
    for i in range(1, k - 1):
        edges.append(
            CurrentEdge(
                id=f"early{i}",
                source=f"read{i}",
                target=f"read{i + 1}",
                pieces=(RatePiece(i + 0.1, i + 0.4, 0.5),),
                template=reading(i + 1),
            )
        )
    full = tuple(f"read{i}" for i in range(1, k))
    classifier = HitSequenceClassifier(rules=(((full), "sequential"),), default="skipped")
    return Scenario(
        name="counter-chain",
        objects=("counter", "observer"),
        components=tuple(comps),
        edges=tuple(edges),
        classifier=classifier,
        outcomes={"sequential": 1.0},
        horizon=float(k) + 0.1,
    )


def three_level_atom(strong_rate: float, weak_rate: float, max_cycles: int = 12,
                     shelf_cap: int = 3, enforce_separation: bool = True) -> Scenario:
    """Recurrent bright/dark cycling between one strong and one weak channel.

    From a realized ground state, currents feed a strong and a weak ready
    branch; the chosen branch decays back to a fresh ready ground state.
    While that ground state fills, its own outgoing channels are blocked
    (ready source, ready targets), which is what keeps a slow weak recovery
    dark. Runs ``max_cycles`` ground cycles; the shelf count per trajectory
    is Binomial(max_cycles, weak/(strong+weak)).
    """
    if strong_rate <= 0 or weak_rate <= 0:
        raise ConfigurationError("rates must be positive")
    if enforce_separation and strong_rate < 10 * weak_rate:
        raise ConfigurationError(
            f"strong rate must be at least 10x the weak rate (got {strong_rate} vs {weak_rate})"
        )
    if max_cycles < 1:
        raise ConfigurationError("max_cycles must be at least 1")
    total = strong_rate + weak_rate
    processes = {
        "ground": SpawnProcess(
            edges=(
                SpawnEdgeSpec("excite-strong", "strong", strong_rate),
                SpawnEdgeSpec("excite-weak", "weak", weak_rate),
            ),
            trigger="created",
            counts_cycle=True,
        ),
        "strong": SpawnProcess(
            edges=(SpawnEdgeSpec("decay-strong", "ground", strong_rate),),
            trigger="realized",
        ),
        "weak": SpawnProcess(
            edges=(SpawnEdgeSpec("decay-weak", "ground", weak_rate),),
            trigger="realized",
        ),
    }
    p_shelf = weak_rate / total
    outcomes: dict[str, float] = {}
    for j in range(shelf_cap):
        outcomes[f"shelves-{j}"] = (
            math.comb(max_cycles, j) * p_shelf**j * (1 - p_shelf) ** (max_cycles - j)
        )
    outcomes[f"shelves-{shelf_cap}plus"] = 1.0 - sum(outcomes.values())
    horizon = max_cycles * (1.0 / total + 1.0 / weak_rate) + 1.0 / strong_rate + 1.0
    return Scenario(
        name="three-level-atom",
        objects=("atom",),
        components=(_comp("ground-init", {"atom": ("ground", False)}, 1.0),),
        edges=(),
        classifier=HitCountClassifier(id_prefix="weak-", label_prefix="shelves-", cap=shelf_cap),
        outcomes=outcomes,
        horizon=horizon,
        spawn=SpawnRules(obj="atom", processes=processes, cycle_cap=max_cycles),
        meta={
            "strong_rate": strong_rate,
            "weak_rate": weak_rate,
            "max_cycles": max_cycles,
        },
    )


# ---------------------------------------------------------------------------
# randomized staged scenarios (oracle cross-check family)
# ---------------------------------------------------------------------------


def random_scenario(seed: int, max_components: int = 5, max_edges: int = 4) -> Scenario:
    """A small staged scenario with a known-enumerable outcome law.

    Stage 1: currents from a realized source into ready sinks. Stage 2
    (windows strictly after stage 1): follow-up currents out of whichever
    component survived, including ready-to-ready cross edges that stay
    blocked unless their source was realized first.
    """
    rng = random.Random(seed)
    objects = ("probe", "reg")
    comps = [_comp("src", {"probe": ("p0", False), "reg": ("r0", False)}, 1.0)]
    n_sinks = rng.randint(1, 3)
    edge_budget = max_edges
    edges: list[CurrentEdge] = []

    def sink_template(cid: str, idx: int) -> TargetTemplate:
        return _template(cid, {"probe": (f"p{idx}", True), "reg": (f"r{idx}", True)})

    budget = rng.uniform(0.55, 1.0)
    weights = [rng.uniform(0.2, 1.0) for _ in range(n_sinks)]
    scale = budget / sum(weights)
    totals = [w * scale for w in weights]
    sinks = []
    for i in range(n_sinks):
        cid = f"s1-{i}"
        sinks.append(cid)
        a = rng.uniform(0.0, 1.5)
        b = a + rng.uniform(0.5, 2.5)
        if rng.random() < 0.4:
            mid = rng.uniform(a + 0.1, b - 0.1)
            r1 = rng.uniform(0.2, 0.8)
            # two pieces, same total
            t1 = totals[i] * r1
            t2 = totals[i] - t1
            pieces = (
                RatePiece(a, mid, t1 / (mid - a)),
                RatePiece(mid, b, t2 / (b - mid)),
            )
        else:
            pieces = (RatePiece(a, b, totals[i] / (b - a)),)
        edges.append(
            CurrentEdge(
                id=f"feed-{i}",
                source="src",
                target=cid,
                pieces=pieces,
                template=sink_template(cid, i + 1),
            )
        )
        edge_budget -= 1

    stage2_start = 4.0
    stage2: list[tuple[str, str]] = []  # (source, target) of follow-up edges
    next_idx = n_sinks + 1
    n_new = 0
    # one follow-up hop at most: a stage-2 target never sources another edge
    budget_left = {cid: 1.0 for cid in sinks}
    budget_left["src"] = 1.0 - budget
    s2_targets: set[str] = set()
    while edge_budget > 0 and n_sinks + 1 + n_new < max_components and rng.random() < 0.75:
        eligible = [c for c in ["src", *sinks] if budget_left[c] > 0.15 and c not in s2_targets]
        if not eligible:
            break
        src_choice = rng.choice(eligible)
        a = stage2_start + rng.uniform(0.0, 0.5)
        b = a + rng.uniform(0.5, 1.5)
        tot = rng.uniform(0.1, min(0.9, budget_left[src_choice]))
        budget_left[src_choice] -= tot
        cross_candidates = [
            s for s in sinks
            if s != src_choice and s not in s2_targets and budget_left.get(s, 0) == 1.0
        ]
        if src_choice != "src" and cross_candidates and rng.random() < 0.4:
            # cross edge between two stage-1 sinks: blocked unless the
            # source was realized by a stage-1 hit
            tgt = rng.choice(cross_candidates)
            tmpl = next(e.template for e in edges if e.target == tgt)
            edges.append(
                CurrentEdge(
                    id=f"cross-{src_choice}-{tgt}",
                    source=src_choice,
                    target=tgt,
                    pieces=(RatePiece(a, b, tot / (b - a)),),
                    template=tmpl,
                )
            )
            stage2.append((src_choice, tgt))
            s2_targets.add(tgt)
        else:
            cid = f"s2-{next_idx}"
            edges.append(
                CurrentEdge(
                    id=f"follow-{cid}",
                    source=src_choice,
                    target=cid,
                    pieces=(RatePiece(a, b, tot / (b - a)),),
                    template=sink_template(cid, next_idx),
                )
            )
            stage2.append((src_choice, cid))
            s2_targets.add(cid)
            n_new += 1
            next_idx += 1
        edge_budget -= 1

    # enumerate the reachable terminal hit sequences
    rules: list[tuple[tuple[str, ...], str]] = [((), "none")]
    followups: dict[str, list[str]] = {}
    for s, t in stage2:
        followups.setdefault(s, []).append(t)
    for cid in sinks:
        rules.append(((cid,), f"end-{cid}"))
        for t in followups.get(cid, []):
            rules.append(((cid, t), f"end-{cid}-{t}"))
    for t in followups.get("src", []):
        rules.append(((t,), f"end-{t}"))
    return Scenario(
        name=f"random-{seed}",
        objects=objects,
        components=tuple(comps),
        edges=tuple(edges),
        classifier=HitSequenceClassifier(rules=tuple(rules)),
        outcomes={},
        horizon=8.5,
    )


BUILTIN_BUILDERS = {
    "primary-only": primary_only,
    "observer": observer,
    "two-observers": lambda: two_observers("during"),
    "two-observers-late": lambda: two_observers("after"),
    "counter-chain": lambda: counter_chain(5),
    "three-level-atom": lambda: three_level_atom(100.0, 1.0),
}


def builtin(name: str) -> Scenario:
    try:
        builder = BUILTIN_BUILDERS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {name!r}; known: {', '.join(sorted(BUILTIN_BUILDERS))}"
        ) from None
    sc = builder()
    validate(sc)
    return sc
