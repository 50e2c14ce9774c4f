"""Damped, clamped message passing over the model registry.

Each iteration computes, for every missing attribute entry, the
inverse-variance weighted mean of all predictions flowing in over admitted
message paths (relational paths cross an edge, inner paths stay within a
node), then mixes it with the previous value through the damping factor.
Observed entries are clamped to their loaded values throughout. Updates are
synchronous: iteration k reads only the k-1 buffer, and message sums run in
a fixed path order, so results are bit-reproducible regardless of worker
count.

Missing entries start at the global mean of their attribute type, so targets
that never receive a message degrade to the per-type mean baseline.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, NamedTuple

import numpy as np

from .attributes import AttributeTable, Status
from .errors import SingularSystemError
from .graph import Direction
from .ingest import DatasetBundle
from .regression import ModelRegistry, PathKey, RegressionModel

logger = logging.getLogger(__name__)


class InitPolicy(Enum):
    GLOBAL_MEAN = "global_mean"


@dataclass(frozen=True)
class PropagationConfig:
    """Knobs of one propagation run.

    ``conv_frac`` scales each attribute type's observed range into the
    per-type convergence threshold on the max absolute value change between
    consecutive iterations. ``no_cross`` restricts messages to same-type
    relational paths (which subsumes ``no_inner``: inner messages always
    cross attribute types); ``no_inner`` drops only within-node messages.
    """

    damping: float = 0.5
    conv_frac: float = 0.001
    max_iters: int = 200
    no_cross: bool = False
    no_inner: bool = False
    init_policy: InitPolicy = InitPolicy.GLOBAL_MEAN

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must be in (0, 1], got {self.damping!r}")
        if self.conv_frac <= 0.0:
            raise ValueError("conv_frac must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def allows(self, key: PathKey) -> bool:
        """Whether messages over ``key`` are active under the ablation flags."""
        if self.no_cross:
            return not key.is_inner and not key.is_cross
        if self.no_inner:
            return not key.is_inner
        return True


class Message(NamedTuple):
    target: tuple[int, int]  # (entity id, attr id)
    prediction: float
    weight: float
    key: PathKey
    source_entity: int


@dataclass
class PropagationState:
    """Final value buffer plus convergence bookkeeping of a run."""

    values: np.ndarray  # aligned with the bundle's attribute entries
    iteration: int
    ranges: dict[str, float]  # observed range per attribute type label
    last_max_delta: dict[str, float]
    converged: bool


@dataclass
class ImputationReport:
    iterations: int
    converged: bool
    n_targets: int
    n_silent: int  # targets that never received a message
    target_entries: np.ndarray = field(repr=False)
    n_messages: np.ndarray = field(repr=False)  # per target entry
    total_weight: np.ndarray = field(repr=False)
    per_type_delta: dict[str, float] = field(default_factory=dict)
    trace: list[tuple[int, str, float, float]] = field(default_factory=list, repr=False)


class _Paths(NamedTuple):
    """Flattened message paths: one row per (source entry, model, target entry)."""

    src: np.ndarray
    tgt: np.ndarray
    eta: np.ndarray
    tau: np.ndarray
    weight: np.ndarray

    @property
    def n(self) -> int:
        return len(self.src)


def _build_paths(bundle: DatasetBundle, registry: ModelRegistry, cfg: PropagationConfig) -> _Paths:
    """Enumerate every active path between tracked entries, in fixed order."""
    graph, attrs = bundle.graph, bundle.attrs
    fwd: dict[int, dict[tuple[int, int], RegressionModel]] = {}
    rev: dict[int, dict[tuple[int, int], RegressionModel]] = {}
    inner: dict[tuple[int, int], RegressionModel] = {}
    for key, model in registry.models.items():
        if not cfg.allows(key):
            continue
        if key.is_inner:
            inner[(key.dep, key.indep)] = model
        elif key.direction is Direction.FORWARD:
            fwd.setdefault(key.relation, {})[(key.dep, key.indep)] = model  # type: ignore[arg-type]
        else:
            rev.setdefault(key.relation, {})[(key.dep, key.indep)] = model  # type: ignore[arg-type]

    attr_of = attrs.attr_ids
    at: list[list[int]] = attrs.per_entity
    src: list[int] = []
    tgt: list[int] = []
    models: list[RegressionModel] = []

    def link(m: RegressionModel, s: int, t: int) -> None:
        src.append(s)
        tgt.append(t)
        models.append(m)

    for head, relation, tail in graph.edges:
        fwd_p = fwd.get(relation)
        if fwd_p:
            for et in at[tail]:
                for eh in at[head]:
                    m = fwd_p.get((int(attr_of[et]), int(attr_of[eh])))
                    if m is not None:
                        link(m, eh, et)
        rev_p = rev.get(relation)
        if rev_p:
            for eh in at[head]:
                for et in at[tail]:
                    m = rev_p.get((int(attr_of[eh]), int(attr_of[et])))
                    if m is not None:
                        link(m, et, eh)
    if inner:
        for entity in range(graph.n_entities):
            entries = at[entity]
            for i_dep in entries:
                for i_src in entries:
                    if i_dep == i_src:
                        continue
                    m = inner.get((int(attr_of[i_dep]), int(attr_of[i_src])))
                    if m is not None:
                        link(m, i_src, i_dep)

    return _Paths(
        src=np.asarray(src, dtype=np.int64),
        tgt=np.asarray(tgt, dtype=np.int64),
        eta=np.asarray([m.eta for m in models], dtype=np.float64),
        tau=np.asarray([m.tau for m in models], dtype=np.float64),
        weight=np.asarray([m.weight for m in models], dtype=np.float64),
    )


def collect_messages(
    bundle: DatasetBundle,
    registry: ModelRegistry,
    values: np.ndarray,
    target: tuple[int, int],
    cfg: PropagationConfig,
) -> list[Message]:
    """All messages flowing into one tracked (entity, attribute) entry.

    Relational messages come first, in the graph's deterministic adjacency
    order; within-node messages follow in ascending source attribute order.
    ``values`` is the previous-iteration buffer the predictions read from.
    """
    entity, attr = target
    attrs = bundle.attrs
    if (entity, attr) not in attrs.index:
        raise ValueError(f"target {target!r} is not a tracked attribute entry")
    messages: list[Message] = []
    for neighbor, oriented in bundle.graph.neighbors(entity):
        for entry in attrs.entries_of(neighbor):
            key = PathKey.relational(
                attr, int(attrs.attr_ids[entry]), oriented.relation, oriented.direction
            )
            model = registry.get(key)
            if model is not None and cfg.allows(key):
                messages.append(
                    Message(target, model.predict(float(values[entry])), model.weight, key, neighbor)
                )
    for entry in attrs.entries_of(entity):
        src_attr = int(attrs.attr_ids[entry])
        if src_attr == attr:
            continue
        key = PathKey.inner(attr, src_attr)
        model = registry.get(key)
        if model is not None and cfg.allows(key):
            messages.append(
                Message(target, model.predict(float(values[entry])), model.weight, key, entity)
            )
    return messages


def aggregate(messages: list[Message]) -> float:
    """Weighted, normalized mean of the message predictions."""
    if not messages:
        raise ValueError("cannot aggregate an empty message list")
    total_w = 0.0
    total_wp = 0.0
    for m in messages:
        total_w += m.weight
        total_wp += m.weight * m.prediction
    return total_wp / total_w


def combine(prev: float, estimate: float, damping: float) -> float:
    """Damped update: (1 - damping) * prev + damping * estimate."""
    return (1.0 - damping) * prev + damping * estimate


def _init_values(bundle: DatasetBundle) -> np.ndarray:
    """Loaded values with every MISSING entry reset to its type's global mean."""
    attrs = bundle.attrs
    values = attrs.values.copy()
    targets = bundle.target_indices()
    for attr in np.unique(attrs.attr_ids[targets]):
        means = attrs.mean_value(int(attr))  # raises DataError if nothing observed
        sel = targets[attrs.attr_ids[targets] == attr]
        values[sel] = means
    return values


def _target_ranges(bundle: DatasetBundle) -> dict[int, float]:
    """Observed range per attribute type that has at least one target."""
    attrs = bundle.attrs
    targets = bundle.target_indices()
    return {
        int(attr): attrs.value_range(int(attr)) for attr in np.unique(attrs.attr_ids[targets])
    }


def _paths_loss(paths: _Paths, values: np.ndarray) -> float:
    resid = values[paths.tgt] - (paths.eta * values[paths.src] + paths.tau)
    return float(np.dot(paths.weight * resid, resid))


def loss(
    bundle: DatasetBundle,
    registry: ModelRegistry,
    state: PropagationState | np.ndarray,
    cfg: PropagationConfig | None = None,
) -> float:
    """Total weighted squared prediction error over all active paths.

    Sums, for every tracked entry, the squared differences between its
    current value and each prediction flowing into it, scaled by the model
    weights. Diagnostic only: the propagation minimizes this per node, not
    globally.
    """
    cfg = cfg or PropagationConfig()
    values = state.values if isinstance(state, PropagationState) else np.asarray(state)
    return _paths_loss(_build_paths(bundle, registry, cfg), values)


def run(
    bundle: DatasetBundle,
    registry: ModelRegistry,
    cfg: PropagationConfig | None = None,
    initial: np.ndarray | None = None,
) -> tuple[PropagationState, ImputationReport]:
    """Propagate until every attribute type's max delta drops below tolerance.

    Returns the final state plus a report with per-target message counts and
    a per-iteration trace of (iteration, type, max delta, total loss).
    Non-convergence within ``max_iters`` is reported, not raised. ``initial``
    warm-starts the target values (observed entries are clamped regardless).
    """
    cfg = cfg or PropagationConfig()
    attrs = bundle.attrs
    n = attrs.n_entries
    paths = _build_paths(bundle, registry, cfg)
    missing = attrs.status == Status.MISSING
    upd = (
        _Paths(*(a[missing[paths.tgt]] for a in paths)) if paths.n else paths
    )

    targets = bundle.target_indices()
    n_msgs = np.bincount(upd.tgt, minlength=n).astype(np.int64) if upd.n else np.zeros(n, np.int64)
    weight_sum = (
        np.bincount(upd.tgt, weights=upd.weight, minlength=n) if upd.n else np.zeros(n)
    )
    live = targets[n_msgs[targets] > 0]

    if initial is None:
        values = _init_values(bundle)
    else:
        values = attrs.values.copy()
        values[targets] = np.asarray(initial, dtype=np.float64)[targets]
    ranges = _target_ranges(bundle)
    tol = {attr: cfg.conv_frac * rng for attr, rng in ranges.items()}
    type_labels = {attr: attrs.types.label(attr) for attr in ranges}
    target_attr = attrs.attr_ids[targets]

    trace: list[tuple[int, str, float, float]] = []
    per_type_delta = {attr: 0.0 for attr in ranges}
    converged = not ranges  # nothing to impute converges immediately
    iteration = 0
    for iteration in range(1, cfg.max_iters + 1):
        new = values.copy()
        if upd.n:
            preds = upd.eta * values[upd.src] + upd.tau
            num = np.bincount(upd.tgt, weights=upd.weight * preds, minlength=n)
            est = num[live] / weight_sum[live]
            new[live] = (1.0 - cfg.damping) * values[live] + cfg.damping * est
        deltas = np.abs(new[targets] - values[targets])
        max_delta = np.zeros(attrs.n_types)
        np.maximum.at(max_delta, target_attr, deltas)
        loss_now = _paths_loss(paths, new)
        converged = True
        for attr in ranges:
            d = float(max_delta[attr])
            per_type_delta[attr] = d
            trace.append((iteration, type_labels[attr], d, loss_now))
            # delta == 0 counts as converged even when the range (and so the
            # tolerance) is zero for a constant-valued type
            if not (d < tol[attr] or d == 0.0):
                converged = False
        values = new
        if converged:
            break

    if not converged:
        logger.warning("propagation did not converge in %d iterations", cfg.max_iters)

    state = PropagationState(
        values=values,
        iteration=iteration,
        ranges={type_labels[a]: r for a, r in ranges.items()},
        last_max_delta={type_labels[a]: d for a, d in per_type_delta.items()},
        converged=converged,
    )
    report = ImputationReport(
        iterations=iteration,
        converged=converged,
        n_targets=len(targets),
        n_silent=int((n_msgs[targets] == 0).sum()),
        target_entries=targets,
        n_messages=n_msgs[targets],
        total_weight=weight_sum[targets],
        per_type_delta=dict(state.last_max_delta),
        trace=trace,
    )
    return state, report


def fixed_point_oracle(
    bundle: DatasetBundle,
    registry: ModelRegistry,
    cfg: PropagationConfig | None = None,
) -> dict[tuple[int, int], float]:
    """Exact fixed point of the message-passing update by direct linear solve.

    Builds the stationarity system value = (sum of weighted predictions) /
    (sum of weights) over all targets with at least one message, treating
    observed entries and message-less targets (held at their init mean) as
    constants, and solves each connected component densely. Intended for
    small instances; raises :class:`SingularSystemError` naming the targets
    of any underdetermined component.
    """
    cfg = cfg or PropagationConfig()
    attrs = bundle.attrs
    paths = _build_paths(bundle, registry, cfg)
    missing = attrs.status == Status.MISSING
    upd = _Paths(*(a[missing[paths.tgt]] for a in paths)) if paths.n else paths

    n = attrs.n_entries
    weight_sum = np.bincount(upd.tgt, weights=upd.weight, minlength=n) if upd.n else np.zeros(n)
    targets = bundle.target_indices()
    unknowns = [int(t) for t in targets if weight_sum[t] > 0.0]
    pos = {entry: i for i, entry in enumerate(unknowns)}
    const_values = _init_values(bundle)

    # union-find over unknowns coupled by a path
    parent = list(range(len(unknowns)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for s, t in zip(upd.src, upd.tgt):
        si, ti = pos.get(int(s)), pos.get(int(t))
        if si is not None and ti is not None:
            ri, rj = find(si), find(ti)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    components: dict[int, list[int]] = {}
    for i in range(len(unknowns)):
        components.setdefault(find(i), []).append(i)

    solution = const_values.copy()
    for root in sorted(components):
        comp = components[root]
        local = {unknowns[i]: j for j, i in enumerate(comp)}
        size = len(comp)
        a_mat = np.eye(size)
        b = np.zeros(size)
        for idx in range(upd.n):
            t = int(upd.tgt[idx])
            lt = local.get(t)
            if lt is None:
                continue
            q = weight_sum[t]
            s = int(upd.src[idx])
            w, eta, tau = float(upd.weight[idx]), float(upd.eta[idx]), float(upd.tau[idx])
            b[lt] += w * tau / q
            ls = local.get(s)
            if ls is not None:
                a_mat[lt, ls] -= w * eta / q
            else:
                b[lt] += w * eta * const_values[s] / q
        if np.linalg.matrix_rank(a_mat) < size:
            labels = [
                (
                    bundle.graph.entities.label(int(attrs.entity_ids[unknowns[i]])),
                    attrs.types.label(int(attrs.attr_ids[unknowns[i]])),
                )
                for i in comp
            ]
            raise SingularSystemError(
                f"fixed-point system singular on a component of {size} targets", labels
            )
        solution[[unknowns[i] for i in comp]] = np.linalg.solve(a_mat, b)

    return {
        (int(attrs.entity_ids[t]), int(attrs.attr_ids[t])): float(solution[t]) for t in targets
    }


def imputed_table(bundle: DatasetBundle, state: PropagationState) -> AttributeTable:
    """Attribute table with target entries set to their propagated values."""
    attrs = bundle.attrs
    table = attrs.with_status(
        np.where(attrs.status == Status.MISSING, int(Status.IMPUTED), attrs.status)
    )
    table.values = attrs.values.copy()
    table.values[bundle.target_indices()] = state.values[bundle.target_indices()]
    return table


def write_imputations(
    fh: IO[str], bundle: DatasetBundle, state: PropagationState, report: ImputationReport
) -> None:
    """``entity<TAB>attr<TAB>value<TAB>n_messages<TAB>total_weight`` per target."""
    attrs = bundle.attrs
    entities = bundle.graph.entities
    for t, n_msg, w in zip(report.target_entries, report.n_messages, report.total_weight):
        fh.write(
            f"{entities.label(int(attrs.entity_ids[t]))}\t"
            f"{attrs.types.label(int(attrs.attr_ids[t]))}\t"
            f"{state.values[t]:.17g}\t{int(n_msg)}\t{w:.17g}\n"
        )


def write_trace(fh: IO[str], report: ImputationReport) -> None:
    """Per-iteration convergence trace as CSV."""
    fh.write("iter,attr_type,max_delta,loss\n")
    for iteration, attr, delta, loss_val in report.trace:
        fh.write(f"{iteration},{attr},{delta:.17g},{loss_val:.17g}\n")
