"""Pairwise linear models per message path and the model registry.

For every (dependent attribute, independent attribute, oriented relation)
combination with enough observed training pairs, a simple linear regression
``y = eta * x + tau`` is fitted in closed form. The model weight is the
inverse of the residual error variance, so noisy models contribute little
during propagation. Reverse-direction models are never refitted: they are
derived analytically from the forward fit (eta' = 1/eta, tau' = -tau/eta,
w' = eta^2 / sigma^2), which keeps each forward/reverse pair consistent.

Within-node models between two attribute types of the same entity follow the
same scheme with the node set in place of the edge set; the canonical fit
direction regresses the higher attribute id on the lower one and the swapped
model is derived.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import IO, Iterable

import numpy as np

from .attributes import AttributeTable, Status
from .errors import (
    DataError,
    DegenerateRegressorError,
    InsufficientSupportError,
    NonInvertibleSlopeError,
    ParseError,
)
from .graph import Direction, KnowledgeGraph
from .ingest import DatasetBundle

logger = logging.getLogger(__name__)

INNER_LABEL = "INNER"
_DIRECTION_NAMES = {Direction.FORWARD: "forward", Direction.REVERSE: "reverse"}


@dataclass(frozen=True)
class PathKey:
    """Identifies one message path family.

    Relational keys predict attribute ``dep`` at a node from attribute
    ``indep`` at a neighbor reached over ``relation`` in ``direction``.
    Within-node keys (``relation is None``) predict ``dep`` from another
    attribute ``indep`` of the same node.
    """

    dep: int
    indep: int
    relation: int | None = None
    direction: Direction | None = None

    def __post_init__(self):
        if self.relation is None:
            if self.direction is not None:
                raise ValueError("inner key cannot carry a direction")
            if self.dep == self.indep:
                raise ValueError("inner key requires distinct attribute types")
        elif self.direction is None:
            raise ValueError("relational key requires a direction")

    @classmethod
    def relational(cls, dep: int, indep: int, relation: int, direction: Direction) -> "PathKey":
        return cls(dep=dep, indep=indep, relation=relation, direction=direction)

    @classmethod
    def inner(cls, dep: int, indep: int) -> "PathKey":
        return cls(dep=dep, indep=indep)

    @property
    def is_inner(self) -> bool:
        return self.relation is None

    @property
    def is_cross(self) -> bool:
        """True when the message crosses attribute types."""
        return self.dep != self.indep

    def reversed(self) -> "PathKey":
        """The key of the analytically derived opposite-direction model."""
        if self.is_inner:
            return PathKey.inner(self.indep, self.dep)
        assert self.direction is not None
        return PathKey.relational(self.indep, self.dep, self.relation, self.direction.flipped)

    def label(self, graph: KnowledgeGraph, attrs: AttributeTable) -> str:
        dep = attrs.types.label(self.dep)
        indep = attrs.types.label(self.indep)
        if self.is_inner:
            return f"{dep}|{indep}|{INNER_LABEL}"
        rel = graph.relations.label(self.relation)  # type: ignore[arg-type]
        return f"{dep}|{indep}|{rel}|{_DIRECTION_NAMES[self.direction]}"  # type: ignore[index]


@dataclass(frozen=True)
class FitSummary:
    support: int
    mu_x: float
    mu_y: float
    r2: float
    derived_reverse: bool = False


@dataclass(frozen=True)
class RegressionModel:
    """Fitted (or derived) affine predictor with inverse-variance weight."""

    key: PathKey
    eta: float
    tau: float
    sigma2: float
    weight: float
    fit: FitSummary

    def predict(self, x: float) -> float:
        return self.eta * x + self.tau


@dataclass(frozen=True)
class AdmissionConfig:
    """Filters deciding which fitted models enter the registry.

    ``exclusions`` holds (attr_a, attr_b, link) label tuples; ``link`` is a
    relation label, ``"INNER"``, or None for any link. The attribute pair is
    unordered: excluding (latitude, longitude) removes both prediction
    directions.
    """

    min_support: int = 5
    r2_min: float = 0.0
    exclusions: tuple[tuple[str, str, str | None], ...] = ()
    var_floor_scale: float = 1e-12
    eta_min_scale: float = 1e-9

    def __post_init__(self):
        if self.min_support < 2:
            raise ValueError("min_support must be at least 2")
        if not 0.0 <= self.r2_min <= 1.0:
            raise ValueError("r2_min must lie in [0, 1]")
        if self.var_floor_scale <= 0 or self.eta_min_scale <= 0:
            raise ValueError("scales must be positive")

    @staticmethod
    def parse_exclusions(specs: Iterable[str]) -> tuple[tuple[str, str, str | None], ...]:
        """Parse ``"attrA,attrB[,link]"`` strings into normalized tuples."""
        rules = []
        for spec in specs:
            parts = [p.strip() for p in spec.split(",")]
            if len(parts) == 2:
                a, b = parts
                link = None
            elif len(parts) == 3:
                a, b, link = parts
            else:
                raise ValueError(f"exclusion must be 'attrA,attrB[,link]', got {spec!r}")
            if not a or not b:
                raise ValueError(f"exclusion with empty attribute in {spec!r}")
            lo, hi = sorted((a, b))
            rules.append((lo, hi, link))
        return tuple(rules)

    def excludes(self, key: PathKey, graph: KnowledgeGraph, attrs: AttributeTable) -> bool:
        if not self.exclusions:
            return False
        pair = tuple(sorted((attrs.types.label(key.dep), attrs.types.label(key.indep))))
        link = INNER_LABEL if key.is_inner else graph.relations.label(key.relation)  # type: ignore[arg-type]
        for a, b, rule_link in self.exclusions:
            if (a, b) == pair and (rule_link is None or rule_link == link):
                return True
        return False


@dataclass
class ModelRegistry:
    """Admitted models keyed by path, frozen after construction."""

    models: dict[PathKey, RegressionModel]
    admission: AdmissionConfig = field(default_factory=AdmissionConfig)
    rejections: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.models)

    def __contains__(self, key: PathKey) -> bool:
        return key in self.models

    def get(self, key: PathKey) -> RegressionModel | None:
        return self.models.get(key)


def extract_pairs(bundle: DatasetBundle, key: PathKey) -> tuple[np.ndarray, np.ndarray]:
    """Collect observed (y, x) training pairs for a fit key.

    Relational keys must be FORWARD (one pair per stored edge whose tail
    observes ``dep`` and whose head observes ``indep``); reverse models are
    derived, never fitted. Inner keys take one pair per node observing both
    types. Pairs come back in stored edge / entity id order.
    """
    attrs = bundle.attrs
    observed = attrs.status == Status.OBSERVED

    def value_if_observed(entity: int, attr: int) -> float | None:
        idx = attrs.index.get((entity, attr))
        if idx is None or not observed[idx]:
            return None
        return float(attrs.values[idx])

    ys: list[float] = []
    xs: list[float] = []
    if key.is_inner:
        for entity in range(bundle.graph.n_entities):
            y = value_if_observed(entity, key.dep)
            x = value_if_observed(entity, key.indep)
            if y is not None and x is not None:
                ys.append(y)
                xs.append(x)
    else:
        if key.direction is not Direction.FORWARD:
            raise ValueError("pairs are extracted for FORWARD keys only")
        for head, relation, tail in bundle.graph.edges:
            if relation != key.relation:
                continue
            y = value_if_observed(tail, key.dep)
            x = value_if_observed(head, key.indep)
            if y is not None and x is not None:
                ys.append(y)
                xs.append(x)
    return np.asarray(ys, dtype=np.float64), np.asarray(xs, dtype=np.float64)


def fit_simple_regression(
    y: np.ndarray, x: np.ndarray
) -> tuple[float, float, float, FitSummary]:
    """Closed-form least squares of y on x.

    Returns (eta, tau, sigma2, summary) where sigma2 is the raw mean squared
    residual (no variance floor applied) and the summary's r2 is clamped to
    [0, 1], defined as 1 when y has zero variance.
    """
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    n = y.size
    if n < 2:
        raise InsufficientSupportError(f"need at least 2 pairs, got {n}")
    mu_x = float(x.mean())
    mu_y = float(y.mean())
    dx = x - mu_x
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DegenerateRegressorError("independent variable has zero variance")
    eta = float(dx @ (y - mu_y)) / sxx
    tau = float(np.mean(y - eta * x))
    resid = y - eta * x - tau
    sigma2 = float(np.mean(resid * resid))
    var_y = float(np.mean((y - mu_y) ** 2))
    r2 = 1.0 if var_y == 0.0 else min(1.0, max(0.0, 1.0 - sigma2 / var_y))
    return eta, tau, sigma2, FitSummary(support=n, mu_x=mu_x, mu_y=mu_y, r2=r2)


def derive_reverse(model: RegressionModel, eta_min: float = 0.0) -> RegressionModel:
    """Analytic opposite-direction model: eta'=1/eta, tau'=-tau/eta, w'=eta^2/sigma^2."""
    if model.eta == 0.0 or abs(model.eta) < eta_min:
        raise NonInvertibleSlopeError(
            f"slope {model.eta!r} below invertibility threshold {eta_min!r}"
        )
    eta2 = model.eta * model.eta
    return RegressionModel(
        key=model.key.reversed(),
        eta=1.0 / model.eta,
        tau=-model.tau / model.eta,
        sigma2=model.sigma2 / eta2,
        weight=eta2 / model.sigma2,
        fit=replace(
            model.fit, mu_x=model.fit.mu_y, mu_y=model.fit.mu_x, derived_reverse=True
        ),
    )


def _observed_attr_lists(attrs: AttributeTable) -> list[list[tuple[int, float]]]:
    """Per entity: (attr id, value) of OBSERVED entries, ascending attr id."""
    out: list[list[tuple[int, float]]] = []
    for entries in attrs.per_entity:
        out.append(
            [
                (int(attrs.attr_ids[i]), float(attrs.values[i]))
                for i in entries
                if attrs.status[i] == Status.OBSERVED
            ]
        )
    return out


def build_registry(bundle: DatasetBundle, admission: AdmissionConfig | None = None) -> ModelRegistry:
    """Fit and admit models for every forward relational and inner key.

    A single pass over the edges groups training pairs by (relation, dep,
    indep); inner pairs are grouped per unordered attribute pair in the
    canonical direction. Each admitted fit also registers its derived
    opposite-direction model when the slope is invertible. Rejection reasons
    are tallied in ``registry.rejections``.
    """
    admission = admission or AdmissionConfig()
    graph, attrs = bundle.graph, bundle.attrs
    observed_at = _observed_attr_lists(attrs)

    rel_groups: dict[tuple[int, int, int], tuple[list[float], list[float]]] = {}
    for head, relation, tail in graph.edges:
        for dep, y_val in observed_at[tail]:
            for indep, x_val in observed_at[head]:
                ys, xs = rel_groups.setdefault((relation, dep, indep), ([], []))
                ys.append(y_val)
                xs.append(x_val)

    inner_groups: dict[tuple[int, int], tuple[list[float], list[float]]] = {}
    for entity in range(graph.n_entities):
        obs = observed_at[entity]
        for i in range(len(obs)):
            for j in range(i + 1, len(obs)):
                indep, x_val = obs[i]
                dep, y_val = obs[j]  # canonical: regress higher attr id on lower
                ys, xs = inner_groups.setdefault((dep, indep), ([], []))
                ys.append(y_val)
                xs.append(x_val)

    models: dict[PathKey, RegressionModel] = {}
    rejections: Counter[str] = Counter()

    def admit(key: PathKey, ys: list[float], xs: list[float]) -> None:
        if admission.excludes(key, graph, attrs):
            rejections["excluded"] += 1
            return
        if len(ys) < max(2, admission.min_support):
            rejections["insufficient_support"] += 1
            return
        try:
            eta, tau, sigma2, fit = fit_simple_regression(np.asarray(ys), np.asarray(xs))
        except DegenerateRegressorError:
            rejections["degenerate_regressor"] += 1
            return
        if fit.r2 < admission.r2_min:
            rejections["low_r2"] += 1
            return
        dep_range = attrs.value_range(key.dep)
        floor = admission.var_floor_scale * dep_range * dep_range
        if floor <= 0.0:
            floor = admission.var_floor_scale  # constant-valued type: absolute floor
        sigma2 = max(sigma2, floor)
        model = RegressionModel(
            key=key, eta=eta, tau=tau, sigma2=sigma2, weight=1.0 / sigma2, fit=fit
        )
        models[key] = model
        indep_range = attrs.value_range(key.indep)
        eta_min = (
            admission.eta_min_scale * dep_range / indep_range if indep_range > 0.0 else 0.0
        )
        try:
            reverse = derive_reverse(model, eta_min)
        except NonInvertibleSlopeError:
            rejections["non_invertible_reverse"] += 1
            return
        models[reverse.key] = reverse

    for relation, dep, indep in sorted(rel_groups):
        ys, xs = rel_groups[(relation, dep, indep)]
        admit(PathKey.relational(dep, indep, relation, Direction.FORWARD), ys, xs)
    for dep, indep in sorted(inner_groups):
        ys, xs = inner_groups[(dep, indep)]
        admit(PathKey.inner(dep, indep), ys, xs)

    registry = ModelRegistry(models=models, admission=admission, rejections=dict(rejections))
    logger.info(
        "registry: %d models admitted, rejections %s", len(registry), registry.rejections
    )
    return registry


def count_paths(graph: KnowledgeGraph, registry: ModelRegistry, attrs: AttributeTable) -> int:
    """Number of (source attribute entry, model) message paths per iteration.

    Counts every combination of a tracked source entry with an admitted model
    that can carry a prediction out of it: over each edge in both directions,
    plus all within-node attribute pairs.
    """
    fwd_by_indep: dict[tuple[int, int], int] = Counter()
    rev_by_indep: dict[tuple[int, int], int] = Counter()
    inner_by_indep: dict[int, int] = Counter()
    for key in registry.models:
        if key.is_inner:
            inner_by_indep[key.indep] += 1
        elif key.direction is Direction.FORWARD:
            fwd_by_indep[(key.relation, key.indep)] += 1  # type: ignore[index]
        else:
            rev_by_indep[(key.relation, key.indep)] += 1  # type: ignore[index]

    attr_lists = [
        [int(attrs.attr_ids[i]) for i in entries] for entries in attrs.per_entity
    ]
    total = 0
    for head, relation, tail in graph.edges:
        for attr in attr_lists[head]:  # head entries flow forward to the tail
            total += fwd_by_indep.get((relation, attr), 0)
        for attr in attr_lists[tail]:  # tail entries flow reverse to the head
            total += rev_by_indep.get((relation, attr), 0)
    for attr_list in attr_lists:
        for attr in attr_list:
            total += inner_by_indep.get(attr, 0)
    return total


# -- model dump ----------------------------------------------------------------


def write_model_dump(fh: IO[str], registry: ModelRegistry, graph: KnowledgeGraph, attrs: AttributeTable) -> None:
    """Write one tab-separated line per model, floats at 17 significant digits."""
    def sort_key(key: PathKey):
        return (
            key.is_inner,
            -1 if key.relation is None else key.relation,
            int(key.direction) if key.direction is not None else -1,
            key.dep,
            key.indep,
        )

    for key in sorted(registry.models, key=sort_key):
        m = registry.models[key]
        dep = attrs.types.label(key.dep)
        indep = attrs.types.label(key.indep)
        rel = INNER_LABEL if key.is_inner else graph.relations.label(key.relation)  # type: ignore[arg-type]
        direction = "-" if key.is_inner else _DIRECTION_NAMES[key.direction]  # type: ignore[index]
        fields = (
            dep,
            indep,
            rel,
            direction,
            f"{m.eta:.17g}",
            f"{m.tau:.17g}",
            f"{m.sigma2:.17g}",
            f"{m.weight:.17g}",
            str(m.fit.support),
            f"{m.fit.r2:.17g}",
            "true" if m.fit.derived_reverse else "false",
        )
        fh.write("\t".join(fields) + "\n")


def read_model_dump(
    lines: Iterable[str] | IO[str],
    graph: KnowledgeGraph,
    attrs: AttributeTable,
    admission: AdmissionConfig | None = None,
) -> ModelRegistry:
    """Reload a registry written by :func:`write_model_dump`."""
    models: dict[PathKey, RegressionModel] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 11:
            raise ParseError(f"expected 11 tab-separated fields, got {len(fields)}", line_no)
        dep_l, indep_l, rel_l, dir_l, eta, tau, sigma2, weight, support, r2, derived = fields
        dep = attrs.types.get(dep_l)
        indep = attrs.types.get(indep_l)
        if dep is None or indep is None:
            raise ParseError(f"unknown attribute type in {dep_l!r}/{indep_l!r}", line_no)
        try:
            if rel_l == INNER_LABEL:
                key = PathKey.inner(dep, indep)
            else:
                relation = graph.relations.get(rel_l)
                if relation is None:
                    raise ParseError(f"unknown relation {rel_l!r}", line_no)
                direction = {v: k for k, v in _DIRECTION_NAMES.items()}.get(dir_l)
                if direction is None:
                    raise ParseError(f"unknown direction {dir_l!r}", line_no)
                key = PathKey.relational(dep, indep, relation, direction)
            model = RegressionModel(
                key=key,
                eta=float(eta),
                tau=float(tau),
                sigma2=float(sigma2),
                weight=float(weight),
                fit=FitSummary(
                    support=int(support),
                    mu_x=float("nan"),
                    mu_y=float("nan"),
                    r2=float(r2),
                    derived_reverse=derived == "true",
                ),
            )
        except ValueError as exc:
            raise ParseError(str(exc), line_no) from None
        if key in models:
            raise DataError(f"model dump line {line_no}: duplicate key")
        models[key] = model
    return ModelRegistry(models=models, admission=admission or AdmissionConfig())
