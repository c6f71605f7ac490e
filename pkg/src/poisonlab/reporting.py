"""Analytic payloads: model overview, instance attributes, feature report.

All three summarize one attack result. Metrics compare the victim and
poisoned models on the original training data only, so the two are always
measured on the same instances; probabilities reported to views are each
model's confidence in its own predicted label (0.5 means "on the
boundary").
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .data import Dataset
from .classifier import LogisticRegressionGD, Metrics, feature_importance
from .attacks import AttackResult
from .vulnerability import DbdConfig, estimate_dbd

KIND_TARGET = "Target"
KIND_INNOCENT = "Innocent"
KIND_POISON = "Poison"
KIND_OTHER = "Other"
ALL_KINDS = frozenset({KIND_TARGET, KIND_INNOCENT, KIND_POISON, KIND_OTHER})


@dataclass(frozen=True)
class ModelOverview:
    """Victim-vs-poisoned comparison header for one attack."""

    victim_metrics: Metrics
    poisoned_metrics: Metrics
    target_id: int
    desired_label: int
    poison_count: int
    poisoning_rate: float

    def to_dict(self) -> dict:
        return {
            "victim_metrics": self.victim_metrics.to_dict(),
            "poisoned_metrics": self.poisoned_metrics.to_dict(),
            "target_id": self.target_id,
            "desired_label": self.desired_label,
            "poison_count": self.poison_count,
            "poisoning_rate": self.poisoning_rate,
        }


def model_overview(result: AttackResult, dataset: Dataset) -> ModelOverview:
    """Both models' metrics over the original dataset, poisons excluded."""
    return ModelOverview(
        victim_metrics=result.victim_metrics,
        poisoned_metrics=result.poisoned_metrics,
        target_id=result.target_id,
        desired_label=result.desired_label,
        poison_count=result.n_poisons,
        poisoning_rate=result.poisoning_rate,
    )


@dataclass(frozen=True)
class InstanceAttributeRow:
    """Per-instance glyph data: probabilities and DBDs under both models.

    Poison rows exist only post-attack, so their victim-side values are
    absent. A None DBD means no sampled direction flipped the prediction
    within the step limit.
    """

    instance_id: int
    instance_kind: str
    victim_probability: float | None
    poisoned_probability: float
    victim_dbd: float | None
    poisoned_dbd: float | None
    victim_label: int | None
    poisoned_label: int
    flipped: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _confidence(model: LogisticRegressionGD, vec: np.ndarray) -> tuple[int, float]:
    p_pos = float(model.positive_proba(vec.reshape(1, -1))[0])
    label = int(model.predict(vec.reshape(1, -1))[0])
    return label, p_pos if label == 1 else 1.0 - p_pos


def instance_attributes(
    result: AttackResult,
    dataset: Dataset,
    dbd_config: DbdConfig,
    kinds: frozenset[str] | set[str] | None = None,
) -> list[InstanceAttributeRow]:
    """Attribute rows for original instances and poisons passing the filter."""
    kinds = ALL_KINDS if kinds is None else frozenset(kinds)
    unknown = kinds - ALL_KINDS
    if unknown:
        raise ValueError(f"unknown instance kinds: {sorted(unknown)}")
    victim = result.victim_model
    poisoned_model = result.poisoned_model
    innocent_ids = set(result.innocents)

    rows: list[InstanceAttributeRow] = []
    for i in range(dataset.n):
        instance_id = int(dataset.ids[i])
        if instance_id == result.target_id:
            kind = KIND_TARGET
        elif instance_id in innocent_ids:
            kind = KIND_INNOCENT
        else:
            kind = KIND_OTHER
        if kind not in kinds:
            continue
        vec = dataset.X[i]
        victim_label, victim_prob = _confidence(victim, vec)
        poisoned_label, poisoned_prob = _confidence(poisoned_model, vec)
        rows.append(
            InstanceAttributeRow(
                instance_id=instance_id,
                instance_kind=kind,
                victim_probability=victim_prob,
                poisoned_probability=poisoned_prob,
                victim_dbd=estimate_dbd(victim, vec, dbd_config),
                poisoned_dbd=estimate_dbd(poisoned_model, vec, dbd_config),
                victim_label=victim_label,
                poisoned_label=poisoned_label,
                flipped=victim_label != poisoned_label,
            )
        )
    if KIND_POISON in kinds:
        for poison in result.poisons:
            poisoned_label, poisoned_prob = _confidence(poisoned_model, poison.features)
            rows.append(
                InstanceAttributeRow(
                    instance_id=poison.id,
                    instance_kind=KIND_POISON,
                    victim_probability=None,
                    poisoned_probability=poisoned_prob,
                    victim_dbd=None,
                    poisoned_dbd=estimate_dbd(poisoned_model, poison.features, dbd_config),
                    victim_label=None,
                    poisoned_label=poisoned_label,
                    flipped=False,
                )
            )
    return rows


@dataclass(frozen=True)
class FeatureReportRow:
    """Distribution and importance comparison for one feature.

    Histogram groups share bin edges; ranks are 1-based positions in each
    model's importance ordering, rank_delta = victim_rank - poisoned_rank.
    """

    feature_name: str
    bin_edges: list[float]
    histograms: dict[str, list[int]]
    victim_importance: float
    poisoned_importance: float
    victim_rank: int
    poisoned_rank: int
    rank_delta: int

    def to_dict(self) -> dict:
        return asdict(self)


def feature_report(result: AttackResult, dataset: Dataset, bins: int = 20) -> list[FeatureReportRow]:
    """Per-feature raw-space histograms and importance ranks for both models."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    raw = dataset.to_raw(dataset.X)
    poison_raw = (
        np.vstack([dataset.to_raw(p.features) for p in result.poisons])
        if result.poisons
        else np.empty((0, dataset.d))
    )
    negatives = raw[dataset.y == -1]
    positives = raw[dataset.y == 1]

    victim_rank = _ranks(result.victim_model)
    poisoned_rank = _ranks(result.poisoned_model)
    victim_magnitude = np.abs(result.victim_model.weights_)
    poisoned_magnitude = np.abs(result.poisoned_model.weights_)

    rows = []
    for f, name in enumerate(dataset.feature_names):
        combined = np.concatenate([raw[:, f], poison_raw[:, f]])
        low, high = float(combined.min()), float(combined.max())
        if low == high:
            low, high = low - 0.5, high + 0.5
        edges = np.linspace(low, high, bins + 1)
        rows.append(
            FeatureReportRow(
                feature_name=name,
                bin_edges=[float(e) for e in edges],
                histograms={
                    "negative": np.histogram(negatives[:, f], bins=edges)[0].tolist(),
                    "positive": np.histogram(positives[:, f], bins=edges)[0].tolist(),
                    "poison": np.histogram(poison_raw[:, f], bins=edges)[0].tolist(),
                },
                victim_importance=float(victim_magnitude[f]),
                poisoned_importance=float(poisoned_magnitude[f]),
                victim_rank=victim_rank[f],
                poisoned_rank=poisoned_rank[f],
                rank_delta=victim_rank[f] - poisoned_rank[f],
            )
        )
    return rows


def _ranks(model: LogisticRegressionGD) -> dict[int, int]:
    return {idx: position + 1 for position, (idx, _) in enumerate(feature_importance(model))}
