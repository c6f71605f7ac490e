"""Binary-Search and StingRay targeted poisoning attacks.

Both attacks flip one target instance's predicted label by inserting
crafted training instances, retraining after every insertion. The loop is
deterministic for a fixed (dataset, configs, target, seed), and it is
prefix-stable: raising the budget never changes the first iterations, which
is what makes minimum-cost search by capped runs sound.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, field

import numpy as np

from .data import Dataset, Instance, Provenance
from .classifier import (
    LogisticRegressionGD,
    Metrics,
    ModelConfig,
    evaluate,
    feature_importance,
    model_to_dict,
    train,
)

BINARY_SEARCH = "binary-search"
STINGRAY = "stingray"
ALGORITHMS = (BINARY_SEARCH, STINGRAY)


@dataclass(frozen=True)
class AttackConfig:
    """Attack hyperparameters.

    budget: maximum number of poison insertions.
    bisection_cap: Binary-Search reset depth per iteration.
    candidate_count: StingRay perturbed copies generated per iteration.
    perturb_fraction: fraction of least-important features StingRay may touch.
    perturb_scale: StingRay noise half-width as a multiple of feature stddev.
    """

    algorithm: str
    budget: int
    bisection_cap: int = 20
    candidate_count: int = 20
    perturb_fraction: float = 0.25
    perturb_scale: float = 0.5
    seed: int = 42

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.bisection_cap < 1:
            raise ValueError("bisection_cap must be >= 1")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")
        if not 0 < self.perturb_fraction <= 1:
            raise ValueError("perturb_fraction must be in (0, 1]")
        if self.perturb_scale < 0:
            raise ValueError("perturb_scale must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "AttackConfig":
        return cls(
            algorithm=str(payload["algorithm"]),
            budget=int(payload["budget"]),
            bisection_cap=int(payload.get("bisection_cap", 20)),
            candidate_count=int(payload.get("candidate_count", 20)),
            perturb_fraction=float(payload.get("perturb_fraction", 0.25)),
            perturb_scale=float(payload.get("perturb_scale", 0.5)),
            seed=int(payload.get("seed", 42)),
        )


@dataclass(frozen=True)
class TraceRecord:
    """One attack iteration: candidate outcome and post-retrain target state.

    resets_used is Binary-Search only; candidates_kept is StingRay only.
    target_desired_proba is the retrained model's probability of the desired
    class for the target, absent when the iteration produced no candidate.
    """

    iteration: int
    accepted: bool
    poison_id: int | None = None
    neighbor_id: int | None = None
    resets_used: int | None = None
    candidates_kept: int | None = None
    target_desired_proba: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AttackResult:
    """Outcome of one targeted poisoning run."""

    target_id: int
    desired_label: int
    success: bool
    poisons: tuple[Instance, ...]
    victim_model: LogisticRegressionGD
    poisoned_model: LogisticRegressionGD
    trace: tuple[TraceRecord, ...]
    innocents: tuple[int, ...]
    poisoning_rate: float
    victim_metrics: Metrics
    poisoned_metrics: Metrics
    poisoned_dataset: Dataset = field(repr=False)
    attack_config: AttackConfig = field(repr=False)
    model_config: ModelConfig = field(repr=False)

    @property
    def n_poisons(self) -> int:
        return len(self.poisons)


def _midpoint(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a + b) / 2.0


def _desired_of(model: LogisticRegressionGD, anchor: np.ndarray) -> int:
    # the neighbor/base is by construction predicted in the desired class
    return int(model.predict(anchor.reshape(1, -1))[0])


def _bisect_candidate(
    target: np.ndarray,
    nn: np.ndarray,
    model: LogisticRegressionGD,
    bisection_cap: int,
) -> tuple[np.ndarray | None, int]:
    desired = _desired_of(model, nn)
    candidate = _midpoint(target, nn)
    resets = 0
    while int(model.predict(candidate.reshape(1, -1))[0]) != desired:
        if resets >= bisection_cap:
            return None, resets
        candidate = _midpoint(candidate, nn)
        resets += 1
    return candidate, resets


def binary_search_candidate(
    target: np.ndarray,
    nn: np.ndarray,
    model: LogisticRegressionGD,
    bisection_cap: int,
) -> np.ndarray | None:
    """Poison candidate between the target and its nearest desired-class
    neighbor.

    Starts at the midpoint of target and neighbor; while the model keeps
    predicting the candidate outside the neighbor's (desired) class and the
    cap is not exhausted, the candidate is reset to the midpoint of itself
    and the neighbor. Returns the first candidate predicted in the desired
    class, or None when the cap runs out with no valid candidate.
    """
    candidate, _ = _bisect_candidate(
        np.asarray(target, dtype=np.float64), np.asarray(nn, dtype=np.float64), model, bisection_cap
    )
    return candidate


def _perturbable_features(victim_model: LogisticRegressionGD, fraction: float) -> np.ndarray:
    d = victim_model.n_features_in_
    count = int(np.ceil(fraction * d))
    ranked = feature_importance(victim_model)
    return np.array([idx for idx, _ in ranked[d - count :]], dtype=np.int64)


def _stingray_candidate(
    target: np.ndarray,
    base: np.ndarray,
    model: LogisticRegressionGD,
    victim_model: LogisticRegressionGD,
    config: AttackConfig,
    rng: np.random.Generator,
    feature_stds: np.ndarray,
) -> tuple[np.ndarray | None, int]:
    desired = _desired_of(model, base)
    features = _perturbable_features(victim_model, config.perturb_fraction)
    half_width = config.perturb_scale * feature_stds[features]
    copies = np.tile(base, (config.candidate_count, 1))
    noise = rng.uniform(-half_width, half_width, size=(config.candidate_count, len(features)))
    copies[:, features] += noise
    kept = copies[model.predict(copies) == desired]
    if len(kept) == 0:
        return None, 0
    distances = np.linalg.norm(kept - target, axis=1)
    return kept[int(np.argmin(distances))], len(kept)


def stingray_candidate(
    target: np.ndarray,
    base: np.ndarray,
    model: LogisticRegressionGD,
    victim_model: LogisticRegressionGD,
    config: AttackConfig,
    rng: np.random.Generator,
    feature_stds: np.ndarray,
) -> np.ndarray | None:
    """Poison candidate built from perturbed copies of a desired-class base.

    Generates ``candidate_count`` copies of the base, adds independent
    uniform noise in [-perturb_scale * stddev, +perturb_scale * stddev] to
    the ceil(perturb_fraction * d) features with the smallest victim-weight
    magnitude, keeps the copies the current model predicts in the desired
    class, and returns the kept copy closest to the target. None when no
    copy survives the class filter.
    """
    candidate, _ = _stingray_candidate(
        np.asarray(target, dtype=np.float64),
        np.asarray(base, dtype=np.float64),
        model,
        victim_model,
        config,
        rng,
        feature_stds,
    )
    return candidate


def run_attack(
    dataset: Dataset,
    model_config: ModelConfig,
    attack_config: AttackConfig,
    target_id: int,
    *,
    victim: LogisticRegressionGD | None = None,
) -> AttackResult:
    """Insert-and-retrain poisoning loop against one target instance.

    The desired label is the negation of the target's stored label. Each
    iteration picks the Euclidean-nearest training member (original or prior
    poison) currently predicted in the desired class, builds a poison
    candidate from it, inserts the poison with the desired label, and
    retrains. The attack succeeds as soon as the retrained model predicts
    the target in the desired class; it fails when the budget is exhausted
    or an iteration cannot produce a valid candidate.

    ``victim`` may carry a model already trained on this exact dataset and
    config; training is deterministic, so passing it only skips a retrain.
    """
    target_row = dataset.row_of(target_id)
    target = dataset.X[target_row]
    desired = -int(dataset.y[target_row])
    if victim is None:
        victim = train(dataset, model_config)
    feature_stds = dataset.X.std(axis=0)
    rng = np.random.default_rng(attack_config.seed)

    current_dataset = dataset
    current_model = victim
    trace: list[TraceRecord] = []
    success = int(victim.predict(target.reshape(1, -1))[0]) == desired

    iteration = 0
    while not success and iteration < attack_config.budget:
        iteration += 1
        predictions = current_model.predict(current_dataset.X)
        pool = np.nonzero(predictions == desired)[0]
        if len(pool) == 0:
            trace.append(TraceRecord(iteration=iteration, accepted=False))
            break
        distances = np.linalg.norm(current_dataset.X[pool] - target, axis=1)
        nn_row = int(pool[int(np.argmin(distances))])
        nn_id = int(current_dataset.ids[nn_row])
        nn_vec = current_dataset.X[nn_row]

        resets_used: int | None = None
        candidates_kept: int | None = None
        if attack_config.algorithm == BINARY_SEARCH:
            candidate, resets_used = _bisect_candidate(
                target, nn_vec, current_model, attack_config.bisection_cap
            )
        else:
            candidate, candidates_kept = _stingray_candidate(
                target, nn_vec, current_model, victim, attack_config, rng, feature_stds
            )
        if candidate is None:
            trace.append(
                TraceRecord(
                    iteration=iteration,
                    accepted=False,
                    neighbor_id=nn_id,
                    resets_used=resets_used,
                    candidates_kept=candidates_kept,
                )
            )
            break

        current_dataset = current_dataset.with_poisons([candidate], desired)
        current_model = train(current_dataset, model_config)
        target_proba = float(current_model.positive_proba(target.reshape(1, -1))[0])
        if desired == -1:
            target_proba = 1.0 - target_proba
        trace.append(
            TraceRecord(
                iteration=iteration,
                accepted=True,
                poison_id=int(current_dataset.ids[-1]),
                neighbor_id=nn_id,
                resets_used=resets_used,
                candidates_kept=candidates_kept,
                target_desired_proba=target_proba,
            )
        )
        success = int(current_model.predict(target.reshape(1, -1))[0]) == desired

    poison_mask = current_dataset.poison_mask()
    poisons = tuple(
        Instance(
            id=int(current_dataset.ids[row]),
            features=current_dataset.X[row].copy(),
            label=int(current_dataset.y[row]),
            provenance=Provenance.POISONED,
        )
        for row in np.nonzero(poison_mask)[0]
    )
    victim_pred = victim.predict(dataset.X)
    final_pred = current_model.predict(dataset.X)
    innocents = tuple(
        int(i)
        for i in dataset.ids[(victim_pred != final_pred) & (dataset.ids != target_id)]
    )
    m = len(poisons)
    return AttackResult(
        target_id=target_id,
        desired_label=desired,
        success=success,
        poisons=poisons,
        victim_model=victim,
        poisoned_model=current_model,
        trace=tuple(trace),
        innocents=innocents,
        poisoning_rate=m / (dataset.n + m),
        victim_metrics=evaluate(victim, dataset),
        poisoned_metrics=evaluate(current_model, dataset),
        poisoned_dataset=current_dataset,
        attack_config=attack_config,
        model_config=model_config,
    )


def attack_result_to_dict(result: AttackResult, dataset: Dataset) -> dict:
    """Serializable attack summary with poison vectors in raw feature space."""
    return {
        "algorithm": result.attack_config.algorithm,
        "target_id": result.target_id,
        "desired_label": result.desired_label,
        "success": result.success,
        "n_poisons": result.n_poisons,
        "poisoning_rate": result.poisoning_rate,
        "attack_config": result.attack_config.to_dict(),
        "model_config": result.model_config.to_dict(),
        "poisons": [
            {
                "id": p.id,
                "label": p.label,
                "features": [float(v) for v in dataset.to_raw(p.features)],
            }
            for p in result.poisons
        ],
        "innocents": list(result.innocents),
        "trace": [record.to_dict() for record in result.trace],
        "victim_model": model_to_dict(result.victim_model),
        "poisoned_model": model_to_dict(result.poisoned_model),
        "victim_metrics": result.victim_metrics.to_dict(),
        "poisoned_metrics": result.poisoned_metrics.to_dict(),
    }
