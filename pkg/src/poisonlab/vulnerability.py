"""Per-instance vulnerability measures and the full-dataset sweep.

Two measures are computed for every training instance: the estimated
decision-boundary distance (DBD, by stepping along sampled directions until
the prediction flips) and the minimum cost of a successful attack (MCSA, by
running a capped poisoning attack whose deterministic loop makes the capped
run equal the minimum).
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from .data import Dataset
from .classifier import LogisticRegressionGD, Metrics, ModelConfig, train
from .attacks import AttackConfig, run_attack

RISK_HIGH = "High"
RISK_INTERMEDIATE = "Intermediate"
RISK_LOW = "Low"
RISK_UNKNOWN = "Unknown"


@dataclass(frozen=True)
class DbdConfig:
    """Direction-sampling parameters for boundary-distance estimation."""

    n_directions: int = 256
    step_length: float = 0.05
    max_steps: int = 400
    seed: int = 42

    def __post_init__(self):
        if self.n_directions < 1:
            raise ValueError("n_directions must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.step_length <= 0:
            raise ValueError("step_length must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "DbdConfig":
        return cls(
            n_directions=int(payload.get("n_directions", 256)),
            step_length=float(payload.get("step_length", 0.05)),
            max_steps=int(payload.get("max_steps", 400)),
            seed=int(payload.get("seed", 42)),
        )


def sample_unit_directions(n_directions: int, d: int, seed: int) -> np.ndarray:
    """Seeded uniform directions: normalized Gaussian draws, zero-norm redrawn."""
    if d == 0:
        raise ValueError("cannot sample directions in 0 dimensions")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n_directions, d))
    norms = np.linalg.norm(directions, axis=1)
    while np.any(norms == 0.0):
        zero = norms == 0.0
        directions[zero] = rng.standard_normal((int(zero.sum()), d))
        norms = np.linalg.norm(directions, axis=1)
    return directions / norms[:, None]


def estimate_dbd(
    model: LogisticRegressionGD, features: np.ndarray, config: DbdConfig
) -> float | None:
    """Estimated distance from a point to the model's decision boundary.

    Walks every sampled direction in step_length increments until the
    prediction flips relative to the point's own predicted label; the
    estimate is step_length times the minimum flipping step count. None
    means no direction flipped within max_steps.
    """
    x = np.asarray(features, dtype=np.float64)
    directions = sample_unit_directions(config.n_directions, len(x), config.seed)
    own_label = int(model.predict(x.reshape(1, -1))[0])
    for step in range(1, config.max_steps + 1):
        probes = x + (step * config.step_length) * directions
        if np.any(model.predict(probes) != own_label):
            return step * config.step_length
    return None


def risk_level(poisoning_rate: float) -> str:
    """Risk bucket for a poisoning rate; boundary rates are Intermediate."""
    if not 0.0 <= poisoning_rate <= 1.0:
        raise ValueError(f"poisoning rate must be in [0, 1], got {poisoning_rate}")
    if poisoning_rate < 0.05:
        return RISK_HIGH
    if poisoning_rate <= 0.20:
        return RISK_INTERMEDIATE
    return RISK_LOW


def default_cap(n: int) -> int:
    """Default MCSA insertion cap: 25% of the training-set size, rounded up."""
    return int(np.ceil(0.25 * n))


def mcsa(
    dataset: Dataset,
    model_config: ModelConfig,
    attack_config: AttackConfig,
    target_id: int,
    cap: int,
    *,
    victim: LogisticRegressionGD | None = None,
) -> int | None:
    """Minimum poison insertions that flip the target, or None at the cap.

    Runs the attack with budget = cap; the loop is deterministic and
    prefix-stable, so the insertion count of a capped success is the
    algorithm's minimum. None encodes failure at the cap.
    """
    result = run_attack(
        dataset, model_config, replace(attack_config, budget=cap), target_id, victim=victim
    )
    return result.n_poisons if result.success else None


@dataclass(frozen=True)
class AlgorithmOutcome:
    """Per-algorithm slice of a vulnerability row."""

    mcsa: int | None
    poisoning_rate: float | None
    risk: str
    post_attack_metrics: Metrics | None
    error: str | None = None


@dataclass(frozen=True)
class VulnerabilityRow:
    """One instance's vulnerability measures, keyed by attack algorithm."""

    instance_id: int
    true_label: int
    predicted_label: int
    dbd: float | None
    attacks: dict[str, AlgorithmOutcome]


_WORKER: dict = {}


def _init_sweep_worker(
    dataset: Dataset,
    victim: LogisticRegressionGD,
    model_config: ModelConfig,
    attack_configs: tuple[AttackConfig, ...],
    dbd_config: DbdConfig,
    cap: int,
) -> None:
    _WORKER.update(
        dataset=dataset,
        victim=victim,
        model_config=model_config,
        attack_configs=attack_configs,
        dbd_config=dbd_config,
        cap=cap,
    )


def _sweep_one_target(target_id: int) -> VulnerabilityRow:
    dataset: Dataset = _WORKER["dataset"]
    victim: LogisticRegressionGD = _WORKER["victim"]
    row = dataset.row_of(target_id)
    features = dataset.X[row]
    dbd = estimate_dbd(victim, features, _WORKER["dbd_config"])
    outcomes: dict[str, AlgorithmOutcome] = {}
    for attack_config in _WORKER["attack_configs"]:
        try:
            result = run_attack(
                dataset,
                _WORKER["model_config"],
                replace(attack_config, budget=_WORKER["cap"]),
                target_id,
                victim=victim,
            )
            if result.success:
                outcomes[attack_config.algorithm] = AlgorithmOutcome(
                    mcsa=result.n_poisons,
                    poisoning_rate=result.poisoning_rate,
                    risk=risk_level(result.poisoning_rate),
                    post_attack_metrics=result.poisoned_metrics,
                )
            else:
                outcomes[attack_config.algorithm] = AlgorithmOutcome(
                    mcsa=None,
                    poisoning_rate=None,
                    risk=RISK_UNKNOWN,
                    post_attack_metrics=result.poisoned_metrics,
                )
        except Exception as exc:  # failure marker, sweep must not abort
            outcomes[attack_config.algorithm] = AlgorithmOutcome(
                mcsa=None,
                poisoning_rate=None,
                risk=RISK_UNKNOWN,
                post_attack_metrics=None,
                error=str(exc),
            )
    return VulnerabilityRow(
        instance_id=target_id,
        true_label=int(dataset.y[row]),
        predicted_label=int(victim.predict(features.reshape(1, -1))[0]),
        dbd=dbd,
        attacks=outcomes,
    )


def vulnerability_sweep(
    dataset: Dataset,
    model_config: ModelConfig,
    attack_configs: list[AttackConfig],
    dbd_config: DbdConfig,
    cap: int | None = None,
    parallelism: int = 1,
    progress_callback=None,
) -> list[VulnerabilityRow]:
    """Vulnerability measures for every instance, sorted by instance id.

    Per-target attacks are independent, so they are distributed across
    processes; assembly sorts by instance id, making the output identical
    for any parallelism degree. Per-instance attack errors are recorded on
    the row instead of aborting the sweep. progress_callback, when given,
    receives the completed fraction after each target.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    cap = default_cap(dataset.n) if cap is None else cap
    victim = train(dataset, model_config)
    configs = tuple(attack_configs)
    targets = [int(i) for i in dataset.ids]

    def collect(iterator) -> list[VulnerabilityRow]:
        rows = []
        for row in iterator:
            rows.append(row)
            if progress_callback is not None:
                progress_callback(len(rows) / len(targets))
        return rows

    if parallelism == 1:
        _init_sweep_worker(dataset, victim, model_config, configs, dbd_config, cap)
        try:
            rows = collect(map(_sweep_one_target, targets))
        finally:
            _WORKER.clear()
    else:
        with ProcessPoolExecutor(
            max_workers=parallelism,
            initializer=_init_sweep_worker,
            initargs=(dataset, victim, model_config, configs, dbd_config, cap),
        ) as pool:
            rows = collect(pool.map(_sweep_one_target, targets, chunksize=4))
    return sorted(rows, key=lambda r: r.instance_id)


def sweep_records(rows: list[VulnerabilityRow]) -> list[dict]:
    """Flat export records: one dict per instance, algorithm-suffixed columns."""
    records = []
    for row in rows:
        record: dict = {
            "id": row.instance_id,
            "label": row.true_label,
            "predicted": row.predicted_label,
            "dbd": row.dbd,
        }
        for algorithm, outcome in row.attacks.items():
            metrics = outcome.post_attack_metrics
            record[f"mcsa_{algorithm}"] = outcome.mcsa
            record[f"risk_{algorithm}"] = outcome.risk
            record[f"accuracy_{algorithm}"] = None if metrics is None else metrics.accuracy
            record[f"recall_{algorithm}"] = None if metrics is None else metrics.recall
        records.append(record)
    return records


def write_sweep_csv(rows: list[VulnerabilityRow], path: str | Path) -> None:
    """Sweep export as CSV; empty cells encode the NotReached/FailedAtCap case."""
    records = sweep_records(rows)
    if not records:
        raise ValueError("no rows to export")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        columns = list(records[0].keys())
        writer.writerow(columns)
        for record in records:
            writer.writerow(
                ["" if record[c] is None else _csv_cell(record[c]) for c in columns]
            )


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
