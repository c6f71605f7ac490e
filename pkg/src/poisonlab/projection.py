"""Deterministic exact t-SNE for the 2-D projection view.

Plain O(n^2) t-SNE: per-point binary search for affinity precisions,
symmetrized joint probabilities, gradient descent with momentum, adaptive
gains, and an early-exaggeration phase. No tree approximation; the
workbench operates at desk scale where exactness and determinism matter
more than speed. Internally rows are processed in instance-id order, so the
embedding is equivariant to input row permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .data import Dataset

MACHINE_EPS = 1e-12


@dataclass(frozen=True)
class ProjectionConfig:
    """t-SNE hyperparameters.

    perplexity is clamped to (n - 1) / 3.5 when the dataset is too small to
    support the requested value.
    """

    perplexity: float = 30.0
    iterations: int = 1000
    early_exaggeration: float = 12.0
    exaggeration_iterations: int = 250
    learning_rate: float = 200.0
    seed: int = 42

    def __post_init__(self):
        if self.perplexity <= 0 or not np.isfinite(self.perplexity):
            raise ValueError("perplexity must be a positive finite number")
        if self.iterations < self.exaggeration_iterations:
            raise ValueError("iterations must cover the early-exaggeration phase")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.early_exaggeration < 1:
            raise ValueError("early_exaggeration must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "ProjectionConfig":
        defaults = cls()
        return cls(
            perplexity=float(payload.get("perplexity", defaults.perplexity)),
            iterations=int(payload.get("iterations", defaults.iterations)),
            early_exaggeration=float(
                payload.get("early_exaggeration", defaults.early_exaggeration)
            ),
            exaggeration_iterations=int(
                payload.get("exaggeration_iterations", defaults.exaggeration_iterations)
            ),
            learning_rate=float(payload.get("learning_rate", defaults.learning_rate)),
            seed=int(payload.get("seed", defaults.seed)),
        )


@dataclass(frozen=True)
class ProjectionResult:
    """Embedding aligned to dataset row order, with KL checkpoints."""

    coordinates: np.ndarray
    final_kl: float
    kl_after_exaggeration: float | None

    def to_records(self, dataset: Dataset) -> list[dict]:
        return [
            {"id": int(i), "x": float(x), "y": float(y)}
            for i, (x, y) in zip(dataset.ids, self.coordinates)
        ]


def _squared_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _entropy_and_row(distances: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    p = np.exp(-distances * beta)
    total = float(p.sum())
    if total <= 0.0 or not np.isfinite(total):
        return 0.0, np.zeros_like(p)
    entropy = float(np.log(total) + beta * float((distances * p).sum()) / total)
    return entropy, p / total

def _conditional_probabilities(D: np.ndarray, perplexity: float) -> np.ndarray:
    """Per-row precisions matched to the perplexity entropy target.

    Binary search to |H - log perplexity| < 1e-5 within 50 halvings per
    point. Rows that cannot reach the target (e.g. all-identical points,
    where entropy is constant) keep the last searched row, which degrades
    to the uniform distribution.
    """
    n = D.shape[0]
    target = float(np.log(perplexity))
    P = np.zeros((n, n))
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        row = D[i][mask[i]]
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        entropy, p_row = _entropy_and_row(row, beta)
        tries = 0
        while abs(entropy - target) > 1e-5 and tries < 50:
            if entropy > target:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
            entropy, p_row = _entropy_and_row(row, beta)
            tries += 1
        if p_row.sum() <= 0.0:
            p_row = np.full(n - 1, 1.0 / (n - 1))
        P[i][mask[i]] = p_row
    return P


def _kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    return float(np.sum(P * np.log(P / Q)))


def tsne_embed(dataset: Dataset, config: ProjectionConfig | None = None) -> ProjectionResult:
    """Exact 2-D t-SNE of the dataset, deterministic for a fixed seed."""
    config = config or ProjectionConfig()
    n = dataset.n
    if n < 4:
        raise ValueError("t-SNE needs at least 4 instances")
    perplexity = min(config.perplexity, (n - 1) / 3.5)

    # instance-id order decouples the result from input row order
    order = np.argsort(dataset.ids, kind="stable")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    X = np.ascontiguousarray(dataset.X[order])

    D = _squared_distances(X)
    P = _conditional_probabilities(D, perplexity)
    P = P + P.T
    P = P / np.sum(P)
    P = np.maximum(P, MACHINE_EPS)
    P_plain = P.copy()
    if config.exaggeration_iterations > 0:
        P = P * config.early_exaggeration

    rng = np.random.default_rng(config.seed)
    Y = rng.standard_normal((n, 2)) * 1e-4
    velocity = np.zeros((n, 2))
    gains = np.ones((n, 2))
    kl_after_exaggeration: float | None = None

    for iteration in range(1, config.iterations + 1):
        num = 1.0 / (1.0 + _squared_distances(Y))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / np.sum(num), MACHINE_EPS)

        PQ = (P - Q) * num
        grad = 4.0 * ((np.diag(PQ.sum(axis=1)) - PQ) @ Y)

        momentum = 0.5 if iteration <= config.exaggeration_iterations else 0.8
        same_sign = (grad > 0.0) == (velocity > 0.0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        velocity = momentum * velocity - config.learning_rate * (gains * grad)
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

        if iteration == config.exaggeration_iterations:
            P = P_plain
            num = 1.0 / (1.0 + _squared_distances(Y))
            np.fill_diagonal(num, 0.0)
            Q = np.maximum(num / np.sum(num), MACHINE_EPS)
            kl_after_exaggeration = _kl_divergence(P_plain, Q)

    num = 1.0 / (1.0 + _squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / np.sum(num), MACHINE_EPS)
    final_kl = _kl_divergence(P_plain, Q)

    if not np.all(np.isfinite(Y)):
        raise FloatingPointError("embedding diverged to non-finite coordinates")
    return ProjectionResult(
        coordinates=Y[rank], final_kl=final_kl, kl_after_exaggeration=kl_after_exaggeration
    )
