"""Shared fixtures: synthetic corpora and victim models, built once per run."""

import numpy as np
import pytest

from poisonlab import ModelConfig, evaluate, standardize, stratified_subsample, train

from synth import digit_corpus, email_corpus, two_gaussians, write_csv


@pytest.fixture(scope="session")
def email_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpora") / "emails.csv"
    write_csv(email_corpus(), path, label_names=("nonspam", "spam"))
    return path


@pytest.fixture(scope="session")
def email400():
    """Standardized 400-row stratified subsample of the email corpus."""
    return standardize(stratified_subsample(email_corpus(), 400, seed=42))


@pytest.fixture(scope="session")
def gauss200():
    """Standardized 200-point two-Gaussian set (centers +-2, sigma 1, seed 42)."""
    return standardize(two_gaussians(n=200, center=2.0, sigma=1.0, seed=42))


@pytest.fixture(scope="session")
def gauss200_victim(gauss200):
    return train(gauss200, ModelConfig())


@pytest.fixture(scope="session")
def gauss60():
    """Small standardized set for fast service and CLI tests."""
    return standardize(two_gaussians(n=60, center=2.0, sigma=1.0, seed=11))


@pytest.fixture(scope="session")
def digit400():
    """Standardized 400-image digit-style corpus."""
    return standardize(digit_corpus())


@pytest.fixture(scope="session")
def near_boundary_targets(gauss200, gauss200_victim):
    """Ten instance ids closest to the victim decision boundary."""
    margins = np.abs(gauss200_victim.decision_function(gauss200.X))
    rows = np.argsort(margins)[:10]
    return [int(gauss200.ids[r]) for r in rows]


@pytest.fixture(scope="session")
def gauss200_metrics(gauss200, gauss200_victim):
    return evaluate(gauss200_victim, gauss200)
