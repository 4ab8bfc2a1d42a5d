import os

import numpy as np
import pytest

from mscmc.logit import Dataset, LogitPosterior
from mscmc.rng import derive_stream

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
HEART_PATH = os.path.join(REPO_ROOT, "data", "synthetic-cleveland.data")


@pytest.fixture(scope="session")
def heart_path() -> str:
    assert os.path.exists(HEART_PATH), "run scripts/make_heart_data.py first"
    return HEART_PATH


@pytest.fixture(scope="session")
def tiny_symmetric_posterior() -> LogitPosterior:
    """Two mirrored observations in one dimension: posterior symmetric about 0."""
    X = np.array([[1.0], [1.0]])
    y = np.array([1.0, 0.0])
    ds = Dataset(X=X, y=y, column_names=["x"])
    return LogitPosterior(ds, np.array([[10.0]]), h=0.49)


@pytest.fixture(scope="session")
def small_synthetic_posterior() -> LogitPosterior:
    """n=20, d=2 random design: informative but wide enough for good restarts."""
    gen = derive_stream(314, "small-synth", 0).gen
    X = gen.standard_normal((20, 2))
    logits = X @ np.array([0.8, -0.5])
    y = (gen.random(20) < 1.0 / (1.0 + np.exp(-logits))).astype(float)
    ds = Dataset(X=X, y=y, column_names=["x0", "x1"])
    return LogitPosterior(ds, 10.0 * np.eye(2), h=0.49)


def bootstrap_stderr(gen, values: np.ndarray, stat, n_boot: int = 200) -> float:
    """Nonparametric bootstrap standard error of ``stat`` over ``values``."""
    n = len(values)
    reps = np.empty(n_boot)
    for b in range(n_boot):
        reps[b] = stat(values[gen.integers(0, n, size=n)])
    return float(reps.std(ddof=1))
