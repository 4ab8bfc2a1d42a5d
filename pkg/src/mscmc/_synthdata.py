"""Deterministic synthetic stand-in for the Cleveland cardiovascular file.

The real processed Cleveland file (303 patients, 14 columns, "?" as the
missing marker) is not redistributable from here, so tests and demos use a
generated file with the same layout, realistic marginals, six rows carrying
missing markers, and a genuinely informative disease signal.  Substituting
the real file changes only the numbers, not any code path.
"""
from __future__ import annotations

import numpy as np

from .rng import derive_stream

SYNTH_SEED = 20240 + 5


def synthetic_heart_rows(n: int = 303, seed: int = SYNTH_SEED) -> list[str]:
    """Generate ``n`` comma-separated Cleveland-layout rows (deterministic)."""
    gen = derive_stream(seed, "synthetic-heart", 0).gen

    age = np.clip(np.round(gen.normal(54.4, 9.0, n)), 29, 77)
    sex = (gen.random(n) < 0.68).astype(float)
    cp = gen.choice([1.0, 2.0, 3.0, 4.0], size=n, p=[0.08, 0.17, 0.28, 0.47])
    trestbps = np.clip(np.round(gen.normal(131.7, 17.5, n)), 94, 200)
    chol = np.clip(np.round(gen.normal(246.7, 51.0, n)), 126, 564)
    fbs = (gen.random(n) < 0.15).astype(float)
    restecg = gen.choice([0.0, 1.0, 2.0], size=n, p=[0.50, 0.02, 0.48])
    thalach = np.clip(np.round(gen.normal(149.6, 22.9, n)), 71, 202)
    exang = (gen.random(n) < 0.33).astype(float)
    oldpeak = np.round(np.clip(gen.exponential(1.04, n), 0.0, 6.2), 1)
    slope = gen.choice([1.0, 2.0, 3.0], size=n, p=[0.47, 0.46, 0.07])
    ca = gen.choice([0.0, 1.0, 2.0, 3.0], size=n, p=[0.59, 0.21, 0.12, 0.08])
    thal = gen.choice([3.0, 6.0, 7.0], size=n, p=[0.55, 0.06, 0.39])

    # disease propensity from a plausible subset of risk factors
    logits = (
        -2.7
        + 0.04 * (age - 54.4)
        + 0.9 * sex
        + 0.7 * (cp == 4.0)
        + 0.012 * (trestbps - 131.7)
        - 0.02 * (thalach - 149.6)
        + 0.9 * exang
        + 0.55 * oldpeak
        + 0.75 * ca
        + 0.9 * (thal == 7.0)
    )
    sick = gen.random(n) < 1.0 / (1.0 + np.exp(-logits))
    severity = gen.choice([1.0, 2.0, 3.0, 4.0], size=n, p=[0.49, 0.33, 0.12, 0.06])
    num = np.where(sick, severity, 0.0)

    cols = [age, sex, cp, trestbps, chol, fbs, restecg, thalach, exang,
            oldpeak, slope, ca, thal, num]
    rows = []
    for i in range(n):
        fields = [f"{c[i]:g}" for c in cols]
        rows.append(",".join(fields))

    # the real file carries "?" in ca (4 rows) and thal (2 rows)
    for i in (87, 166, 192, 266):
        parts = rows[i].split(",")
        parts[11] = "?"
        rows[i] = ",".join(parts)
    for i in (139, 251):
        parts = rows[i].split(",")
        parts[12] = "?"
        rows[i] = ",".join(parts)
    return rows


def write_synthetic_heart(path: str, n: int = 303, seed: int = SYNTH_SEED) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(synthetic_heart_rows(n, seed)) + "\n")
