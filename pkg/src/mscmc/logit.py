"""Bayesian logistic regression with latent Polya-Gamma augmentation.

Covers the posterior and its mode, the Gaussian importance proposal centered
at the mode, the two-block Gibbs kernel whose beta-marginal targets the
posterior, and ingestion of the Cleveland-layout cardiovascular data file.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .bounds import logit_gibbs_constants
from .engine import DriftSpec, ModelBundle
from .rng import RngStream, sample_polya_gamma_batch

__all__ = [
    "Dataset",
    "DataFormatError",
    "load_heart_dataset",
    "HEART_COLUMNS",
    "NOMINAL_COLUMNS",
    "neg_log_lik",
    "neg_log_lik_grad",
    "neg_log_lik_hess",
    "log_unnorm_posterior",
    "LogitPosterior",
    "map_estimate",
    "proposal_sample",
    "proposal_log_weight",
    "draw_omega",
    "pg_gibbs_step",
    "logit_in_C",
    "LogitModel",
]


class DataFormatError(ValueError):
    """The data file does not match the expected layout."""


@dataclass(frozen=True)
class Dataset:
    """A binary-response design: X is n x d, y in {0,1}^n."""

    X: np.ndarray
    y: np.ndarray
    column_names: list[str]
    standardization: tuple[np.ndarray, np.ndarray] | None = None  # (means, scales)

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ValueError("X must be a nonempty n x d matrix")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite entries")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y must have one entry per row of X")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("y must be binary")
        if len(self.column_names) != self.X.shape[1]:
            raise ValueError("one column name per design column required")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


HEART_COLUMNS = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
    "thalach", "exang", "oldpeak", "slope", "ca", "thal", "num",
]
NOMINAL_COLUMNS = ("cp", "restecg", "slope", "thal")


def load_heart_dataset(
    path: str,
    standardize: bool = False,
    verbose: bool = False,
) -> Dataset:
    """Parse a 14-column Cleveland-layout file into a logistic design.

    Rows containing the missing marker "?" are dropped (the count is logged).
    The target is 1 when the disease column is positive.  Nominal attributes
    (cp, restecg, slope, thal) are one-hot encoded with the lowest level
    dropped; ca stays numeric; an intercept column is appended last.
    ``standardize`` z-scores every non-intercept column and records the
    (means, scales) pair so estimates can be mapped back.
    """
    kept: list[list[float]] = []
    n_dropped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != len(HEART_COLUMNS):
                raise DataFormatError(
                    f"{path}:{lineno}: expected {len(HEART_COLUMNS)} comma-separated "
                    f"fields, found {len(fields)}"
                )
            if "?" in fields:
                n_dropped += 1
                continue
            try:
                kept.append([float(f) for f in fields])
            except ValueError as err:
                raise DataFormatError(f"{path}:{lineno}: unparseable field ({err})") from None
    if not kept:
        raise DataFormatError(f"{path}: no usable rows")
    table = np.asarray(kept)
    y = (table[:, HEART_COLUMNS.index("num")] > 0).astype(float)

    blocks: list[np.ndarray] = []
    names: list[str] = []
    for j, name in enumerate(HEART_COLUMNS[:-1]):
        col = table[:, j]
        if name in NOMINAL_COLUMNS:
            levels = sorted(set(col))
            for level in levels[1:]:  # drop the lowest level
                blocks.append((col == level).astype(float))
                names.append(f"{name}={level:g}")
        else:
            blocks.append(col)
            names.append(name)
    X = np.column_stack(blocks)

    standardization = None
    if standardize:
        means = X.mean(axis=0)
        scales = X.std(axis=0, ddof=0)
        scales[scales == 0.0] = 1.0
        X = (X - means) / scales
        standardization = (means, scales)
    X = np.column_stack([X, np.ones(X.shape[0])])
    names.append("intercept")
    if verbose:
        print(
            f"loaded {path}: kept {len(kept)} rows ({n_dropped} dropped for missing "
            f"values), {len(names)} design columns (incl. intercept), "
            f"{int(y.sum())} positive responses"
        )
    return Dataset(X=X, y=y, column_names=names, standardization=standardization)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def neg_log_lik(beta: np.ndarray, dataset: Dataset) -> float:
    """sum_i [softplus(x_i . beta) - y_i x_i . beta], overflow-safe."""
    t = dataset.X @ beta
    return float(np.sum(np.logaddexp(0.0, t) - dataset.y * t))


def neg_log_lik_grad(beta: np.ndarray, dataset: Dataset) -> np.ndarray:
    t = dataset.X @ beta
    return dataset.X.T @ (_sigmoid(t) - dataset.y)


def neg_log_lik_hess(beta: np.ndarray, dataset: Dataset) -> np.ndarray:
    p = _sigmoid(dataset.X @ beta)
    return (dataset.X * (p * (1.0 - p))[:, None]).T @ dataset.X


class LogitPosterior:
    """The (unnormalized) posterior with its precomputed linear algebra.

    Immutable after construction; shared read-only across workers.  The mode
    is computed lazily on first use and cached.
    """

    def __init__(self, dataset: Dataset, Sigma: np.ndarray, h: float = 0.49):
        if not 0.0 < h <= 0.5:
            raise ValueError("h must lie in (0, 1/2]")
        Sigma = np.asarray(Sigma, dtype=float)
        if Sigma.shape != (dataset.d, dataset.d):
            raise ValueError("Sigma must be d x d")
        self.dataset = dataset
        self.Sigma = Sigma
        self.h = h
        try:
            self._chol_Sigma = cholesky(Sigma, lower=True)
        except np.linalg.LinAlgError:
            raise ValueError("Sigma must be symmetric positive-definite") from None
        self.Sigma_inv = cho_solve((self._chol_Sigma, True), np.eye(dataset.d))
        # proposal covariance (1/2 + h) Sigma and its factor / log-determinant
        self._chol_prop = math.sqrt(0.5 + h) * self._chol_Sigma
        self._prop_logdet = 2.0 * float(np.sum(np.log(np.diag(self._chol_prop))))
        self._score = dataset.X.T @ (dataset.y - 0.5)
        self._beta_star: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.dataset.d

    @property
    def beta_star(self) -> np.ndarray:
        if self._beta_star is None:
            self._beta_star = map_estimate(self)
        return self._beta_star

    def laplace_covariance(self) -> np.ndarray:
        """Inverse curvature at the mode, the natural scale of the posterior."""
        hess = neg_log_lik_hess(self.beta_star, self.dataset) + self.Sigma_inv
        chol = cholesky(hess, lower=True)
        return cho_solve((chol, True), np.eye(self.d))


def log_unnorm_posterior(beta: np.ndarray, posterior: LogitPosterior) -> float:
    """-neg_log_lik(beta) - 0.5 beta' Sigma^{-1} beta (no normalizing constant)."""
    quad = float(beta @ (posterior.Sigma_inv @ beta))
    return -neg_log_lik(beta, posterior.dataset) - 0.5 * quad


def map_estimate(posterior: LogitPosterior, tol: float = 1e-8, max_iter: int = 100) -> np.ndarray:
    """Posterior mode by damped Newton iteration.

    The objective neg_log_lik + quadratic penalty is strictly convex, so the
    mode is unique; iteration stops when the gradient norm is at most ``tol``.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    ds = posterior.dataset
    beta = np.zeros(ds.d)
    obj = neg_log_lik(beta, ds) + 0.5 * float(beta @ (posterior.Sigma_inv @ beta))
    for _ in range(max_iter):
        grad = neg_log_lik_grad(beta, ds) + posterior.Sigma_inv @ beta
        if float(np.linalg.norm(grad)) <= tol:
            return beta
        hess = neg_log_lik_hess(beta, ds) + posterior.Sigma_inv
        try:
            chol = cholesky(hess, lower=True)
        except np.linalg.LinAlgError:
            raise RuntimeError("Newton step failed: curvature matrix not SPD") from None
        step = cho_solve((chol, True), grad)
        scale = 1.0
        for _ in range(60):
            cand = beta - scale * step
            cand_obj = neg_log_lik(cand, ds) + 0.5 * float(
                cand @ (posterior.Sigma_inv @ cand)
            )
            if cand_obj <= obj:
                break
            scale *= 0.5
        beta, obj = cand, cand_obj
    grad = neg_log_lik_grad(beta, ds) + posterior.Sigma_inv @ beta
    if float(np.linalg.norm(grad)) <= tol:
        return beta
    raise RuntimeError(f"mode search did not reach gradient norm {tol} in {max_iter} steps")


def proposal_sample(posterior: LogitPosterior, stream: RngStream) -> np.ndarray:
    """Draw from the mode-centered Gaussian proposal N(beta*, (1/2+h) Sigma)."""
    z = stream.gen.standard_normal(posterior.d)
    return posterior.beta_star + posterior._chol_prop @ z


def proposal_log_weight(posterior: LogitPosterior, beta: np.ndarray) -> float:
    """log of (unnormalized posterior / proposal density) at beta.

    The posterior's normalizer is unknown; self-normalization downstream
    cancels it.
    """
    resid = beta - posterior.beta_star
    half = solve_triangular(posterior._chol_prop, resid, lower=True)
    log_q = (
        -0.5 * posterior.d * math.log(2.0 * math.pi)
        - 0.5 * posterior._prop_logdet
        - 0.5 * float(half @ half)
    )
    return log_unnorm_posterior(beta, posterior) - log_q


def draw_omega(stream: RngStream, beta: np.ndarray, posterior: LogitPosterior) -> np.ndarray:
    """Latent conditional draw: omega_i ~ PG(1, |x_i . beta|), independently."""
    tilts = np.abs(posterior.dataset.X @ beta)
    return sample_polya_gamma_batch(stream, tilts)


def pg_gibbs_step(stream: RngStream, beta: np.ndarray, posterior: LogitPosterior) -> np.ndarray:
    """One scan of the two-block Gibbs kernel; returns the next beta.

    A single SPD factorization of X' Omega X + Sigma^{-1} serves both the
    conditional-mean solve and the Gaussian draw.
    """
    omega = draw_omega(stream, beta, posterior)
    X = posterior.dataset.X
    prec = (X * omega[:, None]).T @ X + posterior.Sigma_inv
    try:
        chol = cholesky(prec, lower=True)
    except np.linalg.LinAlgError:
        raise RuntimeError(
            "conditional precision factorization failed (ill-conditioned design?)"
        ) from None
    mu = cho_solve((chol, True), posterior._score)
    z = stream.gen.standard_normal(posterior.d)
    return mu + solve_triangular(chol.T, z, lower=False)


def logit_in_C(beta: np.ndarray, posterior: LogitPosterior, r: float) -> bool:
    """Membership in the drift ball {|beta|^2 <= r L} of the Gibbs chain."""
    L = _drift_L(posterior)
    return float(beta @ beta) <= r * L


def _drift_L(posterior: LogitPosterior) -> float:
    from .bounds import spectral_norm

    score = posterior._score
    return spectral_norm(posterior.Sigma) ** 2 * float(score @ score)


class LogitModel(ModelBundle):
    """Engine bundle: mode-centered proposal + Gibbs kernel + drift ball."""

    def __init__(self, posterior: LogitPosterior, r: float):
        if not r > 1.0:
            raise ValueError("r must exceed 1")
        self.posterior = posterior
        self.r = r
        consts = logit_gibbs_constants(
            posterior.dataset.X, posterior.dataset.y, posterior.Sigma, posterior.h, r
        )
        self.constants = consts
        self.drift = DriftSpec(gamma=0.0, K=consts["K"], R=consts["R"], geometric=True)
        posterior.beta_star  # force the mode before any worker forks

    def propose(self, stream: RngStream) -> np.ndarray:
        return proposal_sample(self.posterior, stream)

    def log_weight(self, state: np.ndarray) -> float:
        return proposal_log_weight(self.posterior, state)

    def kernel_step(self, stream: RngStream, state: np.ndarray) -> np.ndarray:
        return pg_gibbs_step(stream, state, self.posterior)

    def f_value(self, state: np.ndarray) -> float:
        return 1.0 + float(state @ state)
