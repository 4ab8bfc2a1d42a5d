"""Closed-form error bounds, drift constants, and sample-size planning.

Everything here is a pure function of its inputs: no state, no randomness.
The geometric-drift bounds control the mean squared error of the
many-short-chains estimator; the multiplicative-drift bounds give
concentration probabilities when the importance weights are uniformly
bounded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometricBoundInput",
    "MultBoundInput",
    "effective_rate",
    "bias_amplitude",
    "bias_bound",
    "variance_bound",
    "mse_bound",
    "simplified_mse_bound",
    "init_concentration_bound",
    "chain_concentration_bound",
    "total_concentration_bound",
    "plan_sizes",
    "ar_drift_constants",
    "logit_gibbs_constants",
    "spectral_norm",
    "logit_mse_bound",
]


@dataclass(frozen=True)
class GeometricBoundInput:
    """Inputs shared by the geometric-drift bound evaluators.

    ``w2`` is the second moment of the importance weight under the target
    (or its estimate) and ``sup_V_C`` the supremum of the drift function on
    the return set; for sublevel sets where the drift function attains the
    radius, sup_V_C equals R.
    """

    gamma: float
    K: float
    R: float
    M: int
    N: int
    w2: float
    sup_V_C: float

    def __post_init__(self):
        _check_drift(self.gamma, self.K, self.R)
        if self.w2 < 1.0:
            raise ValueError("the weight second moment is always >= 1")
        if self.sup_V_C > self.R:
            raise ValueError(
                "sup of the drift function on its own sublevel set cannot exceed the radius"
            )
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be positive")


@dataclass(frozen=True)
class MultBoundInput:
    """Inputs for the multiplicative-drift concentration evaluators.

    ``mgf_amplitude`` is the log-MGF amplitude constant of the excursion sum
    (sup over the return set of V - (1-gamma) f, plus 2K) and ``weight_sup``
    the uniform bound on the importance weight.
    """

    gamma: float
    K: float
    R: float
    mgf_amplitude: float
    weight_sup: float
    eps: float
    M: int
    N: int

    def __post_init__(self):
        _check_drift(self.gamma, self.K, self.R)
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if self.weight_sup < 1.0:
            raise ValueError("a weight bound below 1 is impossible for a density ratio")
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be positive")


def _check_drift(gamma: float, K: float, R: float) -> None:
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1) (got {gamma!r})")
    if not K > 0.0:
        raise ValueError(f"K must be positive (got {K!r})")
    if not R > K / (1.0 - gamma):
        raise ValueError(f"R must exceed K/(1-gamma) = {K / (1.0 - gamma)!r} (got {R!r})")


def effective_rate(gamma: float, K: float, R: float) -> float:
    """gamma + K/R, strictly between gamma and 1 for a valid radius."""
    _check_drift(gamma, K, R)
    return gamma + K / R


def bias_amplitude(inp: GeometricBoundInput) -> float:
    """gamma * sup_V_C + 2K - 1, the excursion-operator amplitude (f = V)."""
    return inp.gamma * inp.sup_V_C + 2.0 * inp.K - 1.0


def bias_bound(inp: GeometricBoundInput) -> float:
    """Mean squared bias of the weighted restart stage:
    4 A^2 w2 / (N (1-rate)^2) - 2 A^2 / (N (1-rate)^2)."""
    rate = effective_rate(inp.gamma, inp.K, inp.R)
    a = bias_amplitude(inp)
    core = a * a / (inp.N * (1.0 - rate) ** 2)
    return 4.0 * core * inp.w2 - 2.0 * core


def variance_bound(inp: GeometricBoundInput) -> float:
    """Conditional variance of the chain average:
    ((R+K)/M) * (rate/2 / (1 - rate/2))^2."""
    rate = effective_rate(inp.gamma, inp.K, inp.R)
    half = 0.5 * rate
    return (inp.R + inp.K) / inp.M * (half / (1.0 - half)) ** 2


def mse_bound(inp: GeometricBoundInput) -> float:
    """Mean squared error bound:
    (rate sqrt(R+K) / (sqrt(M)(2-rate)) + 2 A sqrt(w2) / (sqrt(N)(1-rate)))^2."""
    rate = effective_rate(inp.gamma, inp.K, inp.R)
    var_half = rate * math.sqrt(inp.R + inp.K) / (math.sqrt(inp.M) * (2.0 - rate))
    bias_half = 2.0 * bias_amplitude(inp) * math.sqrt(inp.w2) / (
        math.sqrt(inp.N) * (1.0 - rate)
    )
    return (var_half + bias_half) ** 2


def simplified_mse_bound(inp: GeometricBoundInput) -> float:
    """N-free bound (6.25 gamma_R R + 12.5 K) / (M (1-rate)^2), valid only
    when N/M >= (gamma R + 2K) w2."""
    rate = effective_rate(inp.gamma, inp.K, inp.R)
    threshold = (inp.gamma * inp.R + 2.0 * inp.K) * inp.w2
    if inp.N / inp.M < threshold:
        raise ValueError(
            f"simplified bound needs N/M >= {threshold!r} "
            f"(got N/M = {inp.N / inp.M!r}); increase N or use mse_bound"
        )
    return (6.25 * rate * inp.R + 12.5 * inp.K) / (inp.M * (1.0 - rate) ** 2)


def init_concentration_bound(inp: MultBoundInput) -> float:
    """Tail probability of the restart-stage error under bounded weights:
    4 exp(-N eps^2 (1-rate)^2 / (2 e^{2B} w*^2))."""
    rate = effective_rate(inp.gamma, inp.K, inp.R)
    return 4.0 * math.exp(
        -inp.N
        * inp.eps**2
        * (1.0 - rate) ** 2
        / (2.0 * math.exp(2.0 * inp.mgf_amplitude) * inp.weight_sup**2)
    )


def chain_concentration_bound(inp: MultBoundInput) -> float:
    """Tail probability of the chain-average error:
    2 exp(-M eps^2 (1-rate)^2 / (9 e^{2B}))."""
    rate = effective_rate(inp.gamma, inp.K, inp.R)
    return 2.0 * math.exp(
        -inp.M * inp.eps**2 * (1.0 - rate) ** 2 / (9.0 * math.exp(2.0 * inp.mgf_amplitude))
    )


def total_concentration_bound(inp: MultBoundInput) -> float:
    """Combined tail probability:
    6 exp(-eps^2 (1-rate)^2 min(2M/9, N/w*^2) / (8 e^{2B}))."""
    rate = effective_rate(inp.gamma, inp.K, inp.R)
    mn = min(2.0 * inp.M / 9.0, inp.N / inp.weight_sup**2)
    return 6.0 * math.exp(
        -inp.eps**2 * (1.0 - rate) ** 2 * mn / (8.0 * math.exp(2.0 * inp.mgf_amplitude))
    )


def plan_sizes(
    eps: float,
    delta: float,
    gamma: float,
    K: float,
    R: float,
    w2: float,
    sup_V_C: float,
) -> tuple[int, int]:
    """Smallest (N, M) for which Markov's inequality on the MSE bound gives
    P(|error| >= eps) <= delta, splitting the eps^2 delta budget equally
    between the chain-variance and restart-bias halves.
    """
    if not 0.0 < eps < 1.0 or not 0.0 < delta < 1.0:
        raise ValueError("eps and delta must lie in (0, 1)")
    rate = effective_rate(gamma, K, R)
    a = rate * math.sqrt(R + K) / (2.0 - rate)
    b = 2.0 * (gamma * sup_V_C + 2.0 * K - 1.0) * math.sqrt(w2) / (1.0 - rate)
    budget = delta * eps**2
    M = math.ceil(4.0 * a * a / budget)
    N = math.ceil(4.0 * b * b / budget)
    return N, max(M, 2)


def ar_drift_constants(
    rho: float, d: int, h: float, r: float
) -> tuple[float, float, float, float, float]:
    """Drift and weight constants of the autoregressive chain with Gaussian
    proposal variance (1/2 + h): returns (gamma, K, R, w2, sup_V_C)."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if d < 1:
        raise ValueError("d must be >= 1")
    if not h > 0.0:
        raise ValueError("h must be positive")
    if not r > 1.0:
        raise ValueError("r must exceed 1")
    gamma = rho * rho
    K = (1.0 - rho * rho) * (1.0 + d)
    R = 1.0 + r * d
    w2 = (1.0 / (2.0 * math.sqrt(2.0 * h)) + math.sqrt(h / 2.0)) ** d
    return gamma, K, R, w2, R


def spectral_norm(mat: np.ndarray, rel_tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest singular value via power iteration on mat^T mat (or mat itself
    when symmetric PSD), to relative tolerance ``rel_tol``."""
    a = np.asarray(mat, dtype=float)
    sym = a.shape[0] == a.shape[1] and np.allclose(a, a.T, rtol=1e-12, atol=1e-12)
    gram = a if sym else a.T @ a
    v = np.ones(gram.shape[0]) / math.sqrt(gram.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_new = float(v @ (gram @ v))
        if abs(lam_new - lam) <= rel_tol * max(abs(lam_new), 1e-300):
            lam = lam_new
            break
        lam = lam_new
    return abs(lam) if sym else math.sqrt(abs(lam))


def _logdet_plus_identity(scale: float, sigma: np.ndarray) -> float:
    # log det(scale * sigma + I) via triangular factorization, safe at high dim
    m = scale * np.asarray(sigma, dtype=float) + np.eye(sigma.shape[0])
    chol = np.linalg.cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def logit_gibbs_constants(
    X: np.ndarray,
    Y: np.ndarray,
    Sigma: np.ndarray,
    h: float,
    r: float,
) -> dict:
    """Drift and proposal constants of the latent-variable Gibbs chain for
    Bayesian logistic regression.

    Returns a dict with keys L, gamma_r, R, K, W_d, chi2_bound, plus the
    diagnostic K_with_trace (K + tr(Sigma), the one-step second-moment bound
    before the trace term is dropped).  The chain's drift has gamma = 0,
    K = 1 + L, and radius R = 1 + r L, which is only valid when L > 0.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    try:
        np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise ValueError("Sigma must be symmetric positive-definite") from None
    d = X.shape[1]
    sigma_norm = spectral_norm(Sigma)
    score = X.T @ (Y - 0.5)
    L = sigma_norm**2 * float(score @ score)
    x_sq_norm = spectral_norm(X) ** 2  # equals the spectral norm of X^T X
    lam_star = spectral_norm(X.T @ X) / 4.0
    log_tilt = d * math.log(1.0 / (2.0 * math.sqrt(2.0 * h)) + math.sqrt(h / 2.0))
    log_W_d = _logdet_plus_identity(x_sq_norm / 4.0, Sigma) + log_tilt
    log_chi2 = _logdet_plus_identity(lam_star, Sigma) + log_tilt
    out = {
        "L": L,
        "gamma_r": (1.0 + L) / (1.0 + r * L),
        "R": 1.0 + r * L,
        "K": 1.0 + L,
        # log values stay finite on very informative designs where the plain
        # constants can exceed float range
        "W_d": math.exp(log_W_d) if log_W_d < 709 else math.inf,
        "chi2_bound": math.exp(log_chi2) if log_chi2 < 709 else math.inf,
        "log_W_d": log_W_d,
        "log_chi2_bound": log_chi2,
        "K_with_trace": 1.0 + L + float(np.trace(Sigma)),
    }
    if L <= 0.0:
        raise ValueError(
            "degenerate design: the score X^T(Y - 1/2) vanishes, so the radius "
            "1 + rL collapses onto K/(1-gamma) and no valid drift set exists"
        )
    _check_drift(0.0, out["K"], out["R"])
    return out


def logit_mse_bound(
    L: float, r: float, W_d: float, M: int, N: int, mode: str = "literal"
) -> float:
    """MSE bound for the logistic-regression Gibbs chain.

    ``literal`` pairs the amplitude (2L+1) with W_d directly; ``generic``
    feeds W_d as the weight second moment into the general geometric bound
    (which takes its square root and doubles the amplitude).  Both are
    reported because the two conventions differ and neither dominates.
    """
    if L <= 0.0 or r <= 1.0:
        raise ValueError("need L > 0 and r > 1")
    if mode == "generic":
        return mse_bound(
            GeometricBoundInput(gamma=0.0, K=1.0 + L, R=1.0 + r * L, M=M, N=N, w2=W_d,
                                sup_V_C=1.0 + r * L)
        )
    if mode != "literal":
        raise ValueError(f"unknown mode {mode!r}")
    rate = (1.0 + L) / (1.0 + r * L)
    var_half = rate * math.sqrt((r + 1.0) * L + 2.0) / (math.sqrt(M) * (2.0 - rate))
    bias_half = (2.0 * L + 1.0) * W_d / (math.sqrt(N) * (1.0 - rate))
    return (var_half + bias_half) ** 2
