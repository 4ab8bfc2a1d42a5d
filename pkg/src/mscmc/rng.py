"""Deterministic splittable random streams and primitive distribution samplers.

Streams are counter-based (Philox 4x64) and derived in O(1) from a triple
(master_seed, label, index), so the draw sequence of any stream is fixed
regardless of scheduling, thread count, or platform.  Label strings are
hashed with FNV-1a 64-bit; the Philox key words are
(master_seed XOR fnv1a64(label), index).
"""
from __future__ import annotations

import math

import numpy as np
from numpy.random import Generator, Philox

__all__ = [
    "RngStream",
    "derive_stream",
    "fnv1a64",
    "sample_std_normal",
    "sample_mvn",
    "CategoricalSampler",
    "sample_categorical",
    "sample_polya_gamma",
    "sample_polya_gamma_batch",
    "SamplerError",
]

_MASK64 = 0xFFFFFFFFFFFFFFFF
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# accept-reject safety cap shared by all rejection samplers in this module
MAX_REJECT_ITERS = 10_000


class SamplerError(RuntimeError):
    """A rejection sampler exceeded its iteration cap."""


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 encoding of ``text``."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


class RngStream:
    """One independent random stream, addressed by (master_seed, label, index).

    Equal triples produce byte-identical draw sequences.  A stream is
    single-owner: it may be created on one worker and moved to another but
    must never be shared concurrently.
    """

    __slots__ = ("master_seed", "label", "index", "gen", "_bg", "_label_hash")

    def __init__(self, master_seed: int, label: str, index: int):
        if not 0 <= int(master_seed) <= _MASK64:
            raise ValueError("master_seed must fit in 64 bits")
        if not 0 <= int(index) <= _MASK64:
            raise ValueError("index must fit in 64 bits")
        self.master_seed = int(master_seed)
        self.label = label
        self.index = int(index)
        self._label_hash = fnv1a64(label)
        key = np.array([self.master_seed ^ self._label_hash, self.index], dtype=np.uint64)
        self._bg = Philox(key=key)
        self.gen = Generator(self._bg)

    def rekey(self, index: int) -> "RngStream":
        """Reseat this stream in place at a new index (same seed and label).

        Cheap alternative to constructing a fresh stream in hot loops;
        produces the identical sequence to ``derive_stream(seed, label, index)``.
        """
        st = self._bg.state
        st["state"]["key"][1] = index
        st["state"]["counter"][:] = 0
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        self.index = int(index)
        return self

    def __repr__(self) -> str:  # pragma: no cover
        return f"RngStream(seed={self.master_seed}, label={self.label!r}, index={self.index})"


def derive_stream(master_seed: int, label: str, index: int) -> RngStream:
    """Derive the independent stream addressed by (master_seed, label, index)."""
    return RngStream(master_seed, label, index)


def sample_std_normal(stream: RngStream) -> float:
    """One standard normal variate."""
    return float(stream.gen.standard_normal())


def sample_mvn(stream: RngStream, mean: np.ndarray, chol_factor: np.ndarray) -> np.ndarray:
    """Draw mean + chol_factor @ z with z a standard normal vector.

    ``chol_factor`` must be lower-triangular with nonnegative diagonal
    (a zero factor degenerates to the mean).
    """
    if not np.all(np.isfinite(chol_factor)):
        raise ValueError("non-finite entries in Cholesky factor")
    z = stream.gen.standard_normal(len(mean))
    return mean + chol_factor @ z


class CategoricalSampler:
    """Alias-table sampler over a fixed probability vector.

    O(N) setup, two uniforms per draw thereafter.
    """

    __slots__ = ("n", "prob", "alias")

    def __init__(self, weights: np.ndarray):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-9 * max(1.0, w.size):
            raise ValueError(f"weights must sum to 1 (got {total!r})")
        n = w.size
        scaled = w * (n / total)
        prob = np.ones(n)
        alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            if scaled[l] < 1.0:
                small.append(l)
            else:
                large.append(l)
        # leftovers are 1 up to rounding
        self.n = n
        self.prob = prob
        self.alias = alias

    def sample(self, stream: RngStream) -> int:
        u = stream.gen.random()
        k = int(u * self.n)
        if k == self.n:  # u == 1.0 cannot occur, guard anyway
            k = self.n - 1
        if stream.gen.random() < self.prob[k]:
            return k
        return int(self.alias[k])


def sample_categorical(stream: RngStream, weights: np.ndarray) -> int:
    """Draw an index i with probability weights[i] (weights sum to 1)."""
    return CategoricalSampler(weights).sample(stream)


# ---------------------------------------------------------------------------
# Exact Polya-Gamma PG(1, b) sampling.
#
# Accept-reject for the exponentially tilted Jacobi distribution via the
# alternating series bounds, with a mixture proposal of a truncated
# exponential (right of t = 0.64) and a truncated inverse-Gaussian (left).
# A PG(1, b) draw is a Jacobi draw at tilt b/2, divided by 4.
# ---------------------------------------------------------------------------

_PG_TRUNC = 0.64


def _jacobi_coef(n: int, x: float) -> float:
    # piecewise n-th coefficient of the alternating series for the density at x
    if x <= _PG_TRUNC:
        return (
            math.pi
            * (n + 0.5)
            * (2.0 / math.pi / x) ** 1.5
            * math.exp(-2.0 * (n + 0.5) ** 2 / x)
        )
    return math.pi * (n + 0.5) * math.exp(-((n + 0.5) ** 2) * math.pi**2 * x / 2.0)


def _right_branch_prob(z: float) -> float:
    # probability that the mixture proposal uses the truncated-exponential branch;
    # log_ndtr keeps the normal log-CDF exact far into the lower tail
    from scipy.special import log_ndtr

    t = _PG_TRUNC
    rate = math.pi**2 / 8.0 + z * z / 2.0
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(rate) + rate * t
    xb = x0 - z + float(log_ndtr(b))
    xa = x0 + z + float(log_ndtr(a))
    log_qdivp = math.log(4.0 / math.pi) + np.logaddexp(xb, xa)
    if log_qdivp > 0.0:
        return math.exp(-log_qdivp) / (1.0 + math.exp(-log_qdivp))
    return 1.0 / (1.0 + math.exp(log_qdivp))


def _trunc_inv_gauss(gen: Generator, z: float) -> float:
    # inverse-Gaussian(mu=1/z, lambda=1) conditioned on (0, t]
    t = _PG_TRUNC
    if z < 1.0 / t:
        # large mean: propose 1/X from a scaled chi-square tail, thin by exp tilt
        for _ in range(MAX_REJECT_ITERS):
            e1 = gen.standard_exponential()
            e2 = gen.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = gen.standard_exponential()
                e2 = gen.standard_exponential()
            x = t / (1.0 + t * e1) ** 2
            if z == 0.0 or gen.random() <= math.exp(-0.5 * z * z * x):
                return x
        raise SamplerError("truncated inverse-Gaussian rejection cap exceeded")
    mu = 1.0 / z
    for _ in range(MAX_REJECT_ITERS):
        y = gen.standard_normal() ** 2
        x = mu + 0.5 * mu * mu * y - 0.5 * mu * math.sqrt(4.0 * mu * y + (mu * y) ** 2)
        if gen.random() > mu / (mu + x):
            x = mu * mu / x
        if x <= t:
            return x
    raise SamplerError("truncated inverse-Gaussian rejection cap exceeded")


def sample_polya_gamma(stream: RngStream, b: float) -> float:
    """One exact draw from PG(1, b), b >= 0.  Output is strictly positive."""
    if not (b >= 0.0) or not math.isfinite(b):
        raise ValueError(f"b must be finite and nonnegative (got {b!r})")
    gen = stream.gen
    z = b / 2.0
    rate = math.pi**2 / 8.0 + z * z / 2.0
    p_right = _right_branch_prob(z)
    for _ in range(MAX_REJECT_ITERS):
        if gen.random() < p_right:
            x = _PG_TRUNC + gen.standard_exponential() / rate
        else:
            x = _trunc_inv_gauss(gen, z)
        # squeeze via partial sums of the alternating series
        s = _jacobi_coef(0, x)
        y = gen.random() * s
        n = 0
        while True:
            n += 1
            if n & 1:
                s -= _jacobi_coef(n, x)
                if y <= s:
                    return x / 4.0
            else:
                s += _jacobi_coef(n, x)
                if y > s:
                    break
    raise SamplerError("PG(1, b) accept-reject cap exceeded")


# Vectorized variant, used by the Gibbs kernel where thousands of PG draws
# per step dominate the cost.  Same proposal and series tests as the scalar
# sampler, applied to whole index sets at once.


def _jacobi_coef_vec(n: int, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    left = x <= _PG_TRUNC
    xl = x[left]
    out[left] = (
        math.pi * (n + 0.5) * (2.0 / math.pi / xl) ** 1.5 * np.exp(-2.0 * (n + 0.5) ** 2 / xl)
    )
    xr = x[~left]
    out[~left] = math.pi * (n + 0.5) * np.exp(-((n + 0.5) ** 2) * math.pi**2 * xr / 2.0)
    return out


def _right_branch_prob_vec(z: np.ndarray) -> np.ndarray:
    from scipy.special import log_ndtr

    t = _PG_TRUNC
    rate = math.pi**2 / 8.0 + z * z / 2.0
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = np.log(rate) + rate * t
    log_qdivp = math.log(4.0 / math.pi) + np.logaddexp(x0 - z + log_ndtr(b), x0 + z + log_ndtr(a))
    out = np.empty_like(z)
    big = log_qdivp > 0.0
    out[big] = np.exp(-log_qdivp[big]) / (1.0 + np.exp(-log_qdivp[big]))
    out[~big] = 1.0 / (1.0 + np.exp(log_qdivp[~big]))
    return out


def _trunc_inv_gauss_vec(gen: Generator, z: np.ndarray) -> np.ndarray:
    t = _PG_TRUNC
    out = np.empty_like(z)
    big_mu = z < 1.0 / t

    idx = np.flatnonzero(big_mu)
    zi = z[idx]
    for _ in range(MAX_REJECT_ITERS):
        if idx.size == 0:
            break
        e1 = gen.standard_exponential(idx.size)
        e2 = gen.standard_exponential(idx.size)
        ok_prop = e1 * e1 <= 2.0 * e2 / t
        x = t / (1.0 + t * e1) ** 2
        accept = ok_prop & (gen.random(idx.size) <= np.exp(-0.5 * zi * zi * x))
        out[idx[accept]] = x[accept]
        idx = idx[~accept]
        zi = z[idx]
    else:
        raise SamplerError("truncated inverse-Gaussian rejection cap exceeded")

    idx = np.flatnonzero(~big_mu)
    mu = np.empty_like(z)
    mu[~big_mu] = 1.0 / z[~big_mu]
    for _ in range(MAX_REJECT_ITERS):
        if idx.size == 0:
            break
        mi = mu[idx]
        y = gen.standard_normal(idx.size) ** 2
        x = mi + 0.5 * mi * mi * y - 0.5 * mi * np.sqrt(4.0 * mi * y + (mi * y) ** 2)
        flip = gen.random(idx.size) > mi / (mi + x)
        x[flip] = mi[flip] ** 2 / x[flip]
        accept = x <= t
        out[idx[accept]] = x[accept]
        idx = idx[~accept]
    else:
        raise SamplerError("truncated inverse-Gaussian rejection cap exceeded")
    return out


def sample_polya_gamma_batch(stream: RngStream, b: np.ndarray) -> np.ndarray:
    """Exact PG(1, b_i) draws for a whole vector of tilts at once."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ValueError("b must be a vector")
    if np.any(b < 0) or not np.all(np.isfinite(b)):
        raise ValueError("all tilts must be finite and nonnegative")
    gen = stream.gen
    z = b / 2.0
    rate = math.pi**2 / 8.0 + z * z / 2.0
    p_right = _right_branch_prob_vec(z)

    out = np.empty_like(z)
    pending = np.arange(z.size)
    for _ in range(MAX_REJECT_ITERS):
        if pending.size == 0:
            return out / 4.0
        k = pending.size
        right = gen.random(k) < p_right[pending]
        x = np.empty(k)
        x[right] = _PG_TRUNC + gen.standard_exponential(int(right.sum())) / rate[pending[right]]
        if np.any(~right):
            x[~right] = _trunc_inv_gauss_vec(gen, z[pending[~right]])

        s = _jacobi_coef_vec(0, x)
        y = gen.random(k) * s
        undecided = np.arange(k)
        accepted = np.zeros(k, dtype=bool)
        n = 0
        while undecided.size:
            n += 1
            term = _jacobi_coef_vec(n, x[undecided])
            if n & 1:
                s[undecided] -= term
                acc = y[undecided] <= s[undecided]
                accepted[undecided[acc]] = True
                undecided = undecided[~acc]
            else:
                s[undecided] += term
                rej = y[undecided] > s[undecided]
                undecided = undecided[~rej]
        out[pending[accepted]] = x[accepted]
        pending = pending[~accepted]
    raise SamplerError("PG(1, b) accept-reject cap exceeded")
