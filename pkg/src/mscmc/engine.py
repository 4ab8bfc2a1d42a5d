"""Many-short-chains estimation engine.

Builds a weighted restart distribution from importance-sampling proposals,
runs M independent Markov chain excursions truncated at the first return to
the drift set, and averages the per-excursion sums.  All randomness flows
through per-atom and per-chain streams derived from one master seed, so a
run is bit-reproducible for any worker count.
"""
from __future__ import annotations

import multiprocessing
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .rng import CategoricalSampler, RngStream, derive_stream

__all__ = [
    "DriftSpec",
    "ModelBundle",
    "WeightedAtoms",
    "Excursion",
    "MscResult",
    "CapExceededError",
    "WeightError",
    "build_initial_distribution",
    "estimate_weight_second_moment",
    "run_excursion",
    "msc_estimate",
    "coordinate_functions",
    "resolve_workers",
]

DEFAULT_EXCURSION_CAP = 1_000_000


class CapExceededError(RuntimeError):
    """An excursion failed to return to the drift set within the step cap."""

    def __init__(self, cap: int, chain_index: int | None = None):
        self.cap = cap
        self.chain_index = chain_index
        where = "" if chain_index is None else f" (chain {chain_index})"
        super().__init__(
            f"no return to the drift set within {cap} steps{where}; "
            "check the drift constants and radius"
        )

    def __reduce__(self):  # survive the trip back from a worker process
        return (CapExceededError, (self.cap, self.chain_index))


class WeightError(ValueError):
    """Importance weights are unusable (all zero, or non-finite)."""


@dataclass(frozen=True)
class DriftSpec:
    """Constants (gamma, K, R) of a verified drift inequality.

    ``geometric`` means the drift holds with f equal to the drift function V
    itself, which is what every bound evaluator here assumes.  The radius R
    must exceed K / (1 - gamma) so the effective rate gamma + K/R stays
    below one.
    """

    gamma: float
    K: float
    R: float
    geometric: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1) (got {self.gamma!r})")
        if not self.K > 0.0:
            raise ValueError(f"K must be positive (got {self.K!r})")
        if not self.R > self.K / (1.0 - self.gamma):
            raise ValueError(
                f"R must exceed K/(1-gamma) = {self.K / (1.0 - self.gamma)!r} (got {self.R!r})"
            )

    @property
    def effective_rate(self) -> float:
        """gamma + K/R, the contraction rate on the sublevel-set complement."""
        return self.gamma + self.K / self.R

    @property
    def bias_amplitude(self) -> float:
        """gamma * R + 2K - 1, the excursion-sum amplitude (geometric mode)."""
        return self.gamma * self.R + 2.0 * self.K - 1.0

    @property
    def mult_amplitude(self) -> float:
        """gamma * R + 2K, the log-MGF amplitude under a multiplicative drift."""
        return self.gamma * self.R + 2.0 * self.K


class ModelBundle(ABC):
    """A pluggable target: proposal, weight, kernel, and drift data.

    The kernel must be time-homogeneous (depend only on the current state and
    the stream) and the drift function value must be >= 1 everywhere.
    """

    drift: DriftSpec

    @abstractmethod
    def propose(self, stream: RngStream) -> np.ndarray:
        """Draw one state from the importance-sampling proposal."""

    @abstractmethod
    def log_weight(self, state: np.ndarray) -> float:
        """Log of d(target)/d(proposal) at ``state``, up to an additive constant."""

    @abstractmethod
    def kernel_step(self, stream: RngStream, state: np.ndarray) -> np.ndarray:
        """One Markov transition from ``state``."""

    @abstractmethod
    def f_value(self, state: np.ndarray) -> float:
        """Drift-function value at ``state`` (always >= 1)."""

    def in_return_set(self, state: np.ndarray) -> bool:
        return self.f_value(state) <= self.drift.R


@dataclass(frozen=True)
class WeightedAtoms:
    """The random restart distribution: proposal atoms with normalized weights."""

    atoms: np.ndarray  # (N, d)
    norm_weights: np.ndarray  # (N,), nonnegative, sums to 1
    ess: float
    w2_hat: float  # estimate of the weight second moment under the target
    N: int


@dataclass(frozen=True)
class Excursion:
    """One chain's path summary up to its first return to the drift set."""

    started_in_C: bool
    tau: int
    sums: np.ndarray  # one accumulated sum per test function

    def __post_init__(self):
        if not self.started_in_C and self.tau != 0:
            raise ValueError("a skipped excursion must have tau = 0")
        if self.started_in_C and self.tau < 1:
            raise ValueError("a started excursion must have tau >= 1")


@dataclass(frozen=True)
class MscResult:
    """Averaged excursion sums with conditional-on-atoms standard errors."""

    estimates: np.ndarray
    stderrs: np.ndarray
    M: int
    N: int
    mean_tau: float
    p95_tau: float
    skip_fraction: float
    ess: float
    w2_hat: float
    taus: np.ndarray = field(default=None, repr=False)  # per-chain return times


def resolve_workers(workers: int | None) -> int:
    """Worker count: explicit argument, else $MSC_WORKERS, else cpu count."""
    if workers is not None:
        if workers < 1:
            raise ValueError("workers must be >= 1")
        return workers
    env = os.environ.get("MSC_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _block_ranges(total: int, blocks: int) -> list[tuple[int, int]]:
    size, rem = divmod(total, blocks)
    out = []
    lo = 0
    for i in range(blocks):
        hi = lo + size + (1 if i < rem else 0)
        if hi > lo:
            out.append((lo, hi))
        lo = hi
    return out


# Worker context is installed in module globals before forking so child
# processes inherit it without pickling the (possibly large) atom array.
_CTX: dict = {}


def _init_ctx(ctx: dict) -> None:  # used with spawn-safe initializer too
    global _CTX
    _CTX = ctx


def _propose_block(bounds: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = bounds
    model = _CTX["model"]
    stream = derive_stream(_CTX["master_seed"], "init", lo)
    atoms = []
    logw = np.empty(hi - lo)
    for i in range(lo, hi):
        stream.rekey(i)
        atom = model.propose(stream)
        atoms.append(atom)
        logw[i - lo] = model.log_weight(atom)
    return np.asarray(atoms), logw


def build_initial_distribution(
    model: ModelBundle,
    N: int,
    master_seed: int,
    workers: int | None = None,
) -> WeightedAtoms:
    """Draw N proposal atoms on streams ("init", i) and self-normalize their weights.

    Log-weights may be -inf (zero-weight atoms) but not NaN or +inf, and not
    all -inf.  Normalization is done in the log domain with a max shift, so
    weights known only up to a constant are fine.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    nworkers = min(resolve_workers(workers), N)
    ranges = _block_ranges(N, max(1, min(nworkers * 4, N)))
    ctx = {"model": model, "master_seed": master_seed}
    if nworkers == 1:
        _init_ctx(ctx)
        parts = [_propose_block(r) for r in ranges]
    else:
        _init_ctx(ctx)
        with multiprocessing.Pool(nworkers, initializer=_init_ctx, initargs=(ctx,)) as pool:
            parts = pool.map(_propose_block, ranges)
    atoms = np.concatenate([p[0] for p in parts], axis=0)
    logw = np.concatenate([p[1] for p in parts])
    return _atoms_from_log_weights(atoms, logw)


def _atoms_from_log_weights(atoms: np.ndarray, logw: np.ndarray) -> WeightedAtoms:
    if np.any(np.isnan(logw)) or np.any(logw == np.inf):
        bad = int(np.flatnonzero(np.isnan(logw) | (logw == np.inf))[0])
        raise WeightError(f"non-finite log-weight at atom {bad}: {logw[bad]!r}")
    shift = float(np.max(logw))
    if shift == -np.inf:
        raise WeightError("all importance weights are zero")
    w = np.exp(logw - shift)
    total = float(w.sum())
    norm = w / total
    sum_sq = float(np.dot(norm, norm))
    ess = 1.0 / sum_sq
    return WeightedAtoms(
        atoms=atoms,
        norm_weights=norm,
        ess=ess,
        w2_hat=len(norm) * sum_sq,
        N=len(norm),
    )


def estimate_weight_second_moment(atoms: WeightedAtoms) -> float:
    """N * sum(w~^2) / (sum w~)^2, a consistent estimate of the weight second
    moment under the target; the unknown normalizing constant cancels."""
    return atoms.w2_hat


def run_excursion(
    model: ModelBundle,
    start: np.ndarray,
    stream: RngStream,
    cap: int,
    functions: Sequence[Callable[[np.ndarray], float]],
) -> Excursion:
    """Run one excursion from ``start`` until the chain re-enters the drift set.

    Starts outside the set contribute a zero excursion.  Sums accumulate the
    test functions at steps 1..tau inclusive (the entering step counts, the
    start does not).
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    nfun = len(functions)
    if model.f_value(start) > model.drift.R:
        return Excursion(started_in_C=False, tau=0, sums=np.zeros(nfun))
    sums = np.zeros(nfun)
    x = start
    for k in range(1, cap + 1):
        x = model.kernel_step(stream, x)
        for j in range(nfun):
            sums[j] += functions[j](x)
        if model.f_value(x) <= model.drift.R:
            return Excursion(started_in_C=True, tau=k, sums=sums)
    raise CapExceededError(cap)


def _excursion_block(bounds: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo, hi = bounds
    model = _CTX["model"]
    sampler = _CTX["sampler"]
    atoms = _CTX["atoms"]
    functions = _CTX["functions"]
    cap = _CTX["cap"]
    sums = np.empty((hi - lo, len(functions)))
    taus = np.zeros(hi - lo, dtype=np.int64)
    started = np.zeros(hi - lo, dtype=bool)
    stream = derive_stream(_CTX["master_seed"], "chain", lo)
    for m in range(lo, hi):
        stream.rekey(m)
        start = atoms[sampler.sample(stream)]
        try:
            exc = run_excursion(model, start, stream, cap, functions)
        except CapExceededError as err:
            raise CapExceededError(err.cap, chain_index=m) from None
        sums[m - lo] = exc.sums
        taus[m - lo] = exc.tau
        started[m - lo] = exc.started_in_C
    return sums, taus, started


def _sequential_mean_std(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # strictly index-ordered accumulation: the reduction is identical for any
    # worker count, so output files are byte-reproducible
    m = values.shape[0]
    acc = np.zeros(values.shape[1])
    for row in values:
        acc += row
    mean = acc / m
    acc = np.zeros(values.shape[1])
    for row in values:
        d = row - mean
        acc += d * d
    std = np.sqrt(acc / (m - 1))
    return mean, std


def msc_estimate(
    model: ModelBundle,
    atoms: WeightedAtoms,
    M: int,
    functions: Sequence[Callable[[np.ndarray], float]],
    master_seed: int,
    cap: int = DEFAULT_EXCURSION_CAP,
    workers: int | None = None,
) -> MscResult:
    """Average M independent excursion sums started from the weighted atoms.

    Chain m draws its start and runs its excursion on stream ("chain", m);
    the final reduction is sequential in chain order, so the result depends
    only on (master_seed, N, M) and never on the worker count.
    """
    if M < 2:
        raise ValueError("M must be >= 2 (a sample standard error needs two sums)")
    sampler = CategoricalSampler(atoms.norm_weights)
    ctx = {
        "model": model,
        "sampler": sampler,
        "atoms": atoms.atoms,
        "functions": list(functions),
        "cap": cap,
        "master_seed": master_seed,
    }
    nworkers = min(resolve_workers(workers), M)
    ranges = _block_ranges(M, max(1, min(nworkers * 4, M)))
    if nworkers == 1:
        _init_ctx(ctx)
        parts = [_excursion_block(r) for r in ranges]
    else:
        _init_ctx(ctx)
        with multiprocessing.Pool(nworkers, initializer=_init_ctx, initargs=(ctx,)) as pool:
            parts = pool.map(_excursion_block, ranges)
    sums = np.concatenate([p[0] for p in parts], axis=0)
    taus = np.concatenate([p[1] for p in parts])
    started = np.concatenate([p[2] for p in parts])

    estimates, std = _sequential_mean_std(sums)
    return MscResult(
        estimates=estimates,
        stderrs=std / np.sqrt(M),
        M=M,
        N=atoms.N,
        mean_tau=float(taus.mean()),
        p95_tau=float(np.percentile(taus, 95)),
        skip_fraction=float(1.0 - started.mean()),
        ess=atoms.ess,
        w2_hat=atoms.w2_hat,
        taus=taus,
    )


class _Coordinate:
    """Extract one coordinate of the state vector (picklable test function)."""

    __slots__ = ("j",)

    def __init__(self, j: int):
        self.j = j

    def __call__(self, x: np.ndarray) -> float:
        return float(x[self.j])


def coordinate_functions(d: int) -> list[Callable[[np.ndarray], float]]:
    """The d coordinate-projection test functions."""
    return [_Coordinate(j) for j in range(d)]
