"""Synthetic correlated-database generation.

Ground truth lives here: the source distribution, the column repetition
pattern, the hidden row permutation, and the pre-matched seed rows. All
randomness flows from a single 64-bit master seed through fixed substream
keys, so objects can be generated in any order (or in parallel) without
changing the result.

Symbols are the integers ``1..alphabet_size`` and are stored as single
bytes (``uint8``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ALPHABET = 255  # one-byte symbol storage

PROB_ATOL = 1e-12

# Substream roles used by sample_instance: streams are keyed by
# (master_seed, point, trial, role) and never overlap.
ROLE_DATABASE = 0
ROLE_PATTERN = 1
ROLE_PERMUTATION = 2
ROLE_CHANNEL = 3
ROLE_SEEDS = 4


def _check_prob_vector(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D probability vector")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > PROB_ATOL:
        raise ValueError(f"{name} must sum to 1, got {float(p.sum())!r}")
    return p


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelSpec:
    """Source, noise, and repetition distributions for one experiment.

    ``p_x`` is the symbol distribution, ``p_y_given_x[i]`` the noise
    output distribution for input symbol ``i + 1``, and ``p_s[k]`` the
    probability that a column is repeated ``k`` times (``k = 0`` deletes
    the column).
    """

    p_x: np.ndarray
    p_y_given_x: np.ndarray
    p_s: np.ndarray

    def __post_init__(self):
        p_x = _check_prob_vector(self.p_x, "p_x")
        p_s = _check_prob_vector(self.p_s, "p_s")
        size = p_x.size
        if size > MAX_ALPHABET:
            raise ValueError(f"alphabet size {size} exceeds {MAX_ALPHABET}")
        p_ygx = np.asarray(self.p_y_given_x, dtype=float)
        if p_ygx.shape != (size, size):
            raise ValueError(
                f"p_y_given_x must be {size}x{size}, got {p_ygx.shape}"
            )
        for i in range(size):
            _check_prob_vector(p_ygx[i], f"p_y_given_x[{i}]")
        object.__setattr__(self, "p_x", _frozen(p_x))
        object.__setattr__(self, "p_y_given_x", _frozen(p_ygx))
        object.__setattr__(self, "p_s", _frozen(p_s))

    @property
    def alphabet_size(self) -> int:
        return self.p_x.size

    @property
    def s_max(self) -> int:
        return self.p_s.size - 1

    @property
    def delta(self) -> float:
        """Probability that a column is deleted."""
        return float(self.p_s[0])

    def p_y(self) -> np.ndarray:
        """Marginal output-symbol distribution."""
        return self.p_x @ self.p_y_given_x

    def expected_repetitions(self) -> float:
        return float(np.arange(self.p_s.size) @ self.p_s)


@dataclass(frozen=True)
class RepetitionPattern:
    """Per-column repetition counts; 0 means deleted, >1 replicated."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.int64)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("pattern must be a nonempty 1-D integer vector")
        if np.any(s < 0):
            raise ValueError("repetition counts must be nonnegative")
        object.__setattr__(self, "s", _frozen(s))

    @property
    def n(self) -> int:
        return self.s.size

    @property
    def total(self) -> int:
        """Total output column count (sum of repetition counts)."""
        return int(self.s.sum())

    @property
    def num_retained(self) -> int:
        return int(np.count_nonzero(self.s))

    def retained_indices(self) -> np.ndarray:
        return np.flatnonzero(self.s)

    def deleted_indices(self) -> np.ndarray:
        return np.flatnonzero(self.s == 0)


@dataclass(frozen=True)
class DatabasePair:
    """Anonymized matrix, its noisy repeated counterpart, and hidden truth.

    ``sigma`` maps row ``i`` of ``d1`` to row ``sigma[i]`` of ``d2``
    (0-based). The pattern and permutation are ground truth: generation
    stores them here and detection code never reads them.
    """

    d1: np.ndarray
    d2: np.ndarray
    sigma: np.ndarray
    pattern: RepetitionPattern

    def __post_init__(self):
        m = self.d1.shape[0]
        if self.d2.shape[0] != m:
            raise ValueError("d1 and d2 must have the same row count")
        if self.d2.shape[1] != self.pattern.total:
            raise ValueError(
                "d2 column count must equal the pattern's repetition total"
            )
        sigma = np.asarray(self.sigma, dtype=np.int64)
        if sigma.shape != (m,) or np.any(np.bincount(sigma, minlength=m) != 1):
            raise ValueError("sigma must be a permutation of 0..m-1")
        object.__setattr__(self, "sigma", _frozen(sigma))

    @property
    def num_rows(self) -> int:
        return self.d1.shape[0]


@dataclass(frozen=True)
class SeedPair:
    """Pre-matched row batches sharing the database's repetition pattern.

    Rows are aligned by index: row i of g1 and row i of g2 are a
    correctly matched pair. Seeds are generated fresh, never carved out
    of the database pair.
    """

    g1: np.ndarray
    g2: np.ndarray

    def __post_init__(self):
        if self.g1.shape[0] != self.g2.shape[0]:
            raise ValueError("seed matrices must have the same row count")

    @property
    def num_seeds(self) -> int:
        return self.g1.shape[0]


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent random stream for (master_seed, key).

    Distinct keys give statistically independent, non-overlapping
    streams (numpy SeedSequence spawn keys), which is the whole
    reproducibility contract: a consumer that always asks for the same
    key gets the same stream no matter what else ran before it.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def _symbols(alphabet_size):
    return np.arange(1, alphabet_size + 1, dtype=np.uint8)


def generate_database(m: int, n: int, spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. symbol matrix of shape (m, n) drawn from spec.p_x."""
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be positive")
    return rng.choice(_symbols(spec.alphabet_size), size=(m, n), p=spec.p_x)


def draw_pattern(n: int, spec: ModelSpec, rng: np.random.Generator) -> RepetitionPattern:
    """i.i.d. repetition counts for n columns drawn from spec.p_s."""
    if n < 1:
        raise ValueError("pattern length must be positive")
    s = rng.choice(np.arange(spec.s_max + 1), size=n, p=spec.p_s)
    return RepetitionPattern(s)


def draw_permutation(m: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(m)


def apply_channel(
    d1: np.ndarray,
    pattern: RepetitionPattern,
    sigma: np.ndarray,
    spec: ModelSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Repeat columns per the pattern, pass entries through the noise
    channel, and scatter rows by the permutation.

    Row ``sigma[i]`` of the output holds, for each original column j in
    order, ``pattern.s[j]`` independent noisy copies of ``d1[i, j]``.
    Deleted columns (count 0) contribute nothing.
    """
    m, n = d1.shape
    if pattern.n != n:
        raise ValueError("pattern length must equal the column count of d1")
    sigma = np.asarray(sigma, dtype=np.int64)
    if sigma.shape != (m,) or np.any(np.bincount(sigma, minlength=m) != 1):
        raise ValueError("sigma must be a permutation of 0..m-1")

    cols = np.repeat(np.arange(n), pattern.s)
    expanded = d1[:, cols]
    noisy = np.empty_like(expanded)
    symbols = _symbols(spec.alphabet_size)
    # Symbol-by-symbol resampling keeps memory at O(m * K) for any alphabet.
    for x in range(1, spec.alphabet_size + 1):
        mask = expanded == x
        count = int(mask.sum())
        if count:
            noisy[mask] = rng.choice(symbols, size=count, p=spec.p_y_given_x[x - 1])
    d2 = np.empty_like(noisy)
    d2[sigma] = noisy
    return d2


def generate_seeds(
    num_seeds: int,
    n: int,
    pattern: RepetitionPattern,
    spec: ModelSpec,
    rng: np.random.Generator,
) -> SeedPair:
    """Batch of pre-matched seed row pairs under the given pattern.

    g1 rows are i.i.d. from p_x; g2 is g1 pushed through the channel
    with the identity permutation, so row i of each matrix is a matched
    pair by construction.
    """
    if num_seeds < 1:
        raise ValueError("need at least one seed row")
    g1 = generate_database(num_seeds, n, spec, rng)
    g2 = apply_channel(g1, pattern, np.arange(num_seeds), spec, rng)
    return SeedPair(g1, g2)


def sample_instance(
    m: int,
    n: int,
    num_seeds: int,
    spec: ModelSpec,
    master_seed: int,
    point: int = 0,
    trial: int = 0,
) -> tuple[DatabasePair, SeedPair]:
    """One full ground-truth instance from documented substreams.

    Substream key layout: ``(point, trial, role)`` with the ROLE_*
    constants above. Identical arguments always produce bit-identical
    instances.
    """
    key = (point, trial)
    d1 = generate_database(m, n, spec, substream(master_seed, *key, ROLE_DATABASE))
    pattern = draw_pattern(n, spec, substream(master_seed, *key, ROLE_PATTERN))
    sigma = draw_permutation(m, substream(master_seed, *key, ROLE_PERMUTATION))
    d2 = apply_channel(d1, pattern, sigma, spec, substream(master_seed, *key, ROLE_CHANNEL))
    seeds = generate_seeds(num_seeds, n, pattern, spec, substream(master_seed, *key, ROLE_SEEDS))
    return DatabasePair(d1, d2, sigma, pattern), seeds
