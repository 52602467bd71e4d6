"""End-to-end row de-anonymization.

Composes the two detectors, plug-in estimation, and marker segmentation,
then matches rows by three-part weak typicality: a candidate pair is
accepted when the joint and both marginal empirical log-likelihood rates
sit within epsilon of the corresponding plug-in entropies, and exactly
one candidate survives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import deletions, estimation, replicas
from .deletions import RetentionResult
from .estimation import DistributionEstimate
from .model import RepetitionPattern

#: Cell placeholder for a deleted column.
ERASURE = "*"

# Finite stand-in for log2(0) inside the vectorized accumulation; large
# enough that a single zero-probability observation pushes the deviation
# far past any usable epsilon.
LOG_ZERO = -1.0e30

STATUS_MATCHED = 0
STATUS_AMBIGUOUS = 1
STATUS_NO_CANDIDATE = 2

STATUS_NAMES = {
    STATUS_MATCHED: "matched",
    STATUS_AMBIGUOUS: "ambiguous",
    STATUS_NO_CANDIDATE: "no_typical_candidate",
}


@dataclass(frozen=True)
class SegmentedDatabase:
    """The repeated database with columns grouped into per-origin cells.

    Row i has one cell per original column: a tuple of the run's symbols
    for a retained column, or the erasure placeholder for a deleted one.
    Cells are materialized lazily through ``cell``/``row_cells``; the
    matcher works directly off the column offsets.
    """

    d2: np.ndarray
    pattern: RepetitionPattern
    offsets: np.ndarray

    @property
    def num_rows(self) -> int:
        return self.d2.shape[0]

    @property
    def n(self) -> int:
        return self.pattern.n

    def cell(self, i: int, j: int):
        s = int(self.pattern.s[j])
        if s == 0:
            return ERASURE
        start = self.offsets[j]
        return tuple(int(v) for v in self.d2[i, start : start + s])

    def row_cells(self, i: int) -> list:
        return [self.cell(i, j) for j in range(self.n)]


def segment(d2: np.ndarray, pattern: RepetitionPattern) -> SegmentedDatabase:
    """Group the repeated database's columns into runs per the pattern."""
    d2 = np.asarray(d2)
    if pattern.total != d2.shape[1]:
        raise ValueError(
            f"pattern repetitions sum to {pattern.total} but d2 has "
            f"{d2.shape[1]} columns"
        )
    offsets = np.concatenate(([0], np.cumsum(pattern.s)[:-1]))
    return SegmentedDatabase(d2=d2, pattern=pattern, offsets=offsets)


def _cell_code(cell, alphabet_size: int) -> int:
    code = 0
    for v in cell:
        code = code * alphabet_size + (v - 1)
    return code


def typicality_deviation(x_row, cells, est: DistributionEstimate):
    """Reference (per-pair) typicality deviations.

    Returns (dev_joint, dev_x, dev_y): absolute gaps between the
    empirical per-column log-likelihood rates of the pair and the
    estimate's entropies. Any zero-probability observation makes the
    corresponding deviation infinite.
    """
    x_row = np.asarray(x_row)
    n = len(cells)
    if x_row.size != n:
        raise ValueError("row length must equal the number of cells")
    k = est.alphabet_size
    ll_joint = ll_x = ll_y = 0.0
    for xval, cell in zip(x_row, cells):
        px = est.p_x[xval - 1]
        ll_x += math.log2(px) if px > 0.0 else -math.inf
        if cell is ERASURE:
            s, code = 0, 0
        else:
            s, code = len(cell), _cell_code(cell, k)
        table = est.tables[s]
        pj = table[xval - 1, code]
        ll_joint += math.log2(pj) if pj > 0.0 else -math.inf
        qy = float(table[:, code].sum())
        ll_y += math.log2(qy) if qy > 0.0 else -math.inf
    return (
        abs(-ll_joint / n - est.joint_entropy),
        abs(-ll_x / n - est.x_entropy),
        abs(-ll_y / n - est.y_entropy),
    )


@dataclass(frozen=True)
class MatchResult:
    """Per-row matching outcome.

    ``assigned[l]`` is the anonymized row matched to repeated row l, or
    -1 when none was declared; ``status[l]`` is one of the STATUS_*
    codes. Matched assignments are injective by construction.
    """

    assigned: np.ndarray
    status: np.ndarray

    @property
    def num_rows(self) -> int:
        return self.assigned.size

    def sigma_hat(self) -> np.ndarray:
        """Estimated permutation over anonymized rows (-1 where unmatched)."""
        out = np.full(self.num_rows, -1, dtype=np.int64)
        matched = self.status == STATUS_MATCHED
        out[self.assigned[matched]] = np.flatnonzero(matched)
        return out

    def status_counts(self) -> dict:
        return {
            name: int((self.status == code).sum())
            for code, name in STATUS_NAMES.items()
        }

    def row_error_rate(self, sigma_true: np.ndarray) -> float:
        """Fraction of rows not correctly and uniquely matched."""
        sigma_true = np.asarray(sigma_true)
        correct = (self.status[sigma_true] == STATUS_MATCHED) & (
            self.assigned[sigma_true] == np.arange(sigma_true.size)
        )
        return 1.0 - float(correct.mean())


def _safe_log2(p: np.ndarray) -> np.ndarray:
    out = np.full(p.shape, LOG_ZERO)
    np.log2(p, out=out, where=p > 0.0)
    return out


def match_rows(
    d1: np.ndarray,
    segmented: SegmentedDatabase,
    est: DistributionEstimate,
    epsilon: float,
) -> MatchResult:
    """Match every repeated row to its unique typical anonymized row.

    A repeated row with zero typical candidates gets the no-candidate
    status; with several, ambiguous. When two repeated rows claim the
    same anonymized row, both are demoted to ambiguous so that matched
    assignments stay injective.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    d1 = np.asarray(d1)
    m1, n = d1.shape
    if segmented.n != n:
        raise ValueError("segmented database has a different column count")
    d2 = segmented.d2
    m2 = d2.shape[0]
    if m1 != m2:
        raise ValueError("row matching needs equal row counts on both sides")
    s = segmented.pattern.s
    k = est.alphabet_size
    d1_idx = d1.astype(np.intp) - 1

    # X-marginal deviation: depends on the anonymized row only.
    log_px = _safe_log2(est.p_x)
    dev_x = np.abs(-log_px[d1_idx].sum(axis=1) / n - est.x_entropy)

    # Joint log-likelihood. The joint factorizes through the channel, so
    # the pairwise part is a sum over repeated columns of a score that
    # depends on (original entry, repeated entry): one matmul per symbol.
    orig = np.repeat(np.arange(n), s)
    log_channel = _safe_log2(est.p_y_given_x)
    joint_ll = np.zeros((m1, m2))
    if orig.size:
        d2_idx = d2.astype(np.intp) - 1
        for x in range(k):
            indicator = (d1_idx[:, orig] == x).astype(float)
            joint_ll += indicator @ log_channel[x][d2_idx].T
    joint_ll += log_px[d1_idx].sum(axis=1)[:, None]
    # in place: dev_joint = |(-joint_ll / n) - joint_entropy|
    joint_ll *= -1.0 / n
    joint_ll -= est.joint_entropy
    dev_joint = np.abs(joint_ll, out=joint_ll)

    # Y-marginal deviation: depends on the repeated row only. Cells are
    # scored through the estimated output-tuple distribution per s.
    ll_y = np.zeros(m2)
    for sv in np.unique(s):
        sv = int(sv)
        if sv == 0:
            continue  # erasure cells are certain, log-probability 0
        cols = np.flatnonzero(s == sv)
        log_qy = _safe_log2(est.tables[sv].sum(axis=0))
        for j in cols:
            start = segmented.offsets[j]
            codes = np.zeros(m2, dtype=np.intp)
            for t in range(sv):
                codes = codes * k + (d2[:, start + t].astype(np.intp) - 1)
            ll_y += log_qy[codes]
    dev_y = np.abs(-ll_y / n - est.y_entropy)

    typical = (dev_joint <= epsilon) & (dev_x <= epsilon)[:, None]
    typical &= (dev_y <= epsilon)[None, :]
    counts = typical.sum(axis=0)
    unique = counts == 1
    assigned = np.where(unique, typical.argmax(axis=0), -1)
    status = np.where(
        unique, STATUS_MATCHED, np.where(counts == 0, STATUS_NO_CANDIDATE, STATUS_AMBIGUOUS)
    ).astype(np.int8)

    # Two repeated rows claiming one anonymized row cannot both be right.
    matched_rows = np.flatnonzero(unique)
    targets, hits = np.unique(assigned[matched_rows], return_counts=True)
    for target, count in zip(targets, hits):
        if count > 1:
            collided = matched_rows[assigned[matched_rows] == target]
            status[collided] = STATUS_AMBIGUOUS
            assigned[collided] = -1
    return MatchResult(assigned=assigned, status=status)


def pattern_from_detections(
    is_replica: np.ndarray, retention: RetentionResult, n: int
) -> RepetitionPattern:
    """Reconstruct the repetition pattern from both detector outputs.

    Replica runs give the repetition count of each retained column in
    order; deleted columns get 0. The run count must equal the retained
    count.
    """
    _, lengths = replicas.column_runs(is_replica)
    if lengths.size != retention.num_retained:
        raise ValueError(
            f"{lengths.size} replica runs for {retention.num_retained} retained columns"
        )
    s = np.zeros(n, dtype=np.int64)
    s[retention.retained] = lengths
    return RepetitionPattern(s)


@dataclass
class PipelineResult:
    """Everything the de-anonymization pipeline produced.

    ``failed_stage`` is None on full completion, else one of
    'replica', 'deletion', 'pattern' with the exception message in
    ``failure``; later fields stay None after a failure.
    """

    is_replica: np.ndarray | None = None
    is_replica_seeds: np.ndarray | None = None
    retention: RetentionResult | None = None
    pattern: RepetitionPattern | None = None
    estimate: DistributionEstimate | None = None
    match: MatchResult | None = None
    failed_stage: str | None = None
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failed_stage is None

    def stage_flags(self) -> dict:
        return {
            "replica": self.is_replica is not None,
            "deletion": self.retention is not None,
            "pattern": self.pattern is not None,
            "estimate": self.estimate is not None,
            "match": self.match is not None,
        }


def deanonymize(
    d1: np.ndarray,
    d2: np.ndarray,
    g1: np.ndarray,
    g2: np.ndarray,
    alphabet_size: int,
    s_max: int,
    epsilon: float = 0.05,
    threshold_constant: float = 2.0,
) -> PipelineResult:
    """Full pipeline: detect replicas, detect deletions, estimate, match.

    ``alphabet_size`` and ``s_max`` are assumed known. When s_max <= 1
    replicas are impossible and the replica stage is vacuous (the
    distance series would be single-component by construction).
    Algorithmic detection failures are recorded in the result instead of
    raising, so a Monte Carlo harness never aborts.
    """
    d1 = np.asarray(d1)
    d2 = np.asarray(d2)
    g1 = np.asarray(g1)
    g2 = np.asarray(g2)
    if g2.shape[1] != d2.shape[1]:
        raise ValueError("g2 must share the database's repetition pattern")
    n = d1.shape[1]
    result = PipelineResult()

    try:
        if s_max <= 1:
            result.is_replica = np.zeros(max(d2.shape[1] - 1, 0), dtype=bool)
            result.is_replica_seeds = result.is_replica.copy()
        else:
            result.is_replica = replicas.detect_replicas(d2)
            result.is_replica_seeds = replicas.detect_replicas(g2)
    except replicas.SingleComponentError as exc:
        result.failed_stage, result.failure = "replica", str(exc)
        return result

    if d2.shape[1] == 0:
        retention = RetentionResult(
            retained=np.zeros(0, dtype=np.int64), deleted=np.arange(n), n=n
        )
        g2_dedup = g2
    else:
        starts, _ = replicas.column_runs(result.is_replica_seeds)
        g2_dedup = g2[:, starts]  # first column of each replica run
        try:
            retention = deletions.detect_deletions(
                g1, g2_dedup, alphabet_size, threshold_constant
            )
        except (deletions.MisdetectionError, deletions.NoUsefulRemappingError) as exc:
            result.failed_stage, result.failure = "deletion", str(exc)
            return result
    result.retention = retention

    try:
        if d2.shape[1] == 0:
            pattern = RepetitionPattern(np.zeros(n, dtype=np.int64))
        else:
            pattern = pattern_from_detections(result.is_replica, retention, n)
    except ValueError as exc:
        result.failed_stage, result.failure = "pattern", str(exc)
        return result
    result.pattern = pattern

    result.estimate = estimation.estimate_from_seeds(
        g1, g2_dedup, retention, pattern, alphabet_size, s_max=max(s_max, int(pattern.s.max())),
    )
    result.match = match_rows(d1, segment(d2, pattern), result.estimate, epsilon)
    return result
