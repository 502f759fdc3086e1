"""Realized error rates, power, and the offline step-up comparator.

Scoring works from a boolean rejection sequence and ground-truth labels:

    FDP(T) = V(T) / max(R(T), 1)         false discovery proportion
    FDR    = E[FDP(T)]                   estimated by the replicate mean
    mFDR   = E[V(T)] / E[max(R(T), 1)]   ratio of expectations
    FDX_e  = Pr[sup_t FDP(t) >= e]       running-sup exceedance
    FWER   = Pr[V(T) >= 1]

Power is the expected fraction of non-nulls rejected, with the denominator
guarded by max(.., 1) so replicates without non-nulls contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import DecisionRecord


@dataclass(frozen=True)
class GroundTruth:
    """Per-index truth labels; ``is_null[i]`` is True for a true null."""

    is_null: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "is_null", np.asarray(self.is_null, dtype=bool))

    def __len__(self) -> int:
        return len(self.is_null)

    @property
    def n_nonnull(self) -> int:
        return int(np.sum(~self.is_null))

    def permuted(self, order: np.ndarray) -> "GroundTruth":
        return GroundTruth(self.is_null[np.asarray(order)])


@dataclass
class MetricsReport:
    """Counts and rates for one stream, or Monte Carlo aggregates.

    score_stream fills the per-stream section (v, r, fdp, sup_fdp, power);
    aggregate additionally fills fdr/mfdr/fdx/fwer/mean_rejections and the
    Monte Carlo standard errors.
    """

    v: int = 0
    r: int = 0
    fdp: float = 0.0
    sup_fdp: float = 0.0
    true_rejections: int = 0
    n_nonnull: int = 0
    power: float = 0.0
    # aggregate section
    n_replicates: int = 1
    fdr: float | None = None
    mfdr: float | None = None
    fdx: float | None = None
    fdx_eps: float | None = None
    fwer: float | None = None
    mean_rejections: float | None = None
    mc_se: dict = field(default_factory=dict)


def _as_rejected_array(decisions) -> np.ndarray:
    if len(decisions) and isinstance(decisions[0], DecisionRecord):
        return np.array([d.rejected for d in decisions], dtype=bool)
    return np.asarray(decisions, dtype=bool)


def score_stream(decisions, truth: GroundTruth) -> MetricsReport:
    """Score one decision sequence against ground truth.

    ``decisions`` is a sequence of DecisionRecord or a boolean array of
    rejections, aligned index-by-index with ``truth``.  The running sup of
    FDP over t = 1..T is recorded for exceedance estimates.
    """
    rejected = _as_rejected_array(decisions)
    if len(rejected) != len(truth):
        raise ValueError(
            f"decisions ({len(rejected)}) and truth ({len(truth)}) differ in length"
        )
    null = truth.is_null
    r_path = np.cumsum(rejected)
    v_path = np.cumsum(rejected & null)
    with np.errstate(invalid="ignore"):
        fdp_path = v_path / np.maximum(r_path, 1)
    r = int(r_path[-1]) if len(rejected) else 0
    v = int(v_path[-1]) if len(rejected) else 0
    true_rej = r - v
    n_nonnull = truth.n_nonnull
    return MetricsReport(
        v=v,
        r=r,
        fdp=v / max(r, 1),
        sup_fdp=float(np.max(fdp_path)) if len(rejected) else 0.0,
        true_rejections=true_rej,
        n_nonnull=n_nonnull,
        power=true_rej / max(n_nonnull, 1),
    )


def aggregate(reports: Sequence[MetricsReport], eps: float = 0.1) -> MetricsReport:
    """Monte Carlo estimates over replicates, with standard errors.

    FDR is the mean FDP, mFDR the ratio of means, FWER the fraction of
    replicates with any false rejection, and FDX the fraction whose running
    FDP ever reached ``eps``.
    """
    if not reports:
        raise ValueError("aggregate needs at least one report")
    n = len(reports)
    fdps = np.array([rep.fdp for rep in reports])
    vs = np.array([rep.v for rep in reports], dtype=float)
    rs = np.array([rep.r for rep in reports], dtype=float)
    sups = np.array([rep.sup_fdp for rep in reports])
    powers = np.array([rep.power for rep in reports])

    fdr = float(np.mean(fdps))
    fwer = float(np.mean(vs >= 1))
    fdx = float(np.mean(sups >= eps))
    power = float(np.mean(powers))

    def _mean_se(x):
        return float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else 0.0

    def _binom_se(p_hat):
        return float(np.sqrt(p_hat * (1.0 - p_hat) / n))

    return MetricsReport(
        v=int(np.sum(vs)),
        r=int(np.sum(rs)),
        fdp=fdr,
        sup_fdp=float(np.mean(sups)),
        true_rejections=int(np.sum(rs - vs)),
        n_nonnull=int(np.sum([rep.n_nonnull for rep in reports])),
        power=power,
        n_replicates=n,
        fdr=fdr,
        mfdr=float(np.mean(vs) / np.mean(np.maximum(rs, 1.0))),
        fdx=fdx,
        fdx_eps=eps,
        fwer=fwer,
        mean_rejections=float(np.mean(rs)),
        mc_se={
            "fdr": _mean_se(fdps),
            "power": _mean_se(powers),
            "fwer": _binom_se(fwer),
            "fdx": _binom_se(fdx),
            "mean_rejections": _mean_se(rs),
        },
    )


def write_report_csv(entries, out=None) -> str:
    """Wide-format report: one row per (procedure, pi1) aggregate.

    ``entries`` is an iterable of (procedure, pi1, MetricsReport) with the
    aggregate section filled.  Returns the CSV text; writes it to ``out``
    (path or file object) when given.
    """
    import io

    buf = io.StringIO()
    buf.write("procedure,pi1,fdr,mfdr,fdx,fwer,power,mean_rejections\n")
    for procedure, pi1, rep in entries:
        cells = [rep.fdr, rep.mfdr, rep.fdx, rep.fwer, rep.power, rep.mean_rejections]
        if any(c is None for c in cells):
            raise ValueError(f"{procedure}: report has no aggregate section; run aggregate() first")
        buf.write(f"{procedure},{repr(float(pi1))}," +
                  ",".join(repr(float(c)) for c in cells) + "\n")
    text = buf.getvalue()
    if out is not None:
        if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            out.write(text)
    return text


def bh_offline(pvalues, alpha: float) -> np.ndarray:
    """Offline step-up rejection set (0-based indices into the input).

    Sort ascending, find the largest k with p_(k) <= k*alpha/n, and reject
    every p-value <= p_(k) (ties at the threshold are rejected; comparisons
    are non-strict, mirroring the engine's tie rule).
    """
    p = np.asarray(pvalues, dtype=float)
    if p.size == 0:
        return np.array([], dtype=int)
    if np.any(~((p >= 0) & (p <= 1))):
        raise ValueError("p-values must lie in [0, 1]")
    n = p.size
    sorted_p = np.sort(p)
    passing = np.nonzero(sorted_p <= np.arange(1, n + 1) * alpha / n)[0]
    if passing.size == 0:
        return np.array([], dtype=int)
    threshold = sorted_p[passing[-1]]
    return np.nonzero(p <= threshold)[0]
