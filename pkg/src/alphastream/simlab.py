"""Gaussian-means testing streams and replicated experiments.

Streams follow the two-group model: each step is non-null with probability
pi1; means come from F0 (point mass or normal) under the null and F1
(normal(3,1) by default) otherwise; observations are Z_t ~ N(mu_t, 1) and
one-sided p-values are P_t = Phi(-Z_t).

Replicates are keyed by (seed, replicate_id) through a counter-based
generator, so a replicate's stream is bit-identical no matter in which
order replicates run.  The experiment runner drives the compiled kernels
(exact mirrors of the engines) and aggregates error rates and power per
(procedure, pi1) cell.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from . import _kernels
from .metrics import GroundTruth, MetricsReport, aggregate, bh_offline, score_stream
from .procedures import canonical_name, make_procedure

ROSTER_DEFAULT = ("uncorrected", "alpha-spending", "lord", "saffron", "addis", "bh")

# default sweep for the non-null fraction, rare signals through dominant
PI1_GRID_DEFAULT = (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def _check_dist(name, spec):
    if spec[0] == "point":
        if len(spec) != 2:
            raise ValueError(f"{name}: point spec is ('point', value), got {spec}")
    elif spec[0] == "normal":
        if len(spec) != 3 or spec[2] < 0:
            raise ValueError(f"{name}: normal spec is ('normal', mean, sd>=0), got {spec}")
    else:
        raise ValueError(f"{name}: unknown distribution kind {spec[0]!r}")


@dataclass(frozen=True)
class SimConfig:
    """Stream-generation and experiment settings."""

    T: int = 1000
    pi1: float = 0.5
    f0: tuple = ("point", 0.0)
    f1: tuple = ("normal", 3.0, 1.0)
    alpha: float = 0.05
    seed: int = 0
    replicates: int = 2000
    procedures: tuple[str, ...] = ROSTER_DEFAULT

    def __post_init__(self):
        if not 0.0 <= self.pi1 <= 1.0:
            raise ValueError(f"pi1 must lie in [0, 1], got {self.pi1}")
        if self.T < 1 or self.replicates < 1:
            raise ValueError("T and replicates must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        _check_dist("f0", tuple(self.f0))
        _check_dist("f1", tuple(self.f1))
        object.__setattr__(self, "f0", tuple(self.f0))
        object.__setattr__(self, "f1", tuple(self.f1))
        object.__setattr__(self, "procedures", tuple(self.procedures))


@dataclass(frozen=True)
class StreamSample:
    """One simulated stream: z-scores, p-values, and truth labels."""

    z: np.ndarray
    p: np.ndarray
    truth: GroundTruth
    mu: np.ndarray


def _draw_means(rng, spec, size: int) -> np.ndarray:
    if spec[0] == "point":
        return np.full(size, float(spec[1]))
    return rng.normal(spec[1], spec[2], size)


def gaussian_stream(cfg: SimConfig, replicate_id: int) -> StreamSample:
    """Deterministic mixture stream for one replicate.

    The generator is Philox keyed by (seed, replicate_id); draws happen in a
    fixed order (labels, null means, non-null means, noise), which makes the
    sample reproducible bit-for-bit.
    """
    ss = np.random.SeedSequence(entropy=(cfg.seed, replicate_id))
    rng = np.random.Generator(np.random.Philox(ss))
    nonnull = rng.random(cfg.T) < cfg.pi1
    mu0 = _draw_means(rng, cfg.f0, cfg.T)
    mu1 = _draw_means(rng, cfg.f1, cfg.T)
    mu = np.where(nonnull, mu1, mu0)
    z = mu + rng.standard_normal(cfg.T)
    p = np.clip(ndtr(-z), 0.0, 1.0)
    return StreamSample(z=z, p=p, truth=GroundTruth(~nonnull), mu=mu)


def ordering_scenario(sample: StreamSample, mode: str, seed: int | None = None) -> StreamSample:
    """Reorder a stream to mimic side-information orderings.

    favourable: non-nulls first (ascending p), nulls after;
    adversarial: nulls first, non-nulls (ascending p) last;
    shuffled: one uniform permutation.  Truth labels move with the p-values.
    """
    nonnull_idx = np.nonzero(~sample.truth.is_null)[0]
    null_idx = np.nonzero(sample.truth.is_null)[0]
    nonnull_sorted = nonnull_idx[np.argsort(sample.p[nonnull_idx], kind="stable")]
    if mode == "favourable":
        order = np.concatenate([nonnull_sorted, null_idx])
    elif mode == "adversarial":
        order = np.concatenate([null_idx, nonnull_sorted])
    elif mode == "shuffled":
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(sample.p))
    else:
        raise ValueError(f"unknown ordering mode {mode!r}")
    return StreamSample(
        z=sample.z[order],
        p=sample.p[order],
        truth=sample.truth.permuted(order),
        mu=sample.mu[order],
    )


# ---------------------------------------------------------------------------
# fast per-stream execution
# ---------------------------------------------------------------------------


@dataclass
class _FastProc:
    name: str
    kind: str
    gt: np.ndarray | None = None
    w0: float = 0.0
    lam: float = 0.0
    eta: float = 0.0


def _prepare_procs(names: Iterable[str], alpha: float, T: int) -> list[_FastProc]:
    procs = []
    for raw_name in names:
        if raw_name.strip().lower() == "bh":
            procs.append(_FastProc(name="bh", kind="bh"))
            continue
        name = canonical_name(raw_name)
        engine = make_procedure(name, alpha=alpha, track_history=False)
        if name == "uncorrected":
            procs.append(_FastProc(name=name, kind="uncorrected"))
            continue
        gt = engine.gamma.table(T + 1)
        if name == "alpha-spending":
            procs.append(_FastProc(name=name, kind="alpha-spending", gt=gt))
        elif name == "lord":
            procs.append(_FastProc(name=name, kind="lord", gt=gt, w0=engine.w0))
        elif name == "gai++":
            procs.append(_FastProc(name=name, kind="gai++", gt=gt, w0=engine.w0))
        elif name == "saffron":
            procs.append(_FastProc(name=name, kind="saffron", gt=gt, w0=engine.w0,
                                   lam=engine.lam))
        elif name == "addis":
            procs.append(_FastProc(name=name, kind="addis", gt=gt, w0=engine.w0,
                                   lam=engine.lam, eta=engine.eta))
        else:  # pragma: no cover
            raise AssertionError(name)
    return procs


def _run_fast(proc: _FastProc, p: np.ndarray, alpha: float):
    """(alphas, rejected) for one stream; alphas is None for the offline row."""
    if proc.kind == "bh":
        rej = np.zeros(len(p), dtype=bool)
        rej[bh_offline(p, alpha)] = True
        return None, rej
    if proc.kind == "uncorrected":
        alphas = np.full(len(p), alpha)
        return alphas, p <= alpha
    if proc.kind == "alpha-spending":
        alphas = alpha * proc.gt[1:len(p) + 1]
        return alphas, p <= alphas
    if proc.kind == "lord":
        return _kernels.lord_stream(p, proc.gt, alpha, proc.w0)
    if proc.kind == "gai++":
        return _kernels.gai_stream(p, proc.gt, alpha, proc.w0)
    if proc.kind == "saffron":
        return _kernels.saffron_stream(p, proc.gt, alpha, proc.w0, proc.lam)
    if proc.kind == "addis":
        return _kernels.addis_stream(p, proc.gt, alpha, proc.w0, proc.lam, proc.eta)
    raise AssertionError(proc.kind)  # pragma: no cover


# ---------------------------------------------------------------------------
# experiment runner
# ---------------------------------------------------------------------------


def run_procedure(name: str, p, alpha: float = 0.05):
    """(alphas, rejected) for one p-value stream under a named procedure.

    Uses the compiled per-stream path with the procedure defaults; "bh"
    runs the offline comparator (its alphas are None).  For non-default
    knobs, build an engine with make_procedure and drive it instead.
    """
    p = np.asarray(p, dtype=np.float64)
    procs = _prepare_procs([name], alpha, len(p))
    return _run_fast(procs[0], p, alpha)


@dataclass
class CellResult:
    """Aggregates plus per-replicate samples for one (pi1, procedure) cell."""

    pi1: float
    procedure: str
    report: MetricsReport
    fdps: np.ndarray
    powers: np.ndarray
    mean_alpha: np.ndarray | None = None


@dataclass
class ExperimentResult:
    cfg: SimConfig
    pi1_grid: tuple[float, ...]
    cells: dict = field(default_factory=dict)

    def cell(self, pi1: float, procedure: str) -> CellResult:
        return self.cells[(pi1, procedure)]

    def write_summary_csv(self, out=None) -> str:
        """Wide per-cell report (procedure, pi1, fdr, mfdr, ..., mean_rejections)."""
        from .metrics import write_report_csv

        entries = [(name, pi1, cell.report)
                   for (pi1, name), cell in sorted(self.cells.items())]
        return write_report_csv(entries, out)

    def to_rows(self) -> list[tuple]:
        """Plot-ready long format: (pi1, procedure, metric, value, mc_se)."""
        rows = []
        for (pi1, name), cell in sorted(self.cells.items()):
            rep = cell.report
            se = rep.mc_se
            rows.append((pi1, name, "fdr", rep.fdr, se.get("fdr")))
            rows.append((pi1, name, "mfdr", rep.mfdr, None))
            rows.append((pi1, name, "fdx", rep.fdx, se.get("fdx")))
            rows.append((pi1, name, "fwer", rep.fwer, se.get("fwer")))
            rows.append((pi1, name, "power", rep.power, se.get("power")))
            rows.append((pi1, name, "mean_rejections", rep.mean_rejections,
                         se.get("mean_rejections")))
        return rows

    def write_csv(self, path_or_file) -> None:
        close = False
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            fh = open(path_or_file, "w", newline="", encoding="utf-8")
            close = True
        else:
            fh = path_or_file
        try:
            writer = csv.writer(fh)
            writer.writerow(["pi1", "procedure", "metric", "value", "mc_se"])
            for pi1, name, metric, value, se in self.to_rows():
                writer.writerow([
                    repr(float(pi1)),
                    name,
                    metric,
                    "" if value is None else repr(float(value)),
                    "" if se is None else repr(float(se)),
                ])
        finally:
            if close:
                fh.close()


def run_experiment(
    cfg: SimConfig,
    pi1_grid: Sequence[float] | None = None,
    eps: float = 0.1,
    collect_trajectories: bool = False,
) -> ExperimentResult:
    """Replicated comparison of the configured procedures over a pi1 grid.

    Every procedure sees the same streams within a replicate.  Aggregation
    is a deterministic fold in replicate order; per-replicate FDP and power
    stay available in each cell for paired comparisons.  Set
    ``collect_trajectories`` to also record the replicate-averaged alpha_t
    path (the offline comparator has none).
    """
    grid = tuple(pi1_grid) if pi1_grid is not None else (cfg.pi1,)
    procs = _prepare_procs(cfg.procedures, cfg.alpha, cfg.T)
    result = ExperimentResult(cfg=cfg, pi1_grid=grid)
    for pi1 in grid:
        cell_cfg = dataclasses.replace(cfg, pi1=pi1)
        reports = {proc.name: [] for proc in procs}
        traj = {proc.name: np.zeros(cfg.T) for proc in procs} if collect_trajectories else None
        for rep_id in range(cfg.replicates):
            sample = gaussian_stream(cell_cfg, rep_id)
            for proc in procs:
                alphas, rejected = _run_fast(proc, sample.p, cfg.alpha)
                reports[proc.name].append(score_stream(rejected, sample.truth))
                if collect_trajectories and alphas is not None:
                    traj[proc.name] += alphas
        for proc in procs:
            reps = reports[proc.name]
            mean_alpha = None
            if collect_trajectories and proc.kind != "bh":
                mean_alpha = traj[proc.name] / cfg.replicates
            result.cells[(pi1, proc.name)] = CellResult(
                pi1=pi1,
                procedure=proc.name,
                report=aggregate(reps, eps),
                fdps=np.array([r.fdp for r in reps]),
                powers=np.array([r.power for r in reps]),
                mean_alpha=mean_alpha,
            )
    return result
