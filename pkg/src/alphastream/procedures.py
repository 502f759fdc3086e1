"""Level-assignment procedures for online testing.

The rules, all built on the core engine contract:

* ``uncorrected``    -- alpha_t = alpha (no error control; baseline)
* ``alpha-spending`` -- alpha_t = alpha * gamma_t (Bonferroni-style budget)
* ``gai++``          -- generic alpha-investing wealth engine with the
                        capped payout rule
* ``lord``           -- rejection-time schedule re-investment
* ``saffron``        -- adaptive variant that only pays for non-candidate
                        steps (p > lambda)
* ``addis``          -- additionally discards conservative p-values
                        (p > eta) from its clock

The level formulas are exposed as pure functions of explicit state so they
can be unit-tested against hand evaluations and mirrored by the simulation
kernels; the engine classes own the evolving counters and the wealth ledger.

All summations over past rejections run sequentially in rejection order.
The simulation kernels replicate the same operation order, which makes the
two paths bit-identical and lets the equivalence tests assert exact floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import DecisionEngine, ProcedureConfig
from .gamma import GammaSequence, make_gamma, parse_spec

TOL = 1e-12  # absolute tolerance for wealth/cap equality guards


class WealthOverdraftError(RuntimeError):
    """A step tried to spend more penalty than the current wealth allows."""


class PayoutCapError(RuntimeError):
    """A rejection payout exceeded the capped-investing bound."""


# ---------------------------------------------------------------------------
# pure level formulas
# ---------------------------------------------------------------------------


def alpha_spending_level(t: int, alpha: float, gamma: GammaSequence) -> float:
    """alpha_t = alpha * gamma_t; the levels sum to at most alpha."""
    return alpha * gamma.at(t)


def lord_level(
    t: int,
    alpha: float,
    w0: float,
    gamma: GammaSequence,
    rejection_times: Sequence[int],
) -> float:
    """Schedule re-investment level.

    alpha_t = w0*gamma_t + (alpha - w0)*gamma_{t - tau_1}
            + alpha * sum_{j >= 2} gamma_{t - tau_j}

    with gamma zero-extended, so the terms vanish until the corresponding
    rejection exists.  ``rejection_times`` must contain only times < t.
    """
    a = w0 * gamma.at(t)
    if rejection_times:
        a += (alpha - w0) * gamma.at(t - rejection_times[0])
        s = 0.0
        for tau in rejection_times[1:]:
            s += gamma.at(t - tau)
        a += alpha * s
    return a


def saffron_level(
    t: int,
    alpha: float,
    w0: float,
    lam: float,
    gamma: GammaSequence,
    candidates_before: int,
    rejection_times: Sequence[int],
    candidates_since: Sequence[int],
) -> float:
    """Candidate-clock level, capped at lambda.

    ``candidates_before`` is the candidate count among steps 1..t-1;
    ``candidates_since[j]`` counts candidates strictly between the j-th
    rejection and t.  The gamma indices advance only on non-candidate steps.
    """
    a = w0 * gamma.at(t - candidates_before)
    if rejection_times:
        a += (alpha - w0) * gamma.at(t - rejection_times[0] - candidates_since[0])
        s = 0.0
        for tau, c in zip(rejection_times[1:], candidates_since[1:]):
            s += gamma.at(t - tau - c)
        a += alpha * s
    return min(lam, (1.0 - lam) * a)


def addis_level(
    alpha: float,
    w0: float,
    lam: float,
    eta: float,
    gamma: GammaSequence,
    selected_before: int,
    candidates_before: int,
    rejection_ranks: Sequence[int],
    candidates_since: Sequence[int],
) -> float:
    """Discarding level, capped at lambda.

    Time is counted on the selected clock: ``selected_before`` is the number
    of steps i < t with p_i <= eta, and ``rejection_ranks[j]`` is the
    selected-count through the j-th rejection.  Requires a gamma sequence
    with origin 0.
    """
    a = w0 * gamma.at(selected_before - candidates_before)
    if rejection_ranks:
        a += (alpha - w0) * gamma.at(selected_before - rejection_ranks[0] - candidates_since[0])
        s = 0.0
        for ts, c in zip(rejection_ranks[1:], candidates_since[1:]):
            s += gamma.at(selected_before - ts - c)
        a += alpha * s
    return min(lam, (eta - lam) * a)


# ---------------------------------------------------------------------------
# wealth ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerEntry:
    phi: float
    psi: float
    bound: float
    rejected: bool


class WealthLedger:
    """Alpha-wealth bookkeeping: W(t) = W(t-1) - phi_t + R_t * psi_t.

    The penalty may never exceed the current wealth, and for capped-investing
    rules the payout is bounded by min(phi + b, phi/alpha_t + b - 1) with
    b = alpha - w0 before the first rejection and alpha afterwards.
    Procedures whose payouts are justified by their own estimates (the
    candidate/discarding rules) construct the ledger with enforce_cap=False;
    overdraft and non-negativity checks always apply.
    """

    def __init__(
        self,
        w0: float,
        alpha: float,
        enforce_cap: bool = True,
        track_history: bool = True,
    ):
        if w0 < 0:
            raise ValueError(f"initial wealth must be non-negative, got {w0}")
        self.w0 = w0
        self.alpha = alpha
        self.enforce_cap = enforce_cap
        self.track_history = track_history
        self.wealth = w0
        self.rejections = 0
        self.history: list[LedgerEntry] = []

    def bound(self) -> float:
        """The payout bound b_t implied by rejections so far."""
        return self.alpha - self.w0 if self.rejections == 0 else self.alpha

    def step(self, alpha_t: float, phi: float, psi: float, rejected: bool) -> "WealthLedger":
        if phi < 0 or psi < 0:
            raise ValueError(f"phi and psi must be non-negative, got {phi}, {psi}")
        if phi > self.wealth + TOL:
            raise WealthOverdraftError(
                f"penalty {phi:.6g} exceeds wealth {self.wealth:.6g}"
            )
        b = self.bound()
        if self.enforce_cap:
            ratio = phi / alpha_t if alpha_t > 0 else math.inf
            cap = min(phi + b, ratio + b - 1.0)
            if psi > cap + TOL:
                raise PayoutCapError(
                    f"payout {psi:.6g} exceeds cap {cap:.6g} (b={b:.6g})"
                )
        self.wealth = self.wealth - phi + (psi if rejected else 0.0)
        if rejected:
            self.rejections += 1
        if self.track_history:
            self.history.append(LedgerEntry(phi=phi, psi=psi, bound=b, rejected=rejected))
        return self

    def state_dict(self) -> dict:
        tail = self.history[-1] if self.history else None
        return {
            "wealth": self.wealth,
            "rejections": self.rejections,
            "tail": None if tail is None else [tail.phi, tail.psi, tail.bound, tail.rejected],
        }

    def load_state(self, state: dict) -> None:
        self.wealth = float(state["wealth"])
        self.rejections = int(state["rejections"])
        self.history = []
        tail = state.get("tail")
        if tail is not None:
            self.history.append(
                LedgerEntry(phi=tail[0], psi=tail[1], bound=tail[2], rejected=tail[3])
            )


def gai_step(
    ledger: WealthLedger,
    alpha_t: float,
    phi: float,
    psi: float,
    rejected: bool,
) -> WealthLedger:
    """One capped-investing update; raises on overdraft or payout above cap."""
    saved = ledger.enforce_cap
    ledger.enforce_cap = True
    try:
        return ledger.step(alpha_t, phi, psi, rejected)
    finally:
        ledger.enforce_cap = saved


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------


class _WealthEngine(DecisionEngine):
    """Shared scaffolding: config capture and ledger plumbing."""

    def __init__(self, alpha: float, track_history: bool = True):
        super().__init__()
        self.alpha = alpha
        self._track_history = track_history

    def wealth(self) -> float:
        return self._ledger.wealth

    @property
    def ledger(self) -> WealthLedger:
        return self._ledger

    def _extra_state(self) -> dict:
        return {"ledger": self._ledger.state_dict()}

    def _load_extra_state(self, state: dict) -> None:
        self._ledger.load_state(state["ledger"])


class Uncorrected(_WealthEngine):
    """alpha_t = alpha at every step; no multiplicity control."""

    name = "uncorrected"

    def __init__(self, alpha: float = 0.05, track_history: bool = True):
        super().__init__(alpha, track_history)
        self._ledger = WealthLedger(0.0, alpha, enforce_cap=False, track_history=track_history)

    def _level(self) -> float:
        return self.alpha

    def _advance(self, p: float, rejected: bool) -> None:
        self._ledger.step(self._pending, 0.0, 0.0, rejected)

    def config_dict(self) -> dict:
        return {"procedure": self.name, "alpha": self.alpha}


class AlphaSpending(_WealthEngine):
    """Spend the budget alpha along the gamma schedule; never earn it back."""

    name = "alpha-spending"

    def __init__(self, alpha: float = 0.05, gamma: GammaSequence | None = None,
                 track_history: bool = True):
        super().__init__(alpha, track_history)
        self.gamma = gamma if gamma is not None else make_gamma("lord-default")
        if self.gamma.origin != 1:
            raise ValueError("alpha-spending requires a gamma sequence with origin 1")
        self._ledger = WealthLedger(alpha, alpha, enforce_cap=True, track_history=track_history)

    def _level(self) -> float:
        return alpha_spending_level(self._t, self.alpha, self.gamma)

    def _advance(self, p: float, rejected: bool) -> None:
        self._ledger.step(self._pending, self._pending, 0.0, rejected)

    def config_dict(self) -> dict:
        return {"procedure": self.name, "alpha": self.alpha, "gamma": self.gamma.descriptor()}


class GaiPlusPlus(_WealthEngine):
    """Proportional alpha-investing with the capped payout.

    Spends alpha_t = phi_t = W(rho) * gamma_{t - rho}, where rho is the last
    rejection time (0 at the start), and earns the full cap b_t on each
    rejection.  The schedule restarts at every rejection, so the cumulative
    spend out of each wealth snapshot never exceeds it.
    """

    name = "gai++"

    def __init__(self, alpha: float = 0.05, w0: float | None = None,
                 gamma: GammaSequence | None = None, track_history: bool = True):
        super().__init__(alpha, track_history)
        self.w0 = alpha / 2 if w0 is None else w0
        self.gamma = gamma if gamma is not None else make_gamma("lord-default")
        if self.gamma.origin != 1:
            raise ValueError("gai++ requires a gamma sequence with origin 1")
        self._ledger = WealthLedger(self.w0, alpha, enforce_cap=True, track_history=track_history)
        self._rho = 0
        self._snapshot = self.w0

    def _level(self) -> float:
        return self._snapshot * self.gamma.at(self._t - self._rho)

    def _advance(self, p: float, rejected: bool) -> None:
        phi = self._pending
        gai_step(self._ledger, self._pending, phi, self._ledger.bound(), rejected)
        if rejected:
            self._rho = self._t
            self._snapshot = self._ledger.wealth

    def _extra_state(self) -> dict:
        return {
            "ledger": self._ledger.state_dict(),
            "rho": self._rho,
            "snapshot": self._snapshot,
        }

    def _load_extra_state(self, state: dict) -> None:
        self._ledger.load_state(state["ledger"])
        self._rho = int(state["rho"])
        self._snapshot = float(state["snapshot"])

    def config_dict(self) -> dict:
        return {"procedure": self.name, "alpha": self.alpha, "w0": self.w0,
                "gamma": self.gamma.descriptor()}


class LordPlusPlus(_WealthEngine):
    """Re-invests rejection earnings along the gamma schedule."""

    name = "lord"

    def __init__(self, alpha: float = 0.05, w0: float | None = None,
                 gamma: GammaSequence | None = None, track_history: bool = True):
        super().__init__(alpha, track_history)
        self.w0 = alpha / 10 if w0 is None else w0
        self.gamma = gamma if gamma is not None else make_gamma("lord-default")
        if self.gamma.origin != 1:
            raise ValueError("lord requires a gamma sequence with origin 1")
        self._ledger = WealthLedger(self.w0, alpha, enforce_cap=True, track_history=track_history)

    def _level(self) -> float:
        return lord_level(self._t, self.alpha, self.w0, self.gamma, self._rejection_times)

    def _advance(self, p: float, rejected: bool) -> None:
        gai_step(self._ledger, self._pending, self._pending, self._ledger.bound(), rejected)

    def config_dict(self) -> dict:
        return {"procedure": self.name, "alpha": self.alpha, "w0": self.w0,
                "gamma": self.gamma.descriptor()}


class Saffron(_WealthEngine):
    """Adaptive rule: only non-candidate steps (p > lambda) cost wealth."""

    name = "saffron"

    def __init__(self, alpha: float = 0.05, w0: float | None = None, lam: float = 0.5,
                 gamma: GammaSequence | None = None, track_history: bool = True):
        super().__init__(alpha, track_history)
        if not 0.0 < lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {lam}")
        self.w0 = alpha / 2 if w0 is None else w0
        self.lam = lam
        self.gamma = gamma if gamma is not None else make_gamma("power", s=1.6)
        if self.gamma.origin != 1:
            raise ValueError("saffron requires a gamma sequence with origin 1")
        self._ledger = WealthLedger(
            (1.0 - lam) * self.w0, alpha, enforce_cap=False, track_history=track_history
        )
        self._cand_before = 0          # candidates among steps 1..t-1
        self._cand_since: list[int] = []  # per rejection, candidates after it

    def _level(self) -> float:
        return saffron_level(
            self._t, self.alpha, self.w0, self.lam, self.gamma,
            self._cand_before, self._rejection_times, self._cand_since,
        )

    def _unclamped(self) -> float:
        a = self.w0 * self.gamma.at(self._t - self._cand_before)
        if self._rejection_times:
            a += (self.alpha - self.w0) * self.gamma.at(
                self._t - self._rejection_times[0] - self._cand_since[0]
            )
            s = 0.0
            for tau, c in zip(self._rejection_times[1:], self._cand_since[1:]):
                s += self.gamma.at(self._t - tau - c)
            a += self.alpha * s
        return (1.0 - self.lam) * a

    def _advance(self, p: float, rejected: bool) -> None:
        is_candidate = p <= self.lam
        phi = 0.0 if is_candidate else self._unclamped()
        if self._ledger.rejections == 0:
            psi = (1.0 - self.lam) * (self.alpha - self.w0)
        else:
            psi = (1.0 - self.lam) * self.alpha
        self._ledger.step(self._pending, phi, psi if rejected else 0.0, rejected)
        if is_candidate:
            self._cand_before += 1
            for j in range(len(self._cand_since)):
                self._cand_since[j] += 1
        if rejected:
            self._cand_since.append(0)

    def _extra_state(self) -> dict:
        return {
            "ledger": self._ledger.state_dict(),
            "cand_before": self._cand_before,
            "cand_since": list(self._cand_since),
        }

    def _load_extra_state(self, state: dict) -> None:
        self._ledger.load_state(state["ledger"])
        self._cand_before = int(state["cand_before"])
        self._cand_since = [int(x) for x in state["cand_since"]]

    def config_dict(self) -> dict:
        return {"procedure": self.name, "alpha": self.alpha, "w0": self.w0,
                "lambda": self.lam, "gamma": self.gamma.descriptor()}


class Addis(_WealthEngine):
    """Adaptive + discarding: steps with p > eta never advance the clock."""

    name = "addis"

    def __init__(self, alpha: float = 0.05, w0: float | None = None, lam: float = 0.25,
                 eta: float = 0.5, gamma: GammaSequence | None = None,
                 track_history: bool = True):
        super().__init__(alpha, track_history)
        if not 0.0 < lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {lam}")
        if not lam < eta <= 1.0:
            raise ValueError(f"eta must satisfy lambda < eta <= 1, got eta={eta}, lambda={lam}")
        self.w0 = alpha / 2 if w0 is None else w0
        self.lam = lam
        self.eta = eta
        self.gamma = gamma if gamma is not None else make_gamma("power", s=1.6, origin=0)
        if self.gamma.origin != 0:
            raise ValueError("addis requires a gamma sequence with origin 0")
        self._ledger = WealthLedger(
            (eta - lam) * self.w0, alpha, enforce_cap=False, track_history=track_history
        )
        self._sel_before = 0           # selected steps (p <= eta) among 1..t-1
        self._cand_before = 0
        self._rej_ranks: list[int] = []   # selected-count through each rejection
        self._cand_since: list[int] = []

    def _level(self) -> float:
        return addis_level(
            self.alpha, self.w0, self.lam, self.eta, self.gamma,
            self._sel_before, self._cand_before, self._rej_ranks, self._cand_since,
        )

    def _unclamped(self) -> float:
        a = self.w0 * self.gamma.at(self._sel_before - self._cand_before)
        if self._rej_ranks:
            a += (self.alpha - self.w0) * self.gamma.at(
                self._sel_before - self._rej_ranks[0] - self._cand_since[0]
            )
            s = 0.0
            for ts, c in zip(self._rej_ranks[1:], self._cand_since[1:]):
                s += self.gamma.at(self._sel_before - ts - c)
            a += self.alpha * s
        return (self.eta - self.lam) * a

    def _advance(self, p: float, rejected: bool) -> None:
        selected = p <= self.eta
        is_candidate = p <= self.lam
        phi = self._unclamped() if (selected and not is_candidate) else 0.0
        if self._ledger.rejections == 0:
            psi = (self.eta - self.lam) * (self.alpha - self.w0)
        else:
            psi = (self.eta - self.lam) * self.alpha
        self._ledger.step(self._pending, phi, psi if rejected else 0.0, rejected)
        if is_candidate:
            self._cand_before += 1
            for j in range(len(self._cand_since)):
                self._cand_since[j] += 1
        if rejected:
            # a rejected p satisfies p <= alpha_t <= lambda < eta, so it is selected
            self._rej_ranks.append(self._sel_before + 1)
            self._cand_since.append(0)
        if selected:
            self._sel_before += 1

    def _extra_state(self) -> dict:
        return {
            "ledger": self._ledger.state_dict(),
            "sel_before": self._sel_before,
            "cand_before": self._cand_before,
            "rej_ranks": list(self._rej_ranks),
            "cand_since": list(self._cand_since),
        }

    def _load_extra_state(self, state: dict) -> None:
        self._ledger.load_state(state["ledger"])
        self._sel_before = int(state["sel_before"])
        self._cand_before = int(state["cand_before"])
        self._rej_ranks = [int(x) for x in state["rej_ranks"]]
        self._cand_since = [int(x) for x in state["cand_since"]]

    def config_dict(self) -> dict:
        return {"procedure": self.name, "alpha": self.alpha, "w0": self.w0,
                "lambda": self.lam, "eta": self.eta, "gamma": self.gamma.descriptor()}


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

PROCEDURES = ("uncorrected", "alpha-spending", "gai++", "lord", "saffron", "addis")

_ALIASES = {
    "alpha_spending": "alpha-spending",
    "alphaspending": "alpha-spending",
    "lord++": "lord",
    "gai": "gai++",
    "gaipp": "gai++",
}

# origin each procedure requires for its gamma sequence
_GAMMA_ORIGIN = {
    "alpha-spending": 1,
    "gai++": 1,
    "lord": 1,
    "saffron": 1,
    "addis": 0,
}


def canonical_name(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in PROCEDURES:
        raise ValueError(f"unknown procedure {name!r}; choose from {', '.join(PROCEDURES)}")
    return key


def _resolve_gamma(name: str, gamma, origin: int) -> GammaSequence | None:
    if gamma is None:
        return None
    if isinstance(gamma, str):
        return parse_spec(gamma, origin=origin)
    if isinstance(gamma, GammaSequence):
        if gamma.origin != origin:
            raise ValueError(
                f"{name} requires a gamma sequence with origin {origin}, "
                f"got origin {gamma.origin} (use .reindexed({origin}))"
            )
        return gamma
    raise TypeError(f"gamma must be a config string or GammaSequence, got {type(gamma)!r}")


def make_procedure(name: str, config: ProcedureConfig | None = None,
                   track_history: bool = True, **overrides) -> DecisionEngine:
    """Build a ready engine at t=1 for one of the named procedures.

    Either pass a ProcedureConfig or keyword overrides (alpha, w0, lambda_,
    eta, gamma).  Unset knobs take the procedure's defaults: w0 = alpha/10
    for lord, alpha/2 for the wealth rules; lambda = 0.5 (saffron) or 0.25
    with eta = 0.5 (addis); gamma = the log-family default for
    alpha-spending/lord/gai++ and the 1.6 power law for saffron/addis
    (mounted at origin 0 for addis).
    """
    key = canonical_name(name)
    if config is None:
        config = ProcedureConfig(**overrides)
    elif overrides:
        raise TypeError("pass either a ProcedureConfig or keyword overrides, not both")

    alpha = config.alpha
    if key == "uncorrected":
        return Uncorrected(alpha, track_history=track_history)

    gamma = _resolve_gamma(key, config.gamma, _GAMMA_ORIGIN[key])
    if key == "alpha-spending":
        return AlphaSpending(alpha, gamma=gamma, track_history=track_history)
    if key == "gai++":
        return GaiPlusPlus(alpha, w0=config.w0, gamma=gamma, track_history=track_history)
    if key == "lord":
        return LordPlusPlus(alpha, w0=config.w0, gamma=gamma, track_history=track_history)
    if key == "saffron":
        lam = 0.5 if config.lambda_ is None else config.lambda_
        return Saffron(alpha, w0=config.w0, lam=lam, gamma=gamma, track_history=track_history)
    if key == "addis":
        lam = 0.25 if config.lambda_ is None else config.lambda_
        eta = 0.5 if config.eta is None else config.eta
        return Addis(alpha, w0=config.w0, lam=lam, eta=eta, gamma=gamma,
                     track_history=track_history)
    raise AssertionError(key)  # pragma: no cover


def engine_from_config(cfg: dict, track_history: bool = True) -> DecisionEngine:
    """Rebuild an engine from a config_dict() payload (snapshot restore)."""
    from . import gamma as gamma_mod

    key = canonical_name(cfg["procedure"])
    gm = cfg.get("gamma")
    seq = gamma_mod.from_descriptor(gm) if gm is not None else None
    config = ProcedureConfig(
        alpha=cfg["alpha"],
        w0=cfg.get("w0"),
        lambda_=cfg.get("lambda"),
        eta=cfg.get("eta"),
        gamma=seq,
    )
    return make_procedure(key, config, track_history=track_history)
