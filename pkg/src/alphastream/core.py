"""Decision-engine contract and the record types shared by every procedure.

An engine is a strictly sequential state machine over 1-based time steps.
The protocol is level-before-observation, decision-after:

    alpha = engine.next_level()          # registers the level for step t
    decision = engine.feed(record)       # observes p_t, decides, advances

``next_level`` must be answerable from past decisions alone -- it never sees
the upcoming p-value -- so levels are pre-registered and the same contract
extends to asynchronous use.  Any interleaving other than strict
(level, feed)* raises ProtocolError.  Ties p == alpha_t count as rejections
(the comparison is non-strict), and p-values of exactly 0 or 1 are legal.
"""

from __future__ import annotations

from dataclasses import dataclass


class ProtocolError(RuntimeError):
    """Level/feed alternation violated (e.g. two level requests in a row)."""


class SequencingError(ValueError):
    """Stream indices out of order or non-contiguous."""


@dataclass(frozen=True)
class PValueRecord:
    """One incoming hypothesis: 1-based index t, p-value, optional metadata."""

    index: int
    p: float
    label: str | None = None
    batch: int | None = None

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"index must be >= 1, got {self.index}")
        if not 0.0 <= self.p <= 1.0:  # also rejects NaN
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.batch is not None and self.batch < 0:
            raise ValueError(f"batch must be non-negative, got {self.batch}")


@dataclass(frozen=True)
class DecisionRecord:
    """The engine's verdict for one step: assigned level and decision."""

    index: int
    alpha: float
    rejected: bool


@dataclass(frozen=True)
class StreamSummary:
    """Progress counters: steps processed and when rejections happened."""

    t: int
    rejections: int
    rejection_times: tuple[int, ...]


@dataclass
class ProcedureConfig:
    """Target level plus procedure-specific knobs.

    w0 is the initial wealth (None picks the procedure default) and must
    satisfy 0 <= w0 <= alpha.  ``gamma`` is either a config string
    understood by gamma.parse_spec or a GammaSequence instance; lambda_ and
    eta are the candidate and discarding thresholds where applicable.
    """

    alpha: float = 0.05
    w0: float | None = None
    lambda_: float | None = None
    eta: float | None = None
    gamma: object | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.w0 is not None and not 0.0 <= self.w0 <= self.alpha:
            raise ValueError(f"w0 must satisfy 0 <= w0 <= alpha, got w0={self.w0}")


class DecisionEngine:
    """Base class implementing the (level, feed)* contract.

    Subclasses provide ``_level()`` (pure: the level for the current step)
    and ``_advance(p, rejected)`` (state update after a decision).
    """

    name = "?"

    def __init__(self):
        self._t = 1
        self._pending: float | None = None
        self._rejection_times: list[int] = []

    # -- contract surface ---------------------------------------------------

    def next_level(self) -> float:
        """Register and return alpha_t for the upcoming step."""
        if self._pending is not None:
            raise ProtocolError(
                f"level for t={self._t} already outstanding; feed a p-value first"
            )
        alpha_t = self._level()
        self._pending = alpha_t
        return alpha_t

    def peek_level(self) -> float:
        """The level the engine would assign next, without registering it."""
        if self._pending is not None:
            return self._pending
        return self._level()

    def feed(self, rec: PValueRecord) -> DecisionRecord:
        """Observe p_t, decide via the non-strict rule p <= alpha_t, advance."""
        if self._pending is None:
            raise ProtocolError(
                f"no level outstanding at t={self._t}; call next_level() first"
            )
        if rec.index != self._t:
            raise SequencingError(
                f"expected index {self._t}, got {rec.index}"
            )
        if not 0.0 <= rec.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {rec.p}")
        alpha_t = self._pending
        rejected = rec.p <= alpha_t
        # subclasses see the pre-decision rejection history while advancing
        self._advance(rec.p, rejected)
        if rejected:
            self._rejection_times.append(self._t)
        self._pending = None
        dec = DecisionRecord(index=self._t, alpha=alpha_t, rejected=rejected)
        self._t += 1
        return dec

    def step(self, rec: PValueRecord) -> DecisionRecord:
        """Convenience: next_level() + feed() in one call."""
        self.next_level()
        return self.feed(rec)

    # -- introspection ------------------------------------------------------

    @property
    def t(self) -> int:
        """Index of the next step to be tested (1-based)."""
        return self._t

    @property
    def steps_done(self) -> int:
        return self._t - 1

    def summary(self) -> StreamSummary:
        return StreamSummary(
            t=self._t - 1,
            rejections=len(self._rejection_times),
            rejection_times=tuple(self._rejection_times),
        )

    def wealth(self) -> float:
        """Current alpha-wealth (0.0 for procedures with no wealth notion)."""
        return 0.0

    # -- persistence hooks (used by streamio) --------------------------------

    def state_dict(self) -> dict:
        """Serializable engine state; only legal between steps."""
        if self._pending is not None:
            raise ProtocolError("cannot snapshot with a level outstanding")
        return {
            "t": self._t,
            "rejection_times": list(self._rejection_times),
            **self._extra_state(),
        }

    def load_state(self, state: dict) -> None:
        self._t = int(state["t"])
        self._pending = None
        self._rejection_times = [int(x) for x in state["rejection_times"]]
        self._load_extra_state(state)

    # -- subclass hooks -----------------------------------------------------

    def _level(self) -> float:
        raise NotImplementedError

    def _advance(self, p: float, rejected: bool) -> None:
        raise NotImplementedError

    def _extra_state(self) -> dict:
        return {}

    def _load_extra_state(self, state: dict) -> None:
        pass
