"""Spending sequences {gamma_t}: non-negative, non-increasing, summing to one.

Every level-assignment procedure draws its schedule from one of these
sequences.  Three families are built in:

* ``lord-default`` -- gamma_t proportional to log(max(t,2)) / (t * exp(sqrt(log t)))
* ``power`` -- gamma_t proportional to 1/t**s for s > 1
* ``bounded`` -- gamma_t = 1/M for the first M indices, 0 afterwards

plus fully custom lists.  A sequence carries an explicit index ``origin``
(0 or 1): the discarding procedure indexes its sequence from 0, everything
else from 1, and conflating the two shifts every level by one position.
An optional ``horizon`` M truncates the sequence to its first M terms and
renormalizes over them ("bounded version" of a schedule).

Lookups outside the valid range return 0.0 (zero-extension), which is what
makes the shifted-index level formulas total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Terms cached eagerly per sequence; deeper indices fall back to the closed form.
PREFIX_TERMS = 10**6


def _power_raw(n: np.ndarray | float, s: float):
    return np.asarray(n, dtype=np.float64) ** (-s)


def _power_tail(a: float, s: float) -> float:
    # integral of x**-s from a to infinity
    return a ** (1.0 - s) / (s - 1.0)


def _lord_default_raw(n):
    n = np.asarray(n, dtype=np.float64)
    logn = np.log(n)
    return np.log(np.maximum(n, 2.0)) / (n * np.exp(np.sqrt(logn)))


def _lord_default_tail(a: float) -> float:
    # integral of log(x)/(x*exp(sqrt(log x))) from a to infinity, a >= 2:
    # substitute v = sqrt(log x) to get 2*exp(-v)*(v^3 + 3v^2 + 6v + 6).
    v = math.sqrt(math.log(a))
    return 2.0 * math.exp(-v) * (v**3 + 3.0 * v**2 + 6.0 * v + 6.0)


@dataclass(frozen=True)
class GammaSequence:
    """An immutable spending sequence, normalized to sum to one.

    ``at(t)`` returns gamma_t for absolute index t; indices before
    ``origin`` or beyond ``origin + horizon - 1`` return 0.  Positions are
    internal 1-based ranks n = t - origin + 1, so the same raw terms can be
    mounted at either origin.
    """

    kind: str
    origin: int
    normalization: float
    horizon: int | None = None
    s: float | None = None
    values: tuple[float, ...] | None = None
    _prefix: np.ndarray = field(repr=False, compare=False, default=None)

    def raw(self, n: int | np.ndarray):
        """Unnormalized term at 1-based position n (0 beyond a horizon)."""
        n_arr = np.asarray(n, dtype=np.float64)
        if self.kind == "bounded":
            out = np.ones_like(n_arr)
        elif self.kind == "power":
            out = _power_raw(n_arr, self.s)
        elif self.kind == "lord-default":
            out = _lord_default_raw(n_arr)
        elif self.kind == "custom":
            vals = np.asarray(self.values)
            idx = np.asarray(n, dtype=np.int64) - 1
            ok = (idx >= 0) & (idx < len(vals))
            out = np.where(ok, vals[np.clip(idx, 0, len(vals) - 1)], 0.0)
        else:  # pragma: no cover
            raise AssertionError(self.kind)
        if self.horizon is not None:
            out = np.where(n_arr <= self.horizon, out, 0.0)
        return out if np.ndim(n) else float(out)

    def at(self, t: int) -> float:
        """gamma_t at absolute index t, zero-extended outside the support."""
        pos = t - self.origin
        if pos < 0:
            return 0.0
        if pos < len(self._prefix):
            return float(self._prefix[pos])
        if self.horizon is not None and pos >= self.horizon:
            return 0.0
        return float(self.raw(pos + 1)) / self.normalization

    def at_array(self, t: np.ndarray) -> np.ndarray:
        """Vectorized ``at`` over an integer array of absolute indices."""
        t = np.asarray(t, dtype=np.int64)
        pos = t - self.origin
        out = np.zeros(pos.shape, dtype=np.float64)
        inside = (pos >= 0) & (pos < len(self._prefix))
        out[inside] = self._prefix[pos[inside]]
        deep = pos >= len(self._prefix)
        if self.horizon is not None:
            deep &= pos < self.horizon
        if np.any(deep):
            out[deep] = self.raw(pos[deep] + 1.0) / self.normalization
        return out

    def table(self, upto: int) -> np.ndarray:
        """Dense array [gamma(0), gamma(1), ..., gamma(upto)] of absolute indices."""
        return self.at_array(np.arange(upto + 1))

    def reindexed(self, origin: int) -> "GammaSequence":
        """Same terms mounted at a different first index."""
        if origin == self.origin:
            return self
        return GammaSequence(
            kind=self.kind,
            origin=origin,
            normalization=self.normalization,
            horizon=self.horizon,
            s=self.s,
            values=self.values,
            _prefix=self._prefix,
        )

    def descriptor(self) -> dict:
        """JSON-serializable constructor arguments (for snapshots)."""
        d = {"kind": self.kind, "origin": self.origin}
        if self.horizon is not None:
            d["horizon"] = self.horizon
        if self.s is not None:
            d["s"] = self.s
        if self.values is not None:
            d["values"] = list(self.values)
        return d


def _normalize_infinite(raw_fn, tail_fn) -> tuple[float, np.ndarray]:
    """Normalization constant via prefix summation plus a midpoint integral tail.

    The tail uses the integral test at the half-step, whose error is bounded
    by |f'(N)|/24 -- below 1e-14 at N = PREFIX_TERMS for both built-in
    families, so the constant is accurate beyond TAIL_TOLERANCE.
    """
    n = np.arange(1, PREFIX_TERMS + 1, dtype=np.float64)
    terms = raw_fn(n)
    total = float(np.sum(terms)) + tail_fn(PREFIX_TERMS + 0.5)
    return total, terms


_CACHE: dict[tuple, GammaSequence] = {}


def make_gamma(
    kind: str,
    *,
    s: float | None = None,
    horizon: int | None = None,
    origin: int = 1,
    values: Sequence[float] | None = None,
    normalize: bool = True,
) -> GammaSequence:
    """Construct a normalized spending sequence.

    kind:
        "lord-default", "power" (requires exponent ``s`` > 1),
        "bounded" (requires ``horizon`` M >= 1; terms are 1/M), or
        "custom" (requires ``values``, non-negative and non-increasing).
    horizon:
        truncate to the first ``horizon`` terms and renormalize over them.
    origin:
        absolute index of the first term (0 or 1).
    normalize:
        for custom lists only; if False the list must already sum to <= 1
        (within 1e-9) and is used as-is.
    """
    if origin not in (0, 1):
        raise ValueError(f"origin must be 0 or 1, got {origin}")
    if horizon is not None and horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")

    key = None
    if kind != "custom":
        key = (kind, s, horizon, origin)
        cached = _CACHE.get(key)
        if cached is not None:
            return cached

    if kind == "bounded":
        if horizon is None:
            raise ValueError("bounded sequence requires a horizon M")
        z = float(horizon)
        prefix = np.full(horizon, 1.0 / horizon)
    elif kind == "power":
        if s is None or s <= 1.0:
            raise ValueError(f"power-law exponent must exceed 1 (got {s}); the series would not sum")
        if horizon is not None:
            n = np.arange(1, horizon + 1, dtype=np.float64)
            terms = _power_raw(n, s)
            z = float(np.sum(terms))
            prefix = terms / z
        else:
            z, terms = _normalize_infinite(lambda n: _power_raw(n, s), lambda a: _power_tail(a, s))
            prefix = terms / z
    elif kind == "lord-default":
        if horizon is not None:
            n = np.arange(1, horizon + 1, dtype=np.float64)
            terms = _lord_default_raw(n)
            z = float(np.sum(terms))
            prefix = terms / z
        else:
            z, terms = _normalize_infinite(_lord_default_raw, _lord_default_tail)
            prefix = terms / z
    elif kind == "custom":
        if values is None:
            raise ValueError("custom sequence requires values")
        vals = np.asarray(list(values), dtype=np.float64)
        if horizon is not None:
            vals = vals[:horizon]
        if len(vals) == 0:
            raise ValueError("custom sequence is empty")
        if np.any(vals < 0):
            raise ValueError("custom sequence has negative terms")
        if np.any(np.diff(vals) > 1e-15):
            raise ValueError("custom sequence must be non-increasing")
        total = float(np.sum(vals))
        if normalize:
            if total <= 0:
                raise ValueError("custom sequence sums to zero; cannot normalize")
            z = total
        else:
            if total > 1.0 + 1e-9:
                raise ValueError(f"custom sequence sums to {total:.12g} > 1 without normalization")
            z = 1.0
        prefix = vals / z
        horizon = len(vals)
        values = tuple(float(v) for v in vals)
    else:
        raise ValueError(f"unknown gamma kind {kind!r}")

    seq = GammaSequence(
        kind=kind,
        origin=origin,
        normalization=z,
        horizon=horizon,
        s=s,
        values=values if kind == "custom" else None,
        _prefix=prefix,
    )
    if key is not None:
        _CACHE[key] = seq
    return seq


def gamma_at(seq: GammaSequence, k: int) -> float:
    """gamma_k with zero-extension below the origin and beyond the horizon."""
    return seq.at(k)


def from_descriptor(d: dict) -> GammaSequence:
    """Rebuild a sequence from ``GammaSequence.descriptor()`` output."""
    return make_gamma(
        d["kind"],
        s=d.get("s"),
        horizon=d.get("horizon"),
        origin=d.get("origin", 1),
        values=d.get("values"),
    )


def parse_spec(spec: str, *, origin: int = 1) -> GammaSequence:
    """Parse a config string into a sequence.

    Accepted forms: ``lord-default``, ``power:<s>``, ``bounded:<M>``,
    ``file:<path>`` (one decimal per line), each of the first two optionally
    followed by ``:<M>`` to truncate at horizon M, e.g. ``power:1.6:20``.
    """
    parts = spec.strip().split(":")
    head = parts[0]
    try:
        if head == "lord-default":
            horizon = int(parts[1]) if len(parts) > 1 else None
            return make_gamma("lord-default", horizon=horizon, origin=origin)
        if head == "power":
            if len(parts) < 2:
                raise ValueError("power spec needs an exponent, e.g. power:1.6")
            horizon = int(parts[2]) if len(parts) > 2 else None
            return make_gamma("power", s=float(parts[1]), horizon=horizon, origin=origin)
        if head == "bounded":
            if len(parts) < 2:
                raise ValueError("bounded spec needs a horizon, e.g. bounded:20")
            return make_gamma("bounded", horizon=int(parts[1]), origin=origin)
        if head == "file":
            path = spec[len("file:"):]
            with open(path, "r", encoding="utf-8") as fh:
                vals = [float(line) for line in fh if line.strip()]
            return make_gamma("custom", values=vals, origin=origin)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad gamma spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown gamma spec {spec!r}")


def spec_string(seq: GammaSequence) -> str | None:
    """Inverse of parse_spec for the built-in kinds (None for custom)."""
    if seq.kind == "bounded":
        return f"bounded:{seq.horizon}"
    if seq.kind == "power":
        return f"power:{seq.s:g}" + (f":{seq.horizon}" if seq.horizon is not None else "")
    if seq.kind == "lord-default":
        return "lord-default" + (f":{seq.horizon}" if seq.horizon is not None else "")
    return None
