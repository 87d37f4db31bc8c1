"""Driving-score arithmetic: route completion, infraction score, the per-km
infraction coefficient, the early-termination curve and the normalized score."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .worldsim.world import INFRACTION_TYPES, InfractionLedger

_TINY = float(np.nextafter(0.0, 1.0))
BASE_PENALTIES = {"CP": 0.5, "CV": 0.6, "CL": 0.65, "RL": 0.7, "SI": 0.7, "ST": 0.7, "YE": 0.8}


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class PenaltyTable:
    factors: dict = field(default_factory=lambda: dict(BASE_PENALTIES))
    alpha: float = 1.0

    def __post_init__(self):
        if set(self.factors) != set(INFRACTION_TYPES):
            raise MetricsError(f"penalty table must cover exactly {INFRACTION_TYPES}")
        if not all(0.0 < p < 1.0 for p in self.factors.values()):
            raise MetricsError("base penalty factors must lie in (0, 1)")
        if not 0.0 < self.alpha <= 1.0:
            raise MetricsError("alpha must lie in (0, 1]")

    def factor(self, kind: str) -> float:
        """Effective per-event multiplier ``alpha * p``."""
        return self.alpha * self.factors[kind]

    def log_factors(self) -> np.ndarray:
        return np.log([self.factor(k) for k in INFRACTION_TYPES])


DEFAULT_TABLE = PenaltyTable()


def _counts(ledger: InfractionLedger) -> np.ndarray:
    return np.array([ledger.counts.get(k, 0) for k in INFRACTION_TYPES], dtype=float)


def log_infraction_score(ledger: InfractionLedger, table: PenaltyTable = DEFAULT_TABLE) -> float:
    return float(_counts(ledger) @ table.log_factors())


def infraction_score(ledger: InfractionLedger, table: PenaltyTable = DEFAULT_TABLE) -> float:
    """IS: product of ``(alpha * p)`` over every recorded infraction."""
    return math.exp(log_infraction_score(ledger, table))


def log_infraction_coefficient(ledger: InfractionLedger, table: PenaltyTable = DEFAULT_TABLE) -> float:
    d = ledger.distance_traveled
    if not d > 0:
        raise MetricsError("infraction coefficient needs a positive distance traveled")
    return log_infraction_score(ledger, table) / d


def infraction_coefficient(ledger: InfractionLedger, table: PenaltyTable = DEFAULT_TABLE) -> float:
    """I: infraction score per kilometre, ``IS ** (1 / d)``. Clamped to the
    smallest positive double where it would underflow."""
    return max(math.exp(log_infraction_coefficient(ledger, table)), _TINY)


def expected_ds(x, I: float, L: float):
    """Expected DS when stopping at fraction ``x`` of an ``L`` km route."""
    if not 0.0 < I <= 1.0:
        raise MetricsError("I must lie in (0, 1]")
    if not L > 0:
        raise MetricsError("L must be positive")
    x = np.asarray(x, dtype=float)
    out = 100.0 * x * np.exp(x * L * math.log(I))
    return float(out) if out.ndim == 0 else out


def interior_threshold(L: float) -> float:
    """Largest I for which stopping early beats finishing: ``exp(-1 / L)``."""
    return math.exp(-1.0 / L)


def x_opt(I: float, L: float) -> tuple[float, float]:
    """Fraction maximising :func:`expected_ds` and the maximum itself."""
    if not 0.0 < I <= 1.0:
        raise MetricsError("I must lie in (0, 1]")
    if not L > 0:
        raise MetricsError("L must be positive")
    if I == 1.0:
        return 1.0, expected_ds(1.0, I, L)
    x = -1.0 / (L * math.log(I))
    if x >= 1.0:
        return 1.0, expected_ds(1.0, I, L)
    return x, -100.0 / (L * math.e * math.log(I))


def normalized_ds(x, I: float):
    """DS_hat = 100 * x * I."""
    if not 0.0 < I <= 1.0:
        raise MetricsError("I must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    out = 100.0 * x * I
    return float(out) if out.ndim == 0 else out


def early_termination_policy(distance_so_far: float, cutoff: float) -> bool:
    if not cutoff > 0:
        raise MetricsError("cutoff must be positive")
    return distance_so_far >= cutoff


@dataclass(frozen=True)
class RouteScore:
    route_id: str
    RC: float
    IS: float
    DS: float
    I: float
    DS_hat: float
    distance_km: float
    counts: dict


def score_route(ledger: InfractionLedger, table: PenaltyTable = DEFAULT_TABLE) -> RouteScore:
    """Scores for one ledger. A route with no distance traveled has I = 1."""
    x = ledger.route_fraction_completed
    rc = 100.0 * x
    is_ = infraction_score(ledger, table)
    i = infraction_coefficient(ledger, table) if ledger.distance_traveled > 0 else 1.0
    return RouteScore(ledger.route_id, rc, is_, rc * is_, i, rc * i,
                      ledger.distance_traveled, dict(ledger.counts))


def aggregate(routes) -> dict:
    """Per-route means of every score and per-km infraction rates."""
    routes = list(routes)
    if not routes:
        raise MetricsError("aggregate needs at least one route")
    out = {k: float(np.mean([getattr(r, k) for r in routes])) for k in ("RC", "IS", "DS", "I", "DS_hat")}
    km = sum(r.distance_km for r in routes)
    for k in INFRACTION_TYPES:
        total = sum(r.counts.get(k, 0) for r in routes)
        out[f"{k}_per_km"] = total / km if km > 0 else 0.0
    out["routes"] = len(routes)
    out["distance_km"] = km
    return out
