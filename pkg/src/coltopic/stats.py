"""Multi-way ANOVA (main effects, Type-II sums of squares) and Tukey HSD.

The F upper tail comes from the regularized incomplete beta function; the
studentized-range upper tail is computed here by numerical quadrature of
its standard double-integral representation (outer integral over the scaled
chi variable, inner integral over the range of k standard normals), with
all tolerances surfaced in :class:`QuadratureSettings`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.special import betainc, ndtr


@dataclass(frozen=True)
class Observation:
    """One response value tagged with factor levels, e.g. backend=chatgpt, dataset=80393eng."""

    response: float
    factors: Mapping[str, str]

    def __post_init__(self) -> None:
        if not math.isfinite(self.response):
            raise ValueError(f"response must be finite, got {self.response}")
        if not self.factors:
            raise ValueError("an observation needs at least one factor")


@dataclass(frozen=True)
class FactorEffect:
    name: str
    ss: float
    df: int
    ms: float
    f: float
    p: float


@dataclass(frozen=True)
class AnovaResult:
    effects: tuple[FactorEffect, ...]
    residual_ss: float
    residual_df: int
    residual_ms: float
    total_ss: float
    warnings: tuple[str, ...] = ()

    def effect(self, name: str) -> FactorEffect:
        for eff in self.effects:
            if eff.name == name:
                return eff
        raise KeyError(name)


@dataclass(frozen=True)
class TukeyComparison:
    level_a: str
    level_b: str
    mean_diff: float
    q: float
    p: float
    significant: bool


@dataclass(frozen=True)
class TukeyResult:
    factor: str
    alpha: float
    k: int
    df: int
    ms_within: float
    comparisons: tuple[TukeyComparison, ...]
    warnings: tuple[str, ...] = ()


_DEGENERATE_TOL = 1e-12


def _check_factor_names(observations: Sequence[Observation]) -> frozenset[str]:
    names = frozenset(observations[0].factors)
    for obs in observations[1:]:
        if frozenset(obs.factors) != names:
            raise ValueError("all observations in one analysis must share the same factor names")
    return names


def _dummy_columns(observations: Sequence[Observation], factor: str) -> list[np.ndarray]:
    levels = sorted({obs.factors[factor] for obs in observations})
    if len(levels) < 2:
        raise ValueError(f"factor {factor!r} has a single level")
    return [
        np.array([1.0 if obs.factors[factor] == level else 0.0 for obs in observations])
        for level in levels[1:]
    ]


def _fit_rss(y: np.ndarray, columns: Sequence[np.ndarray]) -> tuple[float, int]:
    design = np.column_stack([np.ones(len(y)), *columns]) if columns else np.ones((len(y), 1))
    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - design @ beta
    return float(residual @ residual), int(rank)


def anova(observations: Sequence[Observation], factors: Sequence[str] | None = None) -> AnovaResult:
    """Main-effects-only ANOVA with Type-II sums of squares.

    Each factor's sum of squares is the increase in residual sum of squares
    when that factor is dropped from the model containing all other main
    effects, so unbalanced designs are handled. With zero residual variance
    a nonzero effect is reported as F = inf, p = 0 with a warning.
    """
    observations = list(observations)
    if len(observations) < 3:
        raise ValueError("anova needs at least 3 observations")
    names = _check_factor_names(observations)
    if factors is None:
        factors = sorted(names)
    else:
        factors = list(factors)
        unknown = [f for f in factors if f not in names]
        if unknown:
            raise ValueError(f"unknown factor(s) {unknown}; observations carry {sorted(names)}")
        if len(set(factors)) != len(factors):
            raise ValueError("duplicate factor in model")
    if not factors:
        raise ValueError("anova needs at least one factor")

    y = np.array([obs.response for obs in observations])
    columns = {factor: _dummy_columns(observations, factor) for factor in factors}
    full_cols = [col for factor in factors for col in columns[factor]]
    rss_full, rank_full = _fit_rss(y, full_cols)
    residual_df = len(observations) - rank_full
    if residual_df < 1:
        raise ValueError("model leaves no residual degrees of freedom")

    total_ss = float(np.sum((y - y.mean()) ** 2))
    scale = max(1.0, total_ss)
    degenerate = rss_full <= _DEGENERATE_TOL * scale
    residual_ms = rss_full / residual_df
    warnings: list[str] = []

    effects: list[FactorEffect] = []
    for factor in factors:
        reduced_cols = [col for other in factors if other != factor for col in columns[other]]
        rss_reduced, rank_reduced = _fit_rss(y, reduced_cols)
        ss = max(0.0, rss_reduced - rss_full)
        df = rank_full - rank_reduced
        if df == 0:
            warnings.append(f"factor {factor!r} is aliased with the rest of the model; no estimable effect")
            effects.append(FactorEffect(factor, 0.0, 0, 0.0, 0.0, 1.0))
            continue
        ms = ss / df
        if degenerate:
            if ss <= _DEGENERATE_TOL * scale:
                effects.append(FactorEffect(factor, ss, df, ms, 0.0, 1.0))
            else:
                warnings.append(
                    f"zero residual variance: p for factor {factor!r} reported as 0 (degenerate variance)"
                )
                effects.append(FactorEffect(factor, ss, df, ms, math.inf, 0.0))
            continue
        f_stat = ms / residual_ms
        effects.append(FactorEffect(factor, ss, df, ms, f_stat, f_upper_tail(f_stat, df, residual_df)))
    return AnovaResult(
        effects=tuple(effects),
        residual_ss=rss_full,
        residual_df=residual_df,
        residual_ms=residual_ms,
        total_ss=total_ss,
        warnings=tuple(warnings),
    )


def tukey_hsd(
    observations: Sequence[Observation],
    factor: str,
    alpha: float = 0.05,
    model_factors: Sequence[str] | None = None,
) -> TukeyResult:
    """All-pairs Tukey HSD over the levels of one factor.

    The within-group mean square and residual degrees of freedom come from
    the main-effects ANOVA over ``model_factors`` (all observed factors by
    default), so post-hoc tests on a multi-factor design use the full
    model's residual. Adjusted p-values come from the studentized-range
    distribution with k = level count.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    observations = list(observations)
    result = anova(observations, model_factors)
    if factor not in {eff.name for eff in result.effects}:
        raise ValueError(f"factor {factor!r} is not in the fitted model")
    ms_within = result.residual_ms
    df = result.residual_df
    scale = max(1.0, result.total_ss)
    degenerate = result.residual_ss <= _DEGENERATE_TOL * scale

    groups: dict[str, list[float]] = {}
    for obs in observations:
        groups.setdefault(obs.factors[factor], []).append(obs.response)
    levels = sorted(groups)
    k = len(levels)
    warnings = list(result.warnings)
    comparisons: list[TukeyComparison] = []
    for level_a, level_b in ((a, b) for i, a in enumerate(levels) for b in levels[i + 1 :]):
        mean_a = sum(groups[level_a]) / len(groups[level_a])
        mean_b = sum(groups[level_b]) / len(groups[level_b])
        diff = mean_a - mean_b
        if degenerate:
            if abs(diff) <= math.sqrt(_DEGENERATE_TOL * scale):
                q, p = 0.0, 1.0
            else:
                q, p = math.inf, 0.0
                message = "zero residual variance: Tukey p-values for nonzero differences reported as 0"
                if message not in warnings:
                    warnings.append(message)
        else:
            se = math.sqrt(ms_within / 2.0 * (1.0 / len(groups[level_a]) + 1.0 / len(groups[level_b])))
            q = abs(diff) / se
            p = studentized_range_upper_tail(q, k, df)
        comparisons.append(
            TukeyComparison(
                level_a=level_a,
                level_b=level_b,
                mean_diff=diff,
                q=q,
                p=p,
                significant=p < alpha,
            )
        )
    return TukeyResult(
        factor=factor,
        alpha=alpha,
        k=k,
        df=df,
        ms_within=ms_within,
        comparisons=tuple(comparisons),
        warnings=tuple(warnings),
    )


def f_upper_tail(x: float, d1: float, d2: float) -> float:
    """P(F > x) for an F-distributed statistic on (d1, d2) degrees of freedom.

    Computed as the regularized incomplete beta function
    I_{d2/(d2 + d1 x)}(d2/2, d1/2); absolute error below 1e-10.
    """
    if not (math.isfinite(d1) and math.isfinite(d2)) or d1 < 1 or d2 < 1:
        raise ValueError(f"degrees of freedom must be finite and >= 1, got ({d1}, {d2})")
    if math.isnan(x) or x < 0:
        raise ValueError(f"statistic must be >= 0, got {x}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x)))


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances for the studentized-range double integral.

    ``inner_nodes`` Gauss-Legendre nodes cover the inner normal-range
    integral on [-inner_span, inner_span]; the outer integral over the
    scaled chi variable runs adaptively to ``outer_epsabs``. A result whose
    estimated error exceeds ``max_error`` raises instead of being clamped.
    """

    inner_nodes: int = 160
    inner_span: float = 8.5
    outer_epsabs: float = 1e-11
    outer_epsrel: float = 1e-11
    outer_limit: int = 200
    max_error: float = 1e-7


DEFAULT_QUADRATURE = QuadratureSettings()


@lru_cache(maxsize=8)
def _inner_grid(nodes: int, span: float) -> tuple[np.ndarray, np.ndarray]:
    z, w = leggauss(nodes)
    return z * span, w * span


_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _range_cdf(r: float, k: int, z: np.ndarray, w: np.ndarray) -> float:
    """P(range of k iid standard normals <= r)."""
    if r <= 0:
        return 0.0
    phi = np.exp(-0.5 * z * z) / _SQRT_2PI
    inner = (ndtr(z + r) - ndtr(z)) ** (k - 1)
    return float(k * np.sum(w * phi * inner))


def studentized_range_upper_tail(
    q: float, k: int, df: float, settings: QuadratureSettings = DEFAULT_QUADRATURE
) -> float:
    """P(Q > q) for the studentized range of k groups on df error degrees of freedom.

    Evaluates 1 minus the double integral of the scaled-chi density times
    the conditional normal-range CDF. Raises if the adaptive outer
    quadrature cannot reach ``settings.max_error``.
    """
    if k < 2:
        raise ValueError(f"group count must be >= 2, got {k}")
    if not math.isfinite(df) or df < 1:
        raise ValueError(f"degrees of freedom must be finite and >= 1, got {df}")
    if math.isnan(q) or q < 0:
        raise ValueError(f"statistic must be >= 0, got {q}")
    if q == 0:
        return 1.0
    if math.isinf(q):
        return 0.0

    z, w = _inner_grid(settings.inner_nodes, settings.inner_span)
    log_norm = (df / 2.0) * math.log(df) - math.lgamma(df / 2.0) - (df / 2.0 - 1.0) * math.log(2.0)

    def integrand(u: float) -> float:
        if u <= 0:
            return 0.0
        log_density = log_norm + (df - 1.0) * math.log(u) - df * u * u / 2.0
        if log_density < -700.0:
            return 0.0
        return math.exp(log_density) * _range_cdf(q * u, k, z, w)

    upper = max(4.0, 1.0 + 9.0 / math.sqrt(df))
    value, abserr = quad(
        integrand,
        0.0,
        upper,
        epsabs=settings.outer_epsabs,
        epsrel=settings.outer_epsrel,
        limit=settings.outer_limit,
        points=[min(1.0, upper / 2.0)],
    )
    if abserr > settings.max_error:
        raise ValueError(
            f"studentized-range quadrature did not converge (estimated error {abserr:.3e} "
            f"> {settings.max_error:.3e}) for q={q}, k={k}, df={df}"
        )
    return min(1.0, max(0.0, 1.0 - value))
