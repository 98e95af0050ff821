"""Information-leakage estimates for a four-source transmitter.

Two leakage channels are quantified.  Multi-photon pulses hand an
eavesdropper the bit value with probability 1/2^n per n-photon pulse that
survives basis sifting, giving the worst-case mutual information
I(A:E) = sum_{n>=2} p_n / 2^n.  Separately, if the four polarization
sources show distinguishable intensity-fluctuation distributions, their
overlap correlation R maps to a side-channel leakage I'(A:E) that vanishes
only for identical distributions.

Count distributions are modeled as Gaussians truncated at zero: the
density is kept un-renormalized on the positive axis and the mass at or
below zero is reported separately as the probability of no detection.
Overlap integrals run over the positive axis only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .fileio import write_json_atomic

MIN_GRID_POINTS = 2048
_SPAN_SIGMAS = 6.0


def _check_mu(mu: float) -> float:
    mu = float(mu)
    if not (math.isfinite(mu) and mu >= 0.0):
        raise ValueError(f"mean photon number must be >= 0, got {mu!r}")
    return mu


def info_leakage(mu: float) -> float:
    """Worst-case multi-photon leakage I(A:E) = sum_{n>=2} p_n / 2^n.

    Closed form exp(-mu) * (exp(mu/2) - 1 - mu/2); the expm1 form keeps
    precision in the small-mu limit (~ mu^2 / 8).
    """
    mu = _check_mu(mu)
    return math.exp(-mu) * (math.expm1(mu / 2.0) - mu / 2.0)


def leakage_difference(mu_rigorous: float, mu_single: float) -> float:
    """Signed leakage error from using the single-detector mu estimate.

    Positive when the single-detector method underestimates mu, because
    the leakage is monotone increasing in mu.
    """
    return info_leakage(_check_mu(mu_rigorous)) - info_leakage(_check_mu(mu_single))


@dataclass(frozen=True)
class FitPoint:
    """One fluctuation measurement: mu, sample spread, and fit residual."""

    mu: float
    sigma: float
    residual: float


@dataclass(frozen=True)
class FluctuationFit:
    """Least-squares line sigma(mu) = slope * mu + intercept through the data."""

    slope: float
    intercept: float
    points: tuple[FitPoint, ...]
    slope_se: float
    intercept_se: float

    def sigma(self, mu: float) -> float:
        return self.slope * mu + self.intercept

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_se": self.slope_se,
            "intercept_se": self.intercept_se,
            "points": [
                {"mu": p.mu, "sigma": p.sigma, "residual": p.residual} for p in self.points
            ],
        }


def fit_fluctuation(series_per_mu: Mapping[float, Sequence[float]]) -> FluctuationFit:
    """Fit the linear fluctuation model to per-mu count series.

    The sample standard deviation of each series is regressed on mu; the
    per-point residuals are the deviations from the fitted line.  Needs at
    least two distinct mu values, each with a series of length >= 2.
    """
    if len(series_per_mu) < 2:
        raise ValueError("need series for at least two distinct mu values")
    mus = []
    sigmas = []
    for mu in sorted(series_per_mu):
        series = np.asarray(series_per_mu[mu], dtype=np.float64)
        if series.size < 2:
            raise ValueError(f"series for mu={mu} has fewer than 2 entries")
        mus.append(float(mu))
        sigmas.append(float(series.std(ddof=1)))
    x = np.array(mus)
    y = np.array(sigmas)
    design = np.column_stack([x, np.ones_like(x)])
    coeffs, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    predicted = slope * x + intercept
    residuals = y - predicted
    dof = len(x) - 2
    if dof > 0:
        variance = float(residuals @ residuals) / dof
        covariance = variance * np.linalg.inv(design.T @ design)
        slope_se = math.sqrt(covariance[0, 0])
        intercept_se = math.sqrt(covariance[1, 1])
    else:
        slope_se = float("nan")
        intercept_se = float("nan")
    points = tuple(
        FitPoint(mu=m, sigma=s, residual=r) for m, s, r in zip(mus, sigmas, residuals)
    )
    return FluctuationFit(
        slope=slope, intercept=intercept, points=points, slope_se=slope_se, intercept_se=intercept_se
    )


def _normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class SourceDistribution:
    """Zero-truncated Gaussian count distribution of one source.

    ``density`` is the untruncated normal pdf sampled on ``grid`` (which
    starts at zero), and ``truncated_mass`` is the probability weight at or
    below zero; together they account for all the probability.
    """

    grid: np.ndarray
    density: np.ndarray
    mean: float
    sigma: float
    truncated_mass: float

    _NORMALIZATION_TOL = 1e-9

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        density = np.asarray(self.density, dtype=np.float64)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", density)
        if grid.ndim != 1 or grid.size < 2 or grid.shape != density.shape:
            raise ValueError("grid and density must be matching 1-D arrays")
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must start at 0 and increase strictly")
        if np.any(density < 0):
            raise ValueError("density must be non-negative")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError(f"sigma must be > 0, got {self.sigma!r}")
        expected_mass = _normal_cdf(-self.mean / self.sigma)
        if abs(self.truncated_mass - expected_mass) > 1e-12:
            raise ValueError("truncated_mass inconsistent with mean and sigma")
        on_grid = (
            _normal_cdf((grid[-1] - self.mean) / self.sigma)
            - _normal_cdf((grid[0] - self.mean) / self.sigma)
        )
        if abs(on_grid + self.truncated_mass - 1.0) > self._NORMALIZATION_TOL:
            raise ValueError("grid span too short: density plus truncated mass must reach 1")

    def density_on(self, x: np.ndarray) -> np.ndarray:
        """Exact pdf values on an arbitrary positive grid (no interpolation)."""
        x = np.asarray(x, dtype=np.float64)
        z = (x - self.mean) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))


def gaussian_distribution(
    mean: float, sigma: float, grid_points: int = MIN_GRID_POINTS
) -> SourceDistribution:
    """Truncated Gaussian on a uniform grid spanning [0, mean + 6 sigma]."""
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    if not (math.isfinite(mean) and mean >= 0.0):
        raise ValueError(f"mean must be >= 0, got {mean!r}")
    if grid_points < MIN_GRID_POINTS:
        raise ValueError(f"grid_points must be >= {MIN_GRID_POINTS}, got {grid_points}")
    grid = np.linspace(0.0, mean + _SPAN_SIGMAS * sigma, grid_points)
    z = (grid - mean) / sigma
    density = np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
    return SourceDistribution(
        grid=grid,
        density=density,
        mean=float(mean),
        sigma=float(sigma),
        truncated_mass=_normal_cdf(-mean / sigma),
    )


def source_distribution_at(
    fit: FluctuationFit, mu: float, grid_points: int = MIN_GRID_POINTS
) -> SourceDistribution:
    """Count distribution the fitted fluctuation model predicts at ``mu``."""
    sigma = fit.sigma(mu)
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"fitted sigma at mu={mu} is not positive: {sigma!r}")
    return gaussian_distribution(mu, sigma, grid_points=grid_points)


def cross_correlation(d_i: SourceDistribution, d_j: SourceDistribution) -> float:
    """Normalized overlap R of two count distributions on the positive axis.

    R = integral(f_i f_j) / sqrt(integral(f_i^2) integral(f_j^2)), evaluated
    by trapezoidal quadrature; distributions on different grids are
    re-evaluated analytically on a shared grid first.  R = 1 exactly when
    the distributions coincide.
    """
    same_grid = d_i.grid.shape == d_j.grid.shape and np.array_equal(d_i.grid, d_j.grid)
    if same_grid:
        x = d_i.grid
        fi, fj = d_i.density, d_j.density
    else:
        upper = max(d_i.grid[-1], d_j.grid[-1])
        x = np.linspace(0.0, upper, max(d_i.grid.size, d_j.grid.size))
        fi = d_i.density_on(x)
        fj = d_j.density_on(x)
    overlap = float(np.trapezoid(fi * fj, x))
    norm_i = float(np.trapezoid(fi * fi, x))
    norm_j = float(np.trapezoid(fj * fj, x))
    if norm_i <= 0.0 or norm_j <= 0.0:
        raise ValueError("zero-norm density; cannot normalize the overlap")
    return overlap / math.sqrt(norm_i * norm_j)


def pairwise_leakage(correlation: float) -> float:
    """Side-channel leakage I'(A:E) of one source pair with overlap R.

    I' = 1 + 2 * (R/4) * log2(R/4); the factor 2 counts both orderings of
    the pair.  Perfectly identical sources (R = 1) leak nothing, and the
    R -> 0 limit gives the full bit.
    """
    if not (math.isfinite(correlation) and 0.0 <= correlation <= 1.0):
        raise ValueError(f"correlation must be in [0, 1], got {correlation!r}")
    if correlation == 0.0:
        return 1.0
    q = correlation / 4.0
    return 1.0 + 2.0 * q * math.log2(q)


@dataclass(frozen=True)
class LeakageReport:
    """Overlap and leakage of one ordered-label source pair."""

    source_i: str
    source_j: str
    correlation: float
    info_leak: float

    @property
    def pair(self) -> str:
        return f"{self.source_i}&{self.source_j}"


def report_for_pair(
    label_i: str, label_j: str, d_i: SourceDistribution, d_j: SourceDistribution
) -> LeakageReport:
    correlation = cross_correlation(d_i, d_j)
    # Quadrature round-off can land a hair above 1 for identical inputs.
    correlation = min(correlation, 1.0)
    return LeakageReport(
        source_i=label_i,
        source_j=label_j,
        correlation=correlation,
        info_leak=pairwise_leakage(correlation),
    )


def pairwise_reports(distributions: Mapping[str, SourceDistribution]) -> list[LeakageReport]:
    """Leakage reports for every unordered label pair, labels sorted."""
    labels = sorted(distributions)
    if len(labels) < 2:
        raise ValueError("need at least two sources for pairwise reports")
    reports = []
    for a_index, label_a in enumerate(labels):
        for label_b in labels[a_index + 1 :]:
            reports.append(
                report_for_pair(label_a, label_b, distributions[label_a], distributions[label_b])
            )
    return reports


def write_leakage_json(
    path: str | Path,
    reports: Sequence[LeakageReport] = (),
    mu: float | None = None,
    mu_single: float | None = None,
    mu_rigorous: float | None = None,
    meta: dict | None = None,
) -> None:
    """Leakage report file: pairwise entries plus optional scalar blocks."""
    payload: dict = {
        "pairs": [
            {"pair": r.pair, "R": r.correlation, "I_prime": r.info_leak} for r in reports
        ]
    }
    if mu is not None:
        payload["multi_photon"] = {"mu": mu, "I_AE": info_leakage(mu)}
    if mu_single is not None and mu_rigorous is not None:
        payload["estimate_gap"] = {
            "mu_I": mu_single,
            "mu_II": mu_rigorous,
            "delta_I": leakage_difference(mu_rigorous, mu_single),
        }
    if meta is not None:
        payload["meta"] = meta
    write_json_atomic(path, payload)
