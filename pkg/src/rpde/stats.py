"""Ensemble statistics: moments, kernel density estimates, field comparison.

The PDF estimator is a Gaussian KDE with the Silverman rule bandwidth
1.06 * sigma_hat * n**(-1/5); the bandwidth is carried in the result so
downstream output can surface it. Distribution agreement is measured by
the two-sample Kolmogorov-Smirnov distance on the empirical CDFs directly
(no smoothing involved).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistributionError, UsageError


def ensemble_moments(samples) -> tuple[float, float]:
    """(mean, unbiased standard deviation) of a sample set."""
    s = np.asarray(samples, dtype=float)
    if s.size < 2:
        raise UsageError("need at least two samples for moments")
    return float(s.mean()), float(s.std(ddof=1))


@dataclass
class PdfEstimate:
    x: np.ndarray  # evaluation abscissae
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.x))


def silverman_bandwidth(samples: np.ndarray) -> float:
    n = samples.size
    return 1.06 * samples.std(ddof=1) * n ** (-0.2)


def kde_pdf(samples, x=None, n_points: int = 201) -> PdfEstimate:
    """Gaussian-kernel density estimate at `x` (default: mean +- 5 sigma)."""
    s = np.asarray(samples, dtype=float)
    if s.size < 30:
        raise UsageError("need at least 30 samples for a KDE")
    sd = s.std(ddof=1)
    if sd == 0.0:
        raise DegenerateDistributionError("zero sample variance: no density estimate")
    h = silverman_bandwidth(s)
    if x is None:
        x = np.linspace(s.mean() - 5.0 * sd, s.mean() + 5.0 * sd, n_points)
    else:
        x = np.asarray(x, dtype=float)
    z = (x[:, None] - s[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (s.size * h * np.sqrt(2.0 * np.pi))
    return PdfEstimate(x=x, density=density, bandwidth=h)


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic: max |F_a - F_b|."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise UsageError("need nonempty samples for a KS distance")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


@dataclass
class FieldStats:
    """Probe-wise ensemble summary, optionally with the raw samples."""

    coords: np.ndarray  # (n_probes, n_coords)
    mean: np.ndarray
    std: np.ndarray
    samples: np.ndarray | None = None  # (n_members, n_probes)

    @classmethod
    def from_samples(cls, coords, samples) -> "FieldStats":
        samples = np.asarray(samples, dtype=float)
        return cls(
            coords=np.atleast_2d(np.asarray(coords, dtype=float)),
            mean=samples.mean(axis=0),
            std=samples.std(axis=0, ddof=1),
            samples=samples,
        )


@dataclass
class FieldComparison:
    mean_rel_l2: float
    std_rel_l2: float
    max_abs_mean: float
    ks: np.ndarray | None  # per probe, when both sides carry samples

    @property
    def max_ks(self) -> float:
        return float(np.max(self.ks)) if self.ks is not None else float("nan")


def _rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.linalg.norm(b)
    if scale == 0.0:
        return 0.0 if np.linalg.norm(a) == 0.0 else float("inf")
    return float(np.linalg.norm(a - b) / scale)


def compare_fields(a: FieldStats, b: FieldStats) -> FieldComparison:
    """Error metrics of field `a` against reference `b` on shared probes."""
    if a.coords.shape != b.coords.shape or not np.allclose(a.coords, b.coords, atol=1e-12):
        raise UsageError("probe sets do not match")
    ks = None
    if a.samples is not None and b.samples is not None:
        ks = np.array(
            [ks_distance(a.samples[:, q], b.samples[:, q]) for q in range(a.coords.shape[0])]
        )
    return FieldComparison(
        mean_rel_l2=_rel_l2(a.mean, b.mean),
        std_rel_l2=_rel_l2(a.std, b.std),
        max_abs_mean=float(np.max(np.abs(a.mean - b.mean))),
        ks=ks,
    )
