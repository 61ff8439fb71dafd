"""Spectral densities for the generalized Langevin dynamics.

The fractional model (velocity forced by fractional Gaussian noise with
Hurst parameter H = d + 1/2) has the spectral filter

    ghat(w) = |w|^d / (c0 + c1 |w|^beta + c2 |w|^(2 beta))^(1/2),  beta = 1 + 2d,

whose denominator coefficients follow from expanding the squared modulus of
the frequency-domain resolvent:

    c0 = drag^2 Gamma(2H+1)^2,
    c1 = 2 drag mass Gamma(2H+1) cos(H pi),   (negative for H in (1/2, 1))
    c2 = mass^2.

The quadratic c0 + c1 x + c2 x^2 stays strictly positive because its
discriminant equals -4 drag^2 mass^2 Gamma(2H+1)^2 sin^2(H pi) < 0.

Density normalization.  A SpectralDensity here is the measure-convention
density: rho(t) = integral e^{i t w} rho_hat(w) dw, so the total mass equals
the velocity variance.  For mass > 0 that variance is kBT/mass
(equipartition), which pins the multiplicative constant of the fractional
density in closed form:

    const = kBT drag Gamma(2H+1) sin(H pi) / pi,

since integral ghat^2 dw = pi / (drag Gamma(2H+1) mass sin(H pi)).  With
mass = 0 the filter is not integrable and the constant is set to 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from .kernels import GleParams, kernel_fourier
from .util import NumericalError, ValidationError, full_precision, panel_nodes


@dataclass(frozen=True)
class FgleParams:
    """Fractional-model parameters and derived spectral-filter coefficients."""

    d: float
    drag: float
    mass: float
    kbt: float
    c0: float
    c1: float
    c2: float

    def __post_init__(self):
        if not 0.0 < self.d < 0.5:
            raise ValidationError(f"fractional parameter d must be in (0, 1/2), got {self.d}")
        if not self.drag > 0 or not self.kbt > 0 or self.mass < 0:
            raise ValidationError("need drag > 0, kBT > 0, mass >= 0")
        if not self.c0 > 0 or self.c2 < 0:
            raise ValidationError("filter coefficients need c0 > 0 and c2 >= 0")
        # strict positivity of c0 + c1 x + c2 x^2 on x >= 0
        if self.c2 > 0:
            if self.c1 < 0 and self.c1**2 >= 4.0 * self.c0 * self.c2:
                raise ValidationError("spectral filter denominator is not strictly positive")
        elif self.c1 < 0:
            raise ValidationError("spectral filter denominator is not strictly positive")

    @property
    def hurst(self):
        return self.d + 0.5

    @property
    def beta(self):
        return 1.0 + 2.0 * self.d


def fgle_params_from_physical(drag, mass, kbt, hurst):
    """Filter coefficients from the physical parameters (see module docstring)."""
    if not 0.5 < hurst < 1.0:
        raise ValidationError(f"Hurst parameter must be in (1/2, 1), got {hurst}")
    a = gamma_fn(2.0 * hurst + 1.0)
    return FgleParams(
        d=hurst - 0.5,
        drag=float(drag),
        mass=float(mass),
        kbt=float(kbt),
        c0=float(drag**2 * a**2),
        c1=float(2.0 * drag * mass * a * np.cos(hurst * np.pi)),
        c2=float(mass**2),
    )


def fgle_filter_ghat(params, omega):
    """Spectral filter |w|^d / sqrt(c0 + c1 |w|^beta + c2 |w|^(2 beta))."""
    w = np.abs(np.asarray(omega, dtype=float))
    if np.any(w == 0):
        raise ValidationError("spectral filter is not defined at omega = 0")
    x = w**params.beta
    return (w**params.d / np.sqrt(params.c0 + params.c1 * x + params.c2 * x**2))[()]


def fgle_density_constant(params):
    """Multiplier making the density mass equal kBT/mass (1 when mass = 0)."""
    if params.mass == 0:
        return 1.0
    hurst = params.hurst
    return params.kbt * params.drag * gamma_fn(2 * hurst + 1) * np.sin(hurst * np.pi) / np.pi


@dataclass(frozen=True)
class SpectralDensity:
    """Even nonnegative velocity spectral density with origin power law."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    origin_exponent: float  # rho_hat(w) ~ C |w|^origin_exponent near 0
    support: float = np.inf  # density vanishes for |w| > support
    label: str = ""

    def __call__(self, omega):
        w = np.abs(np.asarray(omega, dtype=float))
        return self.evaluate(w)


def fgle_velocity_density(params):
    """Equipartition-normalized velocity density of the fractional model."""
    const = fgle_density_constant(params)
    d, beta = params.d, params.beta
    c0, c1, c2 = params.c0, params.c1, params.c2

    def _eval(w):
        w = np.abs(np.asarray(w, dtype=float))
        x = np.where(w > 0, w, 1.0) ** beta
        out = const * np.where(w > 0, w, 1.0) ** (2 * d) / (c0 + c1 * x + c2 * x**2)
        return np.where(w > 0, out, 0.0)

    return SpectralDensity(evaluate=_eval, origin_exponent=2 * d, label="fgle")


def ou_velocity_density(mass, drag, kbt):
    """Lorentzian velocity density of the classical Langevin model.

    Normalized so the total mass is the stationary variance kBT/mass.
    """
    if not mass > 0 or not drag > 0 or not kbt > 0:
        raise ValidationError("ou_velocity_density needs positive mass, drag and kBT")

    def _eval(w):
        w = np.asarray(w, dtype=float)
        return kbt * drag / (np.pi * (drag**2 + (mass * w) ** 2))

    return SpectralDensity(evaluate=_eval, origin_exponent=0.0, label="ou")


def gle_velocity_spectrum(params: GleParams, omega):
    """kBT drag K(w) / |i mass w + drag K(w)|^2 with the real kernel transform."""
    w = np.asarray(omega, dtype=float)
    k = np.asarray(kernel_fourier(params.kernel, w), dtype=float)
    return (params.kbt * params.drag * k / ((params.mass * w) ** 2 + (params.drag * k) ** 2))[()]


def resolvent_fourier(params: GleParams, omega):
    """Frequency-domain resolvent 1 / (i mass w + drag K(w))."""
    w = np.asarray(omega, dtype=float)
    k = np.asarray(kernel_fourier(params.kernel, w), dtype=float)
    return (1.0 / (1j * params.mass * w + params.drag * k))[()]


class FoldedSpectrum(NamedTuple):
    values: np.ndarray
    tail_bound: float
    fold_count: int


def _increments_gain(omega):
    """|(1 - e^{-iw}) / (iw)|^2 with the removable singularity filled in."""
    w = np.asarray(omega, dtype=float)
    small = np.abs(w) < 1e-4
    ws = np.where(small, 1.0, w)
    exact = (2.0 - 2.0 * np.cos(ws)) / ws**2
    series = 1.0 - w**2 / 12.0 + w**4 / 360.0
    return np.where(small, series, exact)


def _tail_envelope(density, cutoff):
    """Numeric bound M with rho_hat(x) <= M / x^2 for |x| >= cutoff."""
    if density.support < np.inf and cutoff >= density.support:
        return 0.0
    probe = np.geomspace(cutoff, max(cutoff * 1e4, 1e6), 64)
    vals = density(probe) * probe**2
    # w^2 rho may rise to a plateau (Lorentzian) but must not keep growing
    if vals[-1] > 1.5 * max(vals[vals.size // 2], 1e-300):
        raise ValidationError("density does not decay like 1/w^2; increment fold diverges")
    return float(vals.max())


def increment_spectrum(density, omega, fold_count=10_000):
    """Spectral density of unit-time position increments, by aliasing.

    Folds rho_hat(w + 2 pi k)/|w + 2 pi k|^2 over |k| <= fold_count and
    reports an analytic bound on the discarded tail (valid for densities
    decaying at least like 1/w^2).
    """
    if fold_count < 1:
        raise ValidationError("fold_count must be >= 1")
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(np.abs(w) > np.pi + 1e-12):
        raise ValidationError("increment spectrum is defined on [-pi, pi)")
    out = _increments_gain(w) * density(w)
    gain = 2.0 - 2.0 * np.cos(w)
    k = 2.0 * np.pi * np.arange(1, fold_count + 1)
    # chunk the fold to keep the (n_omega, fold_count) grid small
    step = max(1, int(4e6 / max(w.size, 1)))
    acc = np.zeros_like(w)
    for start in range(0, k.size, step):
        kk = k[start : start + step]
        for sign in (1.0, -1.0):
            shifted = w[:, None] + sign * kk
            acc += np.sum(density(shifted) / shifted**2, axis=1)
    out = out + gain * acc
    envelope = _tail_envelope(density, 2.0 * np.pi * fold_count - np.pi)
    x_min = 2.0 * np.pi * (fold_count + 0.5) - np.pi
    tail = float(np.max(gain)) * 2.0 * envelope / (6.0 * np.pi * x_min**3)
    values = out if np.ndim(omega) else out[0]
    return FoldedSpectrum(values=values, tail_bound=tail, fold_count=int(fold_count))


@dataclass(frozen=True)
class MsdBoundsResult:
    """Position-variance ratios E X^2(t) / t^(1-2d) at two split points."""

    t_grid: np.ndarray
    ratios: np.ndarray
    ratios_half_delta: np.ndarray
    delta: float
    max_split_sensitivity: float
    achieved_rtol: float


def position_variance(density, t, delta=1.0, rtol=1e-5):
    """E X^2(t) = integral |(e^{itw}-1)/(iw)|^2 rho_hat(w) dw by split quadrature.

    |w| <= delta is handled by the substitution s = t w with panels no wider
    than the cosine period; |w| > delta splits into a smooth part and an
    oscillatory part integrated with a cosine-weighted rule.
    """
    t = float(t)
    if t <= 0:
        raise ValidationError("time must be positive")
    # low-frequency region via s = t * w; geometric panels near 0 absorb
    # the |w|^{2d} cusp of the density
    s_max = t * delta
    head = min(np.pi, s_max)
    geo = np.geomspace(head * 2.0**-30, head, 31)
    if s_max > head:
        n_panels = int(np.ceil((s_max - head) / np.pi))
        linear = np.linspace(head, s_max, n_panels + 1)
        edges = np.concatenate([[0.0], geo[:-1], linear])
    else:
        edges = np.concatenate([[0.0], geo])

    def f_low(s):
        return _increments_gain(s) * density(s / t)

    nodes, weights = panel_nodes(edges, 10)
    low = t * float(np.dot(weights, f_low(nodes)))
    nodes2, weights2 = panel_nodes(edges, 14)
    low_check = t * float(np.dot(weights2, f_low(nodes2)))
    err = abs(low - low_check)
    low = low_check

    # high-frequency region
    upper = min(density.support, np.inf)
    high_smooth = 0.0
    high_osc = 0.0
    if upper > delta:
        if np.isinf(upper):
            envelope = _tail_envelope(density, delta)
            # choose cutoff so the neglected tail 4 M / (3 cutoff^3) is negligible
            target = max(rtol * max(low, 1e-300) * 0.1, 1e-300)
            cutoff = max(10.0 * delta, (4.0 * envelope / (3.0 * target)) ** (1.0 / 3.0))
            err += 4.0 * envelope / (3.0 * cutoff**3)
        else:
            cutoff = upper

        def f_high(w):
            return 2.0 * density(w) / w**2

        edges_h = np.geomspace(delta, cutoff, max(8, int(16 * np.log10(cutoff / delta))) + 1)
        nodes_h, weights_h = panel_nodes(edges_h, 12)
        high_smooth = float(np.dot(weights_h, f_high(nodes_h)))
        val, qerr = quad(f_high, delta, cutoff, weight="cos", wvar=t, limit=2000)
        high_osc = -val
        err += qerr

    total = 2.0 * (low + high_smooth + high_osc)
    achieved = err / max(abs(total), 1e-300)
    if achieved > rtol:
        raise NumericalError(
            f"position_variance quadrature reached rtol {achieved:.2e} > requested {rtol:.2e}"
        )
    return total, achieved


def verify_msd_bounds(density, d, t_grid, delta=1.0, rtol=1e-5):
    """Ratios E X^2(t) / t^(1-2d) on a time grid, re-run at delta/2.

    The caller asserts the ratios are bounded and approximately flat for
    large t; the half-delta rerun documents insensitivity to the split.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise ValidationError("t_grid must be positive and increasing")
    worst = 0.0
    ratios = np.empty_like(t_grid)
    ratios_half = np.empty_like(t_grid)
    for i, t in enumerate(t_grid):
        v1, a1 = position_variance(density, t, delta=delta, rtol=rtol)
        v2, a2 = position_variance(density, t, delta=delta / 2.0, rtol=rtol)
        scale = t ** (1.0 - 2.0 * d)
        ratios[i] = v1 / scale
        ratios_half[i] = v2 / scale
        worst = max(worst, a1, a2)
    sens = float(np.max(np.abs(ratios - ratios_half) / np.abs(ratios)))
    return MsdBoundsResult(
        t_grid=t_grid,
        ratios=ratios,
        ratios_half_delta=ratios_half,
        delta=float(delta),
        max_split_sensitivity=sens,
        achieved_rtol=worst,
    )


def density_to_csv(density, omega, path):
    omega = np.asarray(omega, dtype=float)
    vals = density(omega)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("omega,rho\n")
        for w, r in zip(omega, vals):
            fh.write(f"{full_precision(w)},{full_precision(r)}\n")
