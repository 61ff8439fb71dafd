"""Memory-kernel families, their transforms, and the GSER modulus map.

Three kernel families cover the fluids of interest: a Dirac kernel (purely
viscous, reduces the generalized Langevin dynamics to the classical case),
a Prony series sum of decaying exponentials (Maxwell fluids), and a power
law (polymer melts, fractional Gaussian forcing).

Transform conventions, fixed once here and used everywhere downstream:

* ``kernel_laplace`` is the one-sided transform integral_0^inf e^{-zt} K(t) dt.
* ``kernel_fourier`` is real and even with the normalization pinned by
  Dirac -> 1: Prony -> sum 2 c_n lam_n / (lam_n^2 + w^2) and power law ->
  Gamma(2H+1) sin(pi H) |w|^{1-2H}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc

from .util import ValidationError, full_precision


class MemoryKernel:
    """Base tag for the kernel variants."""


@dataclass(frozen=True)
class DiracKernel(MemoryKernel):
    """Instantaneous friction: the purely viscous (Newtonian) case."""


@dataclass(frozen=True)
class PronyKernel(MemoryKernel):
    """Finite sum of decaying exponentials sum_n c_n exp(-lam_n t)."""

    amplitudes: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        lam = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if c.size != lam.size or c.size == 0:
            raise ValidationError("prony kernel: amplitudes and rates must align")
        if np.any(c <= 0) or np.any(lam <= 0):
            raise ValidationError("prony kernel: amplitudes and rates must be positive")
        if np.unique(lam).size != lam.size:
            raise ValidationError("prony kernel: rates must be distinct")
        c.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "amplitudes", c)
        object.__setattr__(self, "rates", lam)


@dataclass(frozen=True)
class PowerLawKernel(MemoryKernel):
    """2H(2H-1) |t|^{2H-2} for Hurst parameter 1/2 < H < 1."""

    hurst: float

    def __post_init__(self):
        if not 0.5 < self.hurst < 1.0:
            raise ValidationError(f"power-law kernel needs 1/2 < H < 1, got {self.hurst}")


@dataclass(frozen=True)
class GleParams:
    """Physical parameters of the generalized Langevin model."""

    mass: float
    drag: float
    kbt: float
    kernel: MemoryKernel

    def __post_init__(self):
        if self.mass < 0:
            raise ValidationError("mass must be >= 0")
        if not self.drag > 0:
            raise ValidationError("drag must be positive")
        if not self.kbt > 0:
            raise ValidationError("kBT must be positive")


def kernel_eval(kernel, t):
    """Pointwise kernel value at t > 0 (Dirac has no pointwise value)."""
    t = np.asarray(t, dtype=float)
    if isinstance(kernel, DiracKernel):
        raise ValidationError("Dirac kernel has no pointwise values")
    if isinstance(kernel, PronyKernel):
        return np.squeeze(
            np.sum(kernel.amplitudes * np.exp(-np.outer(t, kernel.rates)), axis=-1)
        )[()]
    if isinstance(kernel, PowerLawKernel):
        if np.any(t <= 0):
            raise ValidationError("power-law kernel is singular at t <= 0")
        h2 = 2.0 * kernel.hurst
        return h2 * (h2 - 1.0) * np.abs(t) ** (h2 - 2.0)
    raise ValidationError(f"unknown kernel {kernel!r}")


def kernel_laplace(kernel, z):
    """One-sided Laplace transform at abscissa z > 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValidationError("Laplace abscissa must be positive")
    if isinstance(kernel, DiracKernel):
        return np.ones_like(z)[()]
    if isinstance(kernel, PronyKernel):
        return np.squeeze(
            np.sum(kernel.amplitudes / (z[..., None] + kernel.rates), axis=-1)
        )[()]
    if isinstance(kernel, PowerLawKernel):
        h2 = 2.0 * kernel.hurst
        return (gamma_fn(h2 + 1.0) * z ** (1.0 - h2))[()]
    raise ValidationError(f"unknown kernel {kernel!r}")


def kernel_fourier(kernel, omega):
    """Real even frequency-domain kernel (see module docstring for scale)."""
    w = np.asarray(omega, dtype=float)
    if isinstance(kernel, DiracKernel):
        return np.ones_like(w)[()]
    if isinstance(kernel, PronyKernel):
        c, lam = kernel.amplitudes, kernel.rates
        return np.squeeze(
            np.sum(2.0 * c * lam / (lam**2 + (w[..., None]) ** 2), axis=-1)
        )[()]
    if isinstance(kernel, PowerLawKernel):
        if np.any(w == 0):
            raise ValidationError("power-law kernel transform is singular at omega = 0")
        h2 = 2.0 * kernel.hurst
        return (gamma_fn(h2 + 1.0) * np.sin(np.pi * kernel.hurst) * np.abs(w) ** (1.0 - h2))[()]
    raise ValidationError(f"unknown kernel {kernel!r}")


@dataclass(frozen=True)
class DiffusivityClass:
    """Long-time behavior of the mean squared displacement."""

    kind: str  # subdiffusive | diffusive | superdiffusive
    sigma2: float | None = None


def classify_diffusivity(kernel):
    """Trichotomy from the z -> 0 limit of the Laplace-transformed kernel.

    Limit infinity means subdiffusive, a finite positive limit sigma^2 means
    diffusive, limit zero means superdiffusive.
    """
    if isinstance(kernel, DiracKernel):
        return DiffusivityClass("diffusive", 1.0)
    if isinstance(kernel, PronyKernel):
        sigma2 = float(np.sum(kernel.amplitudes / kernel.rates))
        return DiffusivityClass("diffusive", sigma2)
    if isinstance(kernel, PowerLawKernel):
        # z^{1-2H} with H > 1/2 diverges at the origin
        return DiffusivityClass("subdiffusive", None)
    raise ValidationError(f"unknown kernel {kernel!r}")


@dataclass(frozen=True)
class ModulusCurve:
    """Complex viscosity and shear modulus on a common frequency grid."""

    frequencies: np.ndarray
    eta_star: np.ndarray
    g_star: np.ndarray
    radius: float
    kbt: float
    dim: str

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if np.any(f <= 0) or np.any(np.diff(f) <= 0):
            raise ValidationError("modulus curve: frequencies must be positive increasing")
        for name in ("frequencies", "eta_star", "g_star"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def storage(self):
        return self.g_star.real

    @property
    def loss(self):
        return self.g_star.imag


def _msd_laplace(times, values, z, tail_exponent, tail_amplitude):
    """Exact Laplace transform of the piecewise-linear MSD interpolant.

    The curve is taken as 0 at t = 0, linear between samples, and a power
    law tail_amplitude * t^tail_exponent beyond the last sample.
    """
    t0 = np.concatenate(([0.0], times[:-1]))
    v0 = np.concatenate(([0.0], values[:-1]))
    widths = times - t0
    slopes = (values - v0) / widths
    z = z[:, None]
    zd = z * widths
    seg = np.exp(-z * t0) * (
        v0 * -np.expm1(-zd) / z + slopes * (1.0 - (1.0 + zd) * np.exp(-zd)) / z**2
    )
    total = np.sum(seg, axis=1)
    zf = z[:, 0]
    a = tail_exponent
    tail = tail_amplitude * zf ** (-1.0 - a) * gammaincc(1.0 + a, zf * times[-1]) * gamma_fn(1.0 + a)
    return total + tail


def gser_modulus(msd, radius, kbt, dim="3d", z_grid=None, tail_decade=1.0):
    """Generalized Stokes-Einstein map from an MSD curve to eta*(w), G*(w).

    The MSD is Laplace-transformed exactly on its piecewise-linear
    interpolant with a fitted power-law tail; the complex modulus follows by
    substituting z -> i w into the locally fitted power law of z*eta(z)
    (Mason-Weitz style).  ``dim`` selects the spatial convention: '3d' for a
    full 3-d MSD, '1d' for per-coordinate curves (factor 1/3).
    """
    if dim not in ("1d", "3d"):
        raise ValidationError(f"dim must be '1d' or '3d', got {dim!r}")
    if not radius > 0 or not kbt > 0:
        raise ValidationError("radius and kBT must be positive")
    values = np.asarray(msd.values, dtype=float)
    if np.any(values <= 0):
        raise ValidationError("gser_modulus requires strictly positive MSD values")
    times = msd.times
    z_lo = 1.0 / times[-1]
    z_hi = 1.0 / times[0]
    if z_grid is None:
        z_grid = np.geomspace(z_lo, z_hi, 60)
    z_grid = np.asarray(z_grid, dtype=float)
    if np.any(z_grid < z_lo * (1 - 1e-9)) or np.any(z_grid > z_hi * (1 + 1e-9)):
        raise ValidationError(
            f"z grid must lie inside the resolvable band [{z_lo:g}, {z_hi:g}]"
        )

    # power-law tail from the last decade of lags
    cut = times >= times[-1] / 10.0**tail_decade
    if np.count_nonzero(cut) < 2:
        cut = np.zeros_like(cut)
        cut[-2:] = True
    slope, intercept = np.polyfit(np.log(times[cut]), np.log(values[cut]), 1)
    tail_exponent = float(slope)
    tail_amplitude = values[-1] / times[-1] ** tail_exponent

    transform = _msd_laplace(times, values, z_grid, tail_exponent, tail_amplitude)
    kappa = 1.0 if dim == "3d" else 1.0 / 3.0
    eta_tilde = kbt * kappa / (z_grid**2 * np.pi * radius * transform)

    g_tilde = z_grid * eta_tilde
    local_slope = np.gradient(np.log(g_tilde), np.log(z_grid))
    g_star = g_tilde * np.exp(1j * np.pi * local_slope / 2.0)
    eta_star = g_star / (1j * z_grid)
    return ModulusCurve(
        frequencies=z_grid,
        eta_star=eta_star,
        g_star=g_star,
        radius=float(radius),
        kbt=float(kbt),
        dim=dim,
    )


def warn_per_coordinate_convention(dim):
    """Loud reminder that the 3-d GSER reading does not fit 1-d curves."""
    if dim == "3d":
        warnings.warn(
            "GSER dim='3d' assumes a full 3-d MSD; track-derived curves are "
            "per-coordinate - pass dim='1d' for those",
            UserWarning,
            stacklevel=2,
        )


def modulus_to_csv(curve, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("omega,G_storage,G_loss,eta_real,eta_imag\n")
        for w, g, e in zip(curve.frequencies, curve.g_star, curve.eta_star):
            fh.write(
                ",".join(
                    full_precision(v) for v in (w, g.real, g.imag, e.real, e.imag)
                )
                + "\n"
            )
