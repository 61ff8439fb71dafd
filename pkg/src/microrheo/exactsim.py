"""Exact stationary Gaussian samplers and target autocovariances.

Two exact routes from an autocovariance sequence to sample paths:

* Cholesky factorization of the Toeplitz covariance (O(N^3), the reference
  method), and
* circulant matrix embedding (CME, Davies-Harte style): embed the covariance
  in a circulant of size M = 2^p >= 2(N-1), diagonalize it with the FFT and
  color complex white noise with the eigenvalue square roots.

CME normalization used here: with eigenvalues L_k = FFT(first circulant row)
and independent standard normal pairs (g1, g2),

    path = Re(IFFT(sqrt(M * L_k) * (g1_k + i g2_k)))[:N]

which is exact in law (proved in the test suite by reducing the linear map
to an explicit covariance for small N).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.linalg import cholesky as _cholesky
from scipy.linalg import toeplitz

from .spectral import FgleParams, _increments_gain, fgle_velocity_density
from .util import NumericalError, ValidationError, full_precision, panel_nodes

COV_ORIGINS = ("closed_form_fgn", "quadrature_fgle", "user")

MAX_EMBED_EXPONENT = 24
EIGEN_CLIP = 1e-10  # relative clamp for round-off negatives


@dataclass
class CovSeq:
    """Autocovariance sequence lambda(0..N-1) of a stationary sequence."""

    values: np.ndarray
    origin: str = "user"
    extend_fn: Optional[Callable[[int], float]] = None
    abs_errors: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValidationError("covariance sequence must be a nonempty 1-d array")
        if not v[0] > 0:
            raise ValidationError("lag-0 covariance must be positive")
        if np.any(np.abs(v) > v[0] * (1.0 + 1e-12)):
            raise ValidationError("covariance magnitudes cannot exceed the lag-0 value")
        if self.origin not in COV_ORIGINS:
            raise ValidationError(f"unknown covariance origin {self.origin!r}")
        self.values = v

    def __len__(self):
        return self.values.size

    def value_at(self, h):
        """Covariance at |h|; lags beyond the stored range use extend_fn or 0."""
        h = abs(int(h))
        if h < self.values.size:
            return float(self.values[h])
        if self.extend_fn is None:
            return 0.0
        if h not in self._cache:
            self._cache[h] = float(self.extend_fn(h))
        return self._cache[h]


def cov_to_csv(cov, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("lag,value\n")
        for lag, val in enumerate(cov.values):
            fh.write(f"{lag},{full_precision(val)}\n")


def fgn_covariance(hurst, n):
    """Unit-variance fractional Gaussian noise autocovariance.

    lambda(h) = ((h+1)^{2H} - 2 h^{2H} + (h-1)^{2H}) / 2.
    """
    if not 0.0 < hurst < 1.0:
        raise ValidationError(f"Hurst parameter must be in (0, 1), got {hurst}")
    n = int(n)
    if n < 1:
        raise ValidationError("need at least one lag")
    h2 = 2.0 * hurst

    def lam(h):
        h = np.abs(np.asarray(h, dtype=float))
        return 0.5 * (np.abs(h + 1) ** h2 - 2 * h**h2 + np.abs(h - 1) ** h2)

    return CovSeq(
        values=lam(np.arange(n)),
        origin="closed_form_fgn",
        extend_fn=lambda h: float(lam(h)),
    )


def _monotone_tail_start(density, beta):
    """Frequency beyond which rho_hat(w)/w^2 is decreasing (probed numerically)."""
    grid = np.geomspace(0.05, 200.0, 400)
    g = density(grid) / grid**2
    rising = np.nonzero(np.diff(g) > 0)[0]
    w0 = grid[rising[-1] + 1] if rising.size else grid[0]
    return max(8.0 * np.pi, 2.0 * w0)


def fgle_increment_covariance(params: FgleParams, n, tol=1e-8):
    """Autocovariance of unit-time position increments of the fractional model.

    lambda(h) = integral e^{i h w} |(1-e^{-iw})/(iw)|^2 rho_hat(w) dw with the
    equipartition-normalized velocity density.  The integral is computed on
    a shared Gauss-Legendre panel grid (panel width below the fastest cosine
    period) plus a cosine-weighted tail rule; the per-lag achieved absolute
    error is stored on the returned sequence.
    """
    n = int(n)
    if n < 1:
        raise ValidationError("need at least one lag")
    if not tol > 0:
        raise ValidationError("tolerance must be positive")
    if params.mass == 0:
        raise NumericalError(
            "massless spectral filter decays too slowly for the requested "
            "absolute tolerance; increment covariance needs mass > 0"
        )
    density = fgle_velocity_density(params)
    cut = _monotone_tail_start(density, params.beta)

    def g_tail(w):
        return density(w) / w**2

    eps_tail = tol / 50.0

    def _tail_coeffs(k_max):
        coeffs = np.empty(k_max + 1)
        errs = np.empty(k_max + 1)
        val, err = quad(g_tail, cut, np.inf, limit=400, epsabs=eps_tail, epsrel=1e-10)
        coeffs[0], errs[0] = val, err
        for k in range(1, k_max + 1):
            val, err = quad(
                g_tail, cut, np.inf, weight="cos", wvar=float(k),
                limit=400, epsabs=eps_tail, epsrel=1e-10,
            )
            coeffs[k], errs[k] = val, err
        return coeffs, errs

    def _main_region(lags, order, halvings):
        width = np.pi / (max(lags.max(), 1) + 1) / (2**halvings)
        n_lin = max(1, int(np.ceil((cut - width) / width)))
        linear = np.linspace(width, cut, n_lin + 1)
        # geometric panels absorb the |w|^{2d} cusp at the origin
        geo = np.geomspace(width * 2.0**-26, width, 27)
        edges = np.concatenate([[0.0], geo[:-1], linear])
        nodes, weights = panel_nodes(edges, order)
        f = _increments_gain(nodes) * density(nodes) * weights
        out = np.empty(lags.size)
        step = max(1, int(4e6 / max(nodes.size, 1)))
        for start in range(0, lags.size, step):
            hh = lags[start : start + step, None]
            out[start : start + step] = np.cos(hh * nodes) @ f
        return out

    lags = np.arange(n)
    coeffs, cerrs = _tail_coeffs(n)
    k_hi = np.minimum(lags + 1, n)
    tail = 2.0 * (2.0 * coeffs[lags] - coeffs[k_hi] - coeffs[np.abs(lags - 1)])
    tail_err = 2.0 * (2.0 * cerrs[lags] + cerrs[k_hi] + cerrs[np.abs(lags - 1)])

    halvings = 0
    main = _main_region(lags, 8, halvings)
    while True:
        refined = _main_region(lags, 8, halvings + 1)
        main_err = np.abs(refined - main)
        errors = main_err + tail_err
        main = refined
        if np.all(errors <= tol):
            break
        halvings += 1
        if halvings > 4:
            raise NumericalError(
                f"increment covariance quadrature stalled at max error "
                f"{errors.max():.3e} > tol {tol:.1e}"
            )

    values = 2.0 * main + tail

    def extend(h):
        h = int(h)
        m = _main_region(np.asarray([h]), 8, halvings)[0]
        tails = [
            quad(
                g_tail, cut, np.inf, weight="cos", wvar=float(k),
                limit=400, epsabs=eps_tail, epsrel=1e-10,
            )[0]
            for k in (h, h + 1, abs(h - 1))
        ]
        return 2.0 * m + 2.0 * (2.0 * tails[0] - tails[1] - tails[2])

    return CovSeq(
        values=values,
        origin="quadrature_fgle",
        extend_fn=extend,
        abs_errors=errors,
    )


def cholesky_factor(cov, n=None):
    """Lower Cholesky factor of the Toeplitz covariance (reusable)."""
    n = int(n) if n is not None else len(cov)
    row = np.array([cov.value_at(h) for h in range(n)])
    try:
        return _cholesky(toeplitz(row), lower=True)
    except np.linalg.LinAlgError as exc:
        match = re.search(r"(\d+)", str(exc))
        idx = f" (pivot failure at index {match.group(1)})" if match else ""
        raise NumericalError(f"covariance is not positive definite{idx}") from exc


def cholesky_sim(cov, rng, n=None, factor=None):
    """Exact draw via Cholesky: path = L z with z iid standard normal."""
    if factor is None:
        factor = cholesky_factor(cov, n)
    return factor @ rng.standard_normal(factor.shape[0])


@dataclass(frozen=True)
class CmeEmbedding:
    eigenvalues: np.ndarray
    nonnegative: bool
    size: int
    exponent: int


def cme_embed(cov, p):
    """Eigenvalues of the circulant embedding of size M = 2^p.

    The first circulant row is (lam(0), ..., lam(M/2), ..., lam(1)); its FFT
    gives the eigenvalues.  Round-off negatives within EIGEN_CLIP * lam(0)
    are clamped to zero; anything lower flips the nonnegative flag so the
    caller can escalate p.
    """
    p = int(p)
    m = 2**p
    n = len(cov)
    if m < 2 * (n - 1) or m < 2:
        raise ValidationError(f"embedding size 2^{p} is below 2(N-1) = {2 * (n - 1)}")
    half = m // 2
    head = np.empty(half + 1)
    stored = min(n, half + 1)
    head[:stored] = cov.values[:stored]
    for h in range(stored, half + 1):
        head[h] = cov.value_at(h)
    row = np.concatenate([head, head[-2:0:-1]])
    eig = np.fft.fft(row).real
    floor = -EIGEN_CLIP * cov.values[0]
    ok = bool(eig.min() >= floor)
    if ok:
        eig = np.maximum(eig, 0.0)
    return CmeEmbedding(eigenvalues=eig, nonnegative=ok, size=m, exponent=p)


def cme_sim(cov, rng, n=None, p=None, embedding=None):
    """Exact draw via circulant embedding; escalates p on negative eigenvalues."""
    n = int(n) if n is not None else len(cov)
    if embedding is None:
        exponent = int(p) if p is not None else max(1, int(np.ceil(np.log2(max(2 * (n - 1), 2)))))
        embedding = cme_embed(cov, exponent)
        while not embedding.nonnegative:
            exponent += 1
            if exponent > MAX_EMBED_EXPONENT:
                raise NumericalError(
                    f"no nonnegative circulant embedding up to 2^{MAX_EMBED_EXPONENT}"
                )
            embedding = cme_embed(cov, exponent)
    if not embedding.nonnegative:
        raise NumericalError("circulant embedding has negative eigenvalues")
    m = embedding.size
    z = rng.standard_normal((2, m))
    colored = np.sqrt(m * embedding.eigenvalues) * (z[0] + 1j * z[1])
    return np.fft.ifft(colored).real[:n]
