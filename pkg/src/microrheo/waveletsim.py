"""Approximate wavelet multiresolution sampler for the fractional model.

The sampler refines a coarse exact draw scale by scale.  At scale j the
process V_j is (in law) white noise colored by a discretization filter
ghat_j supported on [-pi, pi) and extended periodically:

    ghat_j(w) = ghat_frac_j(w) * ghat_denom_j(w)
    ghat_frac_j(w)  = 2^{j d} exp(-d w^2 / (2 pi^2)) |w|^d
    ghat_denom_j(w) = exp(beta w^2 / (2 pi^2))
                      / sqrt(c0 + c1 2^{j beta} |w|^beta + c2 2^{2 j beta} |w|^{2 beta})

The Gaussian factors smooth the periodization seam at +-pi so the
time-domain filters decay fast; the fractional factor is normalized so that
ghat_j(2^{-j} w) / ghat(w) -> 1 as j grows (the dyadic rescaling of the
denominator is exact: only the seam smoothing decays, like exp(c 4^{-j})).

One refinement uses the conjugate-mirror-filter pair (u, v) of an
orthonormal wavelet family:

    u_hat_j(w) = ghat_{j+1}(w) / ghat_j(2w) * u_hat(w)
    v_hat_j(w) = ghat_{j+1}(w) * v_hat(w)
    V_{j+1}    = u_j * upsample2(V_j) + v_j * upsample2(eps_j)

which replaces the scale-j coloring with the scale-(j+1) coloring exactly
(for untruncated filters): the CMF identities |u|^2 + |v|^2 = 2 and
u(w) conj(u(w+pi)) + v(w) conj(v(w+pi)) = 0 make the output stationary with
spectral density |ghat_{j+1}|^2 / (2 pi).

Physical units: 2^{J/2} V_{J, [2^J t]} converges to the velocity process up
to the density normalization, so positions accumulate as

    X(t) = sqrt(2 pi * const) * 2^{-J/2} * sum_{k <= 2^J t} V_{J,k},

with const the equipartition constant of the target velocity density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .exactsim import CovSeq, cme_embed, cme_sim
from .spectral import FgleParams, fgle_density_constant
from .trackio import Track
from .util import NumericalError, ValidationError, full_precision, panel_nodes

# Orthonormal Daubechies scaling coefficients, normalized to sum sqrt(2);
# keys give the number of vanishing moments of the wavelet.
_SQRT3 = np.sqrt(3.0)
_CMF_TABLE = {
    "db2vm": np.array(
        [1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3]
    ) / (4.0 * np.sqrt(2.0)),
    "db4vm": np.array(
        [
            0.23037781330885523,
            0.7148465705525415,
            0.6308807679295904,
            -0.02798376941698385,
            -0.18703481171888114,
            0.030841381835986965,
            0.032883011666982945,
            -0.010597401784997278,
        ]
    ),
}
_VANISHING = {"db2vm": 2, "db4vm": 4}

DEFAULT_GRID = 2**16
DEFAULT_TRUNC_LAG = 80
DEFAULT_TRUNC_THRESHOLD = 1e-5


def cmf_coefficients(cmf):
    if cmf not in _CMF_TABLE:
        raise ValidationError(f"unknown conjugate-mirror-filter tag {cmf!r}; "
                              f"choose from {sorted(_CMF_TABLE)}")
    return _CMF_TABLE[cmf]


def cmf_lowpass(cmf, omega):
    """u_hat(w) = sum_n h_n exp(-i n w) for the tagged wavelet family."""
    h = cmf_coefficients(cmf)
    w = np.asarray(omega, dtype=float)
    n = np.arange(h.size)
    return np.exp(-1j * np.multiply.outer(w, n)) @ h


def cmf_highpass(cmf, omega):
    """v_hat(w) = e^{-iw} conj(u_hat(w + pi))."""
    w = np.asarray(omega, dtype=float)
    return np.exp(-1j * w) * np.conj(cmf_lowpass(cmf, w + np.pi))


def _wrap_to_band(omega):
    """Map frequencies into the principal band [-pi, pi)."""
    return np.mod(np.asarray(omega, dtype=float) + np.pi, 2.0 * np.pi) - np.pi


def discretization_filter(j, params: FgleParams, omega):
    """Scale-j discretization filter ghat_j, periodically extended to R."""
    if j < 0:
        raise ValidationError("scale index must be >= 0")
    w = np.abs(_wrap_to_band(omega))
    d, beta = params.d, params.beta
    frac = 2.0 ** (j * d) * np.exp(-d * w**2 / (2.0 * np.pi**2)) * w**d
    x = (2.0**j * w) ** beta
    denom = np.exp(beta * w**2 / (2.0 * np.pi**2)) / np.sqrt(
        params.c0 + params.c1 * x + params.c2 * x**2
    )
    return (frac * denom)[()]


def ou_exact_ratio(rate, levels, omega):
    """Dyadic-sampling ratio for an Ornstein-Uhlenbeck velocity.

    (lam + i w) / (1 - exp(-lam 2^-J) e^{-iw}): the AR(1) filter of the exact
    dyadic sampling over the continuous-time filter; the reference case where
    an exact discretization exists.
    """
    if not rate > 0:
        raise ValidationError("rate must be positive")
    w = np.asarray(omega, dtype=float)
    return ((rate + 1j * w) / (1.0 - np.exp(-rate * 2.0 ** (-levels)) * np.exp(-1j * w)))[()]


@dataclass(frozen=True)
class FilterBank:
    """Per-scale refinement filters truncated to |lag| <= trunc_lag."""

    low_pass: tuple
    high_pass: tuple
    trunc_lag: int
    cmf: str
    vanishing_moments: int
    truncation_magnitude: float
    grid_size: int

    @property
    def levels(self):
        return len(self.low_pass)

    def kernel(self, which, j):
        bank = self.low_pass if which == "u" else self.high_pass
        if not 0 <= j < len(bank):
            raise ValidationError(f"scale {j} outside bank range 0..{len(bank) - 1}")
        return bank[j]


def _bank_from_ghat(ghat, levels, cmf, trunc_lag, threshold, grid_size):
    """Assemble a FilterBank given ghat(j, omega_array) on the DFT grid."""
    n_grid = int(grid_size)
    omega = 2.0 * np.pi * np.arange(n_grid) / n_grid
    u_hat = cmf_lowpass(cmf, omega)
    v_hat = cmf_highpass(cmf, omega)
    half = n_grid // 2

    low, high = [], []
    worst = 0.0
    for j in range(levels):
        g_next = ghat(j + 1, omega)
        g_double = ghat(j, 2.0 * omega)
        ratio = np.zeros(n_grid, dtype=complex)
        safe = g_double > 0
        ratio[safe] = g_next[safe] / g_double[safe] * u_hat[safe]
        # limits at the two grid points where ghat_j(2w) vanishes
        ratio[0] = u_hat[0]  # the dyadic rescaling is exact at the origin
        ratio[half] = 0.0  # the CMF zero at pi dominates the |2w|^-d blowup
        uj_hat = ratio
        vj_hat = g_next * v_hat

        uj, mag_u = _to_time_domain(uj_hat, trunc_lag)
        vj, mag_v = _to_time_domain(vj_hat, trunc_lag)
        worst = max(worst, mag_u, mag_v)
        low.append(uj)
        high.append(vj)

    if worst >= threshold:
        raise NumericalError(
            f"filter truncation magnitude {worst:.3e} exceeds threshold {threshold:.1e} "
            f"at lag bound {trunc_lag}"
        )
    return FilterBank(
        low_pass=tuple(low),
        high_pass=tuple(high),
        trunc_lag=int(trunc_lag),
        cmf=cmf,
        vanishing_moments=_VANISHING.get(cmf, 0),
        truncation_magnitude=float(worst),
        grid_size=n_grid,
    )


def _to_time_domain(spectrum, trunc_lag):
    n_grid = spectrum.size
    time = np.fft.ifft(spectrum)
    if np.abs(time.imag).max() > 1e-9:
        raise NumericalError("refinement filter is not real; spectral symmetry broken")
    time = time.real
    kern = np.concatenate([time[n_grid - trunc_lag:], time[: trunc_lag + 1]])
    discarded = time[trunc_lag + 1 : n_grid - trunc_lag]
    magnitude = float(np.abs(discarded).max()) if discarded.size else 0.0
    arr = np.ascontiguousarray(kern)
    arr.flags.writeable = False
    return arr, magnitude


def build_filter_bank(
    params,
    levels,
    cmf="db4vm",
    trunc_lag=DEFAULT_TRUNC_LAG,
    threshold=DEFAULT_TRUNC_THRESHOLD,
    grid_size=DEFAULT_GRID,
):
    """Refinement filters u_j, v_j for scales j = 0..levels-1."""
    if levels < 1:
        raise ValidationError("need at least one refinement level")
    cmf_coefficients(cmf)

    def ghat(j, w):
        return np.asarray(discretization_filter(j, params, w), dtype=float)

    return _bank_from_ghat(ghat, int(levels), cmf, int(trunc_lag), float(threshold), grid_size)


def filter_bank_to_csv(bank, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("scale,lag,u,v\n")
        for j in range(bank.levels):
            u = bank.low_pass[j]
            v = bank.high_pass[j]
            for idx in range(u.size):
                lag = idx - bank.trunc_lag
                fh.write(f"{j},{lag},{full_precision(u[idx])},{full_precision(v[idx])}\n")


def _upsample2(x):
    out = np.zeros(2 * x.size)
    out[0::2] = x
    return out


def refine(v_seq, bank, j, rng):
    """One refinement step: u_j * up2(V_j) + v_j * up2(eps_j), edges trimmed.

    eps_j is freshly drawn iid N(0,1) of the same length as V_j.  The output
    drops trunc_lag samples from each end so every retained sample saw a
    full convolution window.
    """
    v_seq = np.asarray(v_seq, dtype=float)
    u = bank.kernel("u", j)
    v = bank.kernel("v", j)
    eps = rng.standard_normal(v_seq.size)
    up_v = _upsample2(v_seq)
    up_e = _upsample2(eps)
    out = fftconvolve(up_v, u, mode="same") + fftconvolve(up_e, v, mode="same")
    trim = bank.trunc_lag
    if trim:
        if out.size <= 2 * trim:
            raise ValidationError("sequence too short for the filter support")
        out = out[trim:-trim]
    return out


def scale0_covariance(params, n_lags, grid_panels=4096):
    """Autocovariance (1/2 pi) integral |ghat_0|^2 e^{i h w} dw on [-pi, pi).

    Geometric panels absorb the |w|^{2d} cusp at the origin; the rest of the
    integrand is smooth and periodic.
    """
    n_lags = int(n_lags)
    fine = np.geomspace(np.pi * 2.0**-30, np.pi / grid_panels, 24)
    edges = np.concatenate([[0.0], fine, np.linspace(np.pi / grid_panels, np.pi, grid_panels)[1:]])
    nodes, weights = panel_nodes(edges, 8)
    power = np.asarray(discretization_filter(0, params, nodes), dtype=float) ** 2
    f = weights * power / np.pi
    lags = np.arange(n_lags)
    values = np.empty(n_lags)
    step = max(1, int(4e6 / max(nodes.size, 1)))
    for start in range(0, n_lags, step):
        hh = lags[start : start + step, None]
        values[start : start + step] = np.cos(hh * nodes) @ f

    def extend(h):
        return float(np.cos(float(h) * nodes) @ f)

    return CovSeq(values=values, origin="user", extend_fn=extend)


class WaveletSampler:
    """Reusable sampler: one bank and one initialization embedding, many draws."""

    def __init__(
        self,
        params,
        levels,
        horizon,
        cmf="db4vm",
        init_len=1024,
        trunc_lag=DEFAULT_TRUNC_LAG,
        threshold=DEFAULT_TRUNC_THRESHOLD,
        grid_size=DEFAULT_GRID,
    ):
        if levels < 1:
            raise ValidationError("levels must be >= 1")
        horizon = int(horizon)
        if horizon < 1:
            raise ValidationError("horizon must be a positive integer")
        self.params = params
        self.levels = int(levels)
        self.horizon = horizon
        self.required = horizon * 2**self.levels
        final_len = init_len * 2**self.levels - 2 * trunc_lag * (2**self.levels - 1)
        if final_len < self.required:
            need = horizon + 2 * trunc_lag
            raise ValidationError(
                f"init_len {init_len} too short for horizon {horizon} at {levels} levels; "
                f"need at least ~{need}"
            )
        self.bank = build_filter_bank(params, levels, cmf, trunc_lag, threshold, grid_size)
        self.init_cov = scale0_covariance(params, init_len + 1)
        exponent = max(1, int(np.ceil(np.log2(max(2 * (init_len - 1), 2)))))
        emb = cme_embed(self.init_cov, exponent)
        while not emb.nonnegative and exponent < 24:
            exponent += 1
            emb = cme_embed(self.init_cov, exponent)
        if not emb.nonnegative:
            raise NumericalError("no nonnegative embedding for the scale-0 covariance")
        self.init_embedding = emb
        self.init_len = int(init_len)
        self.position_scale = (
            np.sqrt(2.0 * np.pi * fgle_density_constant(params)) * 2.0 ** (-self.levels / 2.0)
        )

    def sample_fine_velocity(self, rng):
        seq = cme_sim(self.init_cov, rng, n=self.init_len, embedding=self.init_embedding)
        for j in range(self.levels):
            seq = refine(seq, self.bank, j, rng)
        return seq

    def sample_track(self, rng, track_id="fgle-wavelet"):
        seq = self.sample_fine_velocity(rng)
        if seq.size < self.required:
            raise NumericalError("refined sequence shorter than required; init_len too small")
        path = self.position_scale * np.cumsum(seq[: self.required])
        stride = 2**self.levels
        positions = np.concatenate(([0.0], path[stride - 1 :: stride]))
        return Track(id=track_id, dt=1.0, positions=positions)

    def sample_increments(self, rng):
        return np.diff(self.sample_track(rng).positions)


def simulate_fgle_wavelet(
    params,
    levels,
    horizon,
    rng,
    cmf="db4vm",
    init_len=1024,
    trunc_lag=DEFAULT_TRUNC_LAG,
    threshold=DEFAULT_TRUNC_THRESHOLD,
    grid_size=DEFAULT_GRID,
    track_id="fgle-wavelet",
):
    """Wavelet-refined position track sampled at integer times 0..horizon."""
    sampler = WaveletSampler(
        params, levels, horizon, cmf, init_len, trunc_lag, threshold, grid_size
    )
    return sampler.sample_track(rng, track_id=track_id)
