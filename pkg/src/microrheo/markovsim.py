"""Exact samplers for Markovian-embeddable Langevin models.

The classical (viscous) model has closed-form velocity autocorrelation and
MSD, and samples exactly as an AR(1) velocity with the position integrated
jointly per step.  A Prony-series memory kernel admits an augmented linear
state (position, velocity, one memory state and one Ornstein-Uhlenbeck
forcing component per exponential mode) that is sampled exactly:

    state_{j+1} = expm(A dt) state_j + xi_j,
    Cov(xi_j)   = integral_0^dt e^{As} B B' e^{A's} ds,

with the step covariance from the Van Loan block-matrix construction and
the stationary initial law from the continuous Lyapunov equation.  The
forcing components F_k are independent OU processes whose stationary
covariances sum to kBT * drag * kernel(|t|), realizing the
fluctuation-dissipation pairing; the memory states track the friction
convolution.  Stationary Var(V) = kBT/mass is an exact property of the
Lyapunov solution and is asserted in the tests.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm, solve_continuous_lyapunov
from scipy.signal import lfilter

from .kernels import PronyKernel
from .trackio import Track
from .util import NumericalError, ValidationError


def ou_velocity_acf(mass, drag, kbt, t):
    """Stationary velocity autocorrelation (kBT/m) exp(-drag t / m)."""
    if not mass > 0 or not drag > 0 or not kbt > 0:
        raise ValidationError("ou_velocity_acf needs positive mass, drag, kBT")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("time must be nonnegative")
    return (kbt / mass * np.exp(-drag * t / mass))[()]


def ou_msd(mass, drag, kbt, t):
    """(2 kBT / drag) (t + (m/drag)(e^{-drag t/m} - 1)); vanishes like t^2 at 0."""
    if not mass > 0 or not drag > 0 or not kbt > 0:
        raise ValidationError("ou_msd needs positive mass, drag, kBT")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("time must be nonnegative")
    theta = drag / mass
    return (2.0 * kbt / drag * (t + np.expm1(-theta * t) / theta))[()]


def _ou_step_covariance(theta, v_inf, dt):
    """Exact per-step covariance of (velocity innovation, position innovation)."""
    u = theta * dt
    q_vv = v_inf * -np.expm1(-2.0 * u)
    q_vx = v_inf / theta * np.expm1(-u) ** 2
    if u < 1e-3:
        core = (2.0 / 3.0) * u**3 - 0.5 * u**4 + (7.0 / 30.0) * u**5
    else:
        core = 2.0 * u - 3.0 + 4.0 * np.exp(-u) - np.exp(-2.0 * u)
    q_xx = v_inf / theta**2 * core
    return q_vv, q_vx, q_xx


def langevin_path(mass, drag, kbt, dt, n, rng):
    """Exact (positions, velocities) sample of the viscous model.

    The velocity is an AR(1) chain with coefficient exp(-drag dt / mass)
    started from its stationary law; the position integrates the velocity
    exactly over each step through the joint per-step Gaussian.  mass = 0
    degenerates to Brownian motion (velocities returned as None).
    """
    if mass < 0 or not drag > 0 or not kbt > 0:
        raise ValidationError("need mass >= 0, drag > 0, kBT > 0")
    if not dt > 0 or n < 2:
        raise ValidationError("need dt > 0 and n >= 2 samples")
    n = int(n)
    if mass == 0:
        steps = rng.normal(0.0, np.sqrt(2.0 * kbt * dt / drag), size=n)
        return np.concatenate(([0.0], np.cumsum(steps))), None

    theta = drag / mass
    v_inf = kbt / mass
    phi = np.exp(-theta * dt)
    q_vv, q_vx, q_xx = _ou_step_covariance(theta, v_inf, dt)
    # 2x2 Cholesky of the innovation covariance
    l11 = np.sqrt(q_vv)
    l21 = q_vx / l11
    l22 = np.sqrt(max(q_xx - l21**2, 0.0))
    z = rng.standard_normal((2, n))
    eta = l11 * z[0]
    zeta = l21 * z[0] + l22 * z[1]

    v = np.empty(n + 1)
    v[0] = np.sqrt(v_inf) * rng.standard_normal()
    v[1:], _ = lfilter([1.0], [1.0, -phi], eta, zi=np.array([phi * v[0]]))
    dx = v[:-1] * (1.0 - phi) / theta + zeta
    return np.concatenate(([0.0], np.cumsum(dx))), v


def simulate_langevin(mass, drag, kbt, dt, n, rng, track_id="langevin"):
    """Exact position track of the viscous model; see langevin_path."""
    positions, _ = langevin_path(mass, drag, kbt, dt, n, rng)
    return Track(id=track_id, dt=float(dt), positions=positions)


def _prony_state_space(kernel, mass, drag, kbt):
    """Drift matrix and noise input of the augmented linear system."""
    c = kernel.amplitudes
    lam = kernel.rates
    k = c.size
    dim = 2 + 2 * k
    a = np.zeros((dim, dim))
    b = np.zeros((dim, k))
    a[0, 1] = 1.0
    for i in range(k):
        a[1, 2 + i] = -drag * c[i] / mass
        a[1, 2 + k + i] = 1.0 / mass
        a[2 + i, 1] = 1.0
        a[2 + i, 2 + i] = -lam[i]
        a[2 + k + i, 2 + k + i] = -lam[i]
        b[2 + k + i, i] = np.sqrt(2.0 * lam[i] * kbt * drag * c[i])
    return a, b


def _van_loan(a, b, dt):
    dim = a.shape[0]
    block = np.zeros((2 * dim, 2 * dim))
    block[:dim, :dim] = -a
    block[:dim, dim:] = b @ b.T
    block[dim:, dim:] = a.T
    e = expm(block * dt)
    transition = e[dim:, dim:].T
    step_cov = transition @ e[:dim, dim:]
    return transition, 0.5 * (step_cov + step_cov.T)


def _discretize_lti(a, b, dt):
    """Exact (transition, step-covariance) pair via the Van Loan block method.

    Stiff steps are handled by evaluating at dt / 2^k (where the block
    exponential is well conditioned) and doubling with the exact identity
    Q(2h) = Phi(h) Q(h) Phi(h)' + Q(h).
    """
    stiffness = np.linalg.norm(a, 1) * dt
    doublings = max(0, int(np.ceil(np.log2(max(stiffness, 1e-12) / 0.5))))
    transition, step_cov = _van_loan(a, b, dt / 2**doublings)
    for _ in range(doublings):
        step_cov = transition @ step_cov @ transition.T + step_cov
        transition = transition @ transition
    return transition, 0.5 * (step_cov + step_cov.T)


def _psd_factor(matrix, name):
    vals, vecs = np.linalg.eigh(matrix)
    floor = -1e-10 * max(vals.max(), 1.0)
    if vals.min() < floor:
        raise NumericalError(f"{name} is not positive semidefinite (min eig {vals.min():.3e})")
    return vecs * np.sqrt(np.maximum(vals, 0.0))


def prony_gle_stationary_cov(kernel, mass, drag, kbt):
    """Stationary covariance of (V, Z_1..Z_K, F_1..F_K) from the Lyapunov equation."""
    a, b = _prony_state_space(kernel, mass, drag, kbt)
    a_sub = a[1:, 1:]
    rhs = -(b[1:] @ b[1:].T)
    try:
        cov = solve_continuous_lyapunov(a_sub, rhs)
    except Exception as exc:  # pragma: no cover - scipy failure path
        raise NumericalError(f"Lyapunov solve failed: {exc}") from exc
    return 0.5 * (cov + cov.T)


def prony_gle_velocity_acf(kernel, mass, drag, kbt, tau):
    """Exact stationary velocity autocorrelation from the embedding."""
    a, _ = _prony_state_space(kernel, mass, drag, kbt)
    cov = prony_gle_stationary_cov(kernel, mass, drag, kbt)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.array([(expm(a[1:, 1:] * t) @ cov)[0, 0] for t in tau])
    return out if out.size > 1 else float(out[0])


def simulate_prony_states(kernel, mass, drag, kbt, dt, n, rng):
    """Exact joint sample of the augmented state; rows are time steps.

    Columns: position, velocity, memory states, forcing components.
    """
    if not isinstance(kernel, PronyKernel):
        raise ValidationError("simulate_prony_gle needs a Prony kernel")
    if not mass > 0:
        raise ValidationError("Markovian embedding needs mass > 0")
    if not drag > 0 or not kbt > 0 or not dt > 0 or n < 2:
        raise ValidationError("need drag > 0, kBT > 0, dt > 0, n >= 2")
    n = int(n)
    a, b = _prony_state_space(kernel, mass, drag, kbt)
    transition, step_cov = _discretize_lti(a, b, dt)
    noise_factor = _psd_factor(step_cov, "step covariance")
    stat_cov = prony_gle_stationary_cov(kernel, mass, drag, kbt)
    init_factor = _psd_factor(stat_cov, "stationary covariance")

    dim = a.shape[0]
    states = np.empty((n + 1, dim))
    states[0] = 0.0
    states[0, 1:] = init_factor @ rng.standard_normal(dim - 1)
    shocks = rng.standard_normal((n, dim)) @ noise_factor.T
    for j in range(n):
        states[j + 1] = transition @ states[j] + shocks[j]
    return states


def simulate_prony_gle(kernel, mass, drag, kbt, dt, n, rng, track_id="prony"):
    """Exact stationary path of the Prony-kernel generalized Langevin model."""
    states = simulate_prony_states(kernel, mass, drag, kbt, dt, n, rng)
    return Track(id=track_id, dt=float(dt), positions=states[:, 0])


def prony_velocity_density(kernel, mass, drag, kbt):
    """True velocity spectral density via the complex one-sided kernel transform.

    Measure convention (total mass = kBT/mass); used to cross-validate the
    simulated ACF against the frequency-domain resolvent relation.
    """

    def _eval(w):
        w = np.asarray(w, dtype=float)
        onesided = np.sum(
            kernel.amplitudes / (kernel.rates + 1j * w[..., None]), axis=-1
        )
        chi = 1.0 / (1j * mass * w + drag * onesided)
        return kbt * drag / np.pi * onesided.real * np.abs(chi) ** 2

    from .spectral import SpectralDensity

    return SpectralDensity(evaluate=_eval, origin_exponent=0.0, label="prony")
