"""Shared plumbing: error types, replicate seeding, quadrature helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "MICRORHEO_THREADS"


class ValidationError(ValueError):
    """Bad inputs or malformed data (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to meet its contract (CLI exit code 3)."""


def replicate_rng(seed, *index):
    """Independent random stream for one Monte Carlo replicate.

    The stream is a pure function of (seed, index), so batched runs give
    identical results no matter how replicates are scheduled across threads.
    """
    key = tuple(int(i) for i in index)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


def thread_count(requested=None):
    """Resolve the worker count, honouring the MICRORHEO_THREADS cap."""
    n = int(requested) if requested else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap is not None:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {cap!r}")
    return max(1, n)


def thread_map(fn, count, threads=None):
    """Map fn over range(count), in order, optionally on a thread pool.

    Output ordering is by index regardless of completion order, so the
    result is independent of the number of workers.
    """
    workers = thread_count(threads)
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def panel_nodes(edges, order):
    """Gauss-Legendre nodes and weights for a batch of contiguous panels."""
    x, w = gauss_legendre(order)
    edges = np.asarray(edges, dtype=float)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def integrate_panels(f, edges, order=10):
    """Fixed-order Gauss-Legendre integration over the given panel edges."""
    nodes, weights = panel_nodes(edges, order)
    return float(np.dot(weights, f(nodes)))


def log_edges(a, b, panels_per_decade=8):
    """Log-spaced panel edges covering [a, b], a > 0."""
    if not (0 < a < b):
        raise ValidationError("log_edges requires 0 < a < b")
    n = max(1, int(np.ceil(np.log10(b / a) * panels_per_decade)))
    return np.geomspace(a, b, n + 1)


def full_precision(x):
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(x))
