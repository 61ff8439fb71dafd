"""Trajectory data model, CSV ingestion, drift removal and path statistics.

Tracks are per-coordinate: a two-column (x, y) file yields two Track objects
sharing the same id, because the coordinate processes are treated as
independent.  All operations are pure; a Track is never modified in place.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .util import ValidationError, full_precision

DETREND_METHODS = ("none", "mean", "linear")


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Track:
    """One particle coordinate sampled at a uniform frame interval."""

    id: str
    dt: float
    positions: np.ndarray
    coord: str = "x"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"track {self.id}: dt must be positive, got {self.dt}")
        pos = _readonly(self.positions)
        if pos.ndim != 1 or pos.size < 2:
            raise ValidationError(f"track {self.id}: need at least 2 samples")
        if not np.all(np.isfinite(pos)):
            raise ValidationError(f"track {self.id}: non-finite position values")
        object.__setattr__(self, "positions", pos)

    @property
    def n_steps(self):
        """Number of increments N (positions hold N+1 samples)."""
        return self.positions.size - 1


@dataclass(frozen=True)
class MsdCurve:
    """Time-averaged squared displacement per lag, with averaging counts."""

    lags: np.ndarray
    values: np.ndarray
    dt: float
    n_pairs: np.ndarray

    def __post_init__(self):
        lags = np.ascontiguousarray(self.lags, dtype=int)
        vals = _readonly(self.values)
        pairs = np.ascontiguousarray(self.n_pairs, dtype=int)
        if lags.size != vals.size or lags.size != pairs.size:
            raise ValidationError("msd curve: lags, values and n_pairs must align")
        if lags.size == 0 or lags[0] < 1 or np.any(np.diff(lags) <= 0):
            raise ValidationError("msd curve: lags must be strictly increasing and >= 1")
        if np.any(vals < 0):
            raise ValidationError("msd curve: negative value")
        if not self.dt > 0:
            raise ValidationError("msd curve: dt must be positive")
        lags.flags.writeable = False
        pairs.flags.writeable = False
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "n_pairs", pairs)

    @property
    def times(self):
        return self.lags * self.dt


@dataclass(frozen=True)
class AcfCurve:
    """Sample autocorrelation at lags 0..L, normalized to rho(0) = 1."""

    lags: np.ndarray
    correlations: np.ndarray

    def __post_init__(self):
        lags = np.ascontiguousarray(self.lags, dtype=int)
        corr = _readonly(self.correlations)
        if lags.size != corr.size or lags.size == 0 or lags[0] != 0:
            raise ValidationError("acf curve: lags must start at 0 and align with values")
        if abs(corr[0] - 1.0) > 1e-12:
            raise ValidationError("acf curve: correlation at lag 0 must be 1")
        if np.any(np.abs(corr) > 1.0 + 1e-12):
            raise ValidationError("acf curve: correlation outside [-1, 1]")
        lags.flags.writeable = False
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "correlations", corr)


def _parse_float(cell, row_idx, col):
    try:
        return float(cell)
    except (TypeError, ValueError):
        raise ValidationError(f"non-numeric value {cell!r} in column {col!r}, data row {row_idx}")


def load_tracks(path, fmt="csv", dt=None):
    """Load per-coordinate tracks from a CSV file.

    Expected header: track_id,frame,x[,y].  Frames within a track must be
    consecutive integers; a gap is an error (interpolating would bias the
    MSD).  The sampling interval comes from a leading "# dt=<value>" comment
    line or from the dt argument; an explicit argument wins.
    """
    if fmt != "csv":
        raise ValidationError(f"unsupported track format {fmt!r}")
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read track file {path}: {exc}")
    return loads_tracks(text, dt=dt, source=str(path))


def loads_tracks(text, dt=None, source="<string>"):
    header_dt = None
    lines = text.splitlines()
    body_start = 0
    for line in lines:
        stripped = line.strip()
        if stripped.startswith("#"):
            body_start += 1
            payload = stripped.lstrip("#").strip()
            if payload.startswith("dt"):
                _, _, value = payload.partition("=")
                header_dt = _parse_float(value.strip(), body_start, "dt")
        elif stripped:
            break
        else:
            body_start += 1
    if dt is None:
        dt = header_dt
    if dt is None:
        raise ValidationError(f"{source}: no sampling interval (pass dt or add a '# dt=' line)")

    reader = csv.reader(io.StringIO("\n".join(lines[body_start:])))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError(f"{source}: empty file")
    header = [h.strip() for h in header]
    for col in ("track_id", "frame"):
        if col not in header:
            raise ValidationError(f"{source}: missing required column {col!r}")
    if "x" not in header:
        raise ValidationError(f"{source}: missing required column 'x'")
    coords = ["x"] + (["y"] if "y" in header else [])
    idx = {c: header.index(c) for c in ["track_id", "frame"] + coords}

    frames: dict[str, list[int]] = {}
    data: dict[str, dict[str, list[float]]] = {}
    for i, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        tid = row[idx["track_id"]].strip()
        frame = _parse_float(row[idx["frame"]], i, "frame")
        if frame != int(frame):
            raise ValidationError(f"{source}: non-integer frame {frame} in track {tid!r}")
        frames.setdefault(tid, []).append(int(frame))
        for c in coords:
            data.setdefault(tid, {}).setdefault(c, []).append(_parse_float(row[idx[c]], i, c))

    tracks = []
    for tid in frames:
        order = np.argsort(frames[tid], kind="stable")
        fr = np.asarray(frames[tid])[order]
        if fr.size >= 2 and np.any(np.diff(fr) != 1):
            raise ValidationError(f"{source}: track {tid!r} has non-consecutive frames (gap)")
        if np.unique(fr).size != fr.size:
            raise ValidationError(f"{source}: track {tid!r} has duplicate frames")
        for c in coords:
            pos = np.asarray(data[tid][c], dtype=float)[order]
            tracks.append(Track(id=tid, dt=float(dt), positions=pos, coord=c))
    if not tracks:
        raise ValidationError(f"{source}: no data rows")
    return tracks


def save_tracks(tracks, path):
    """Write tracks back to CSV at full precision (round-trip exact)."""
    if not tracks:
        raise ValidationError("no tracks to save")
    dts = {t.dt for t in tracks}
    if len(dts) != 1:
        raise ValidationError("cannot save tracks with heterogeneous dt to one file")
    by_id: dict[str, dict[str, Track]] = {}
    for t in tracks:
        slot = by_id.setdefault(t.id, {})
        if t.coord in slot:
            raise ValidationError(f"duplicate coordinate {t.coord!r} for track {t.id!r}")
        slot[t.coord] = t
    two_d = any("y" in slot for slot in by_id.values())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# dt={full_precision(tracks[0].dt)}\n")
        cols = "track_id,frame,x,y" if two_d else "track_id,frame,x"
        fh.write(cols + "\n")
        for tid in by_id:
            slot = by_id[tid]
            x = slot.get("x")
            if x is None:
                raise ValidationError(f"track {tid!r} has no x coordinate")
            y = slot.get("y")
            if y is not None and y.positions.size != x.positions.size:
                raise ValidationError(f"track {tid!r}: x/y length mismatch")
            for j in range(x.positions.size):
                row = [tid, str(j), full_precision(x.positions[j])]
                if two_d:
                    row.append(full_precision(y.positions[j]) if y is not None else "")
                fh.write(",".join(row) + "\n")


def detrend(track, method="linear"):
    """Remove drift from a track; returns a new Track.

    'mean' subtracts the average increment drift j*(X_N - X_0)/N, 'linear'
    subtracts the least-squares line in time.  Removing a mean that is not
    really there introduces artificial subdiffusive behavior at long lags,
    so estimators downstream should treat detrended tracks with care.
    """
    if method not in DETREND_METHODS:
        raise ValidationError(f"unknown detrend method {method!r}")
    x = track.positions
    if method == "none":
        out = x.copy()
    elif method == "mean":
        n = track.n_steps
        slope = (x[-1] - x[0]) / n
        out = x - slope * np.arange(n + 1)
    else:
        if x.size < 3:
            raise ValidationError(f"track {track.id}: need >= 3 samples for linear detrend")
        t = np.arange(x.size) * track.dt
        coeffs = np.polynomial.polynomial.polyfit(t, x, 1)
        out = x - np.polynomial.polynomial.polyval(t, coeffs)
    return Track(id=track.id, dt=track.dt, positions=out, coord=track.coord)


def increments(track, lag=1):
    """Displacements X((j+lag)*dt) - X(j*dt); returns N+1-lag values."""
    lag = int(lag)
    if lag < 1:
        raise ValidationError("lag must be a positive integer")
    if lag >= track.positions.size:
        raise ValidationError(
            f"lag {lag} out of range for track of length {track.positions.size}"
        )
    x = track.positions
    return x[lag:] - x[:-lag]


def default_max_lag(n_steps):
    """Default MSD lag budget: min(N/10, 1000), at least 1."""
    return max(1, min(n_steps // 10, 1000))


def pathwise_msd(track, n_lags=None):
    """Time-averaged MSD over lags 1..n_lags.

    Uses the FFT autocorrelation identity, exactly equivalent to the direct
    sum over all (j, j+h) pairs.  Accuracy degrades for h close to N, hence
    the default lag budget keeps n_lags well below N.
    """
    x = track.positions
    n_pts = x.size
    n_max = n_pts - 1
    if n_lags is None:
        n_lags = default_max_lag(n_max)
    n_lags = int(n_lags)
    if not 1 <= n_lags <= n_max:
        raise ValidationError(f"n_lags must be in [1, {n_max}], got {n_lags}")

    nfft = 1 << int(np.ceil(np.log2(2 * n_pts)))
    spec = np.fft.rfft(x, nfft)
    autocorr = np.fft.irfft(spec * np.conj(spec), nfft)[:n_pts]
    cum2 = np.concatenate(([0.0], np.cumsum(x * x)))
    h = np.arange(1, n_lags + 1)
    # sum_{j=0}^{n_pts-1-h} x_j^2 + x_{j+h}^2
    d = (cum2[n_pts - h] - cum2[0]) + (cum2[n_pts] - cum2[h])
    raw = d - 2.0 * autocorr[h]
    scale = max(cum2[-1], 1.0)
    raw[(raw < 0) & (raw > -1e-10 * scale)] = 0.0
    n_pairs = n_pts - h
    return MsdCurve(lags=h, values=raw / n_pairs, dt=track.dt, n_pairs=n_pairs)


def ensemble_msd(tracks, t_index):
    """Ensemble-averaged squared displacement (1/N) sum (X_n(t) - X_n(0))^2."""
    tracks = list(tracks)
    if not tracks:
        raise ValidationError("ensemble_msd: empty track set")
    t_index = int(t_index)
    dts = {t.dt for t in tracks}
    if len(dts) != 1:
        raise ValidationError("ensemble_msd: tracks have heterogeneous dt")
    for t in tracks:
        if t_index >= t.positions.size:
            raise ValidationError(f"ensemble_msd: track {t.id} shorter than t_index {t_index}")
    disp = np.array([t.positions[t_index] - t.positions[0] for t in tracks])
    return float(np.mean(disp * disp))


def sample_acf(series, max_lag):
    """Biased (1/n) sample autocorrelation about the sample mean.

    The 1/n normalization keeps the estimated autocovariance sequence
    nonnegative definite.
    """
    x = np.asarray(series, dtype=float)
    max_lag = int(max_lag)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("sample_acf: need a 1-d series of length >= 2")
    if not 0 <= max_lag < x.size:
        raise ValidationError(f"sample_acf: max_lag must be < series length {x.size}")
    xc = x - x.mean()
    c0 = float(np.dot(xc, xc)) / x.size
    if c0 == 0.0:
        raise ValidationError("sample_acf: constant series has undefined correlation")
    nfft = 1 << int(np.ceil(np.log2(2 * x.size)))
    spec = np.fft.rfft(xc, nfft)
    cov = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1] / x.size
    corr = np.clip(cov / c0, -1.0, 1.0)
    corr[0] = 1.0
    return AcfCurve(lags=np.arange(max_lag + 1), correlations=corr)


def msd_to_csv(curve, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("lag,value,n_pairs\n")
        for lag, val, pairs in zip(curve.lags, curve.values, curve.n_pairs):
            fh.write(f"{lag},{full_precision(val)},{pairs}\n")


def acf_to_csv(curve, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("lag,value\n")
        for lag, val in zip(curve.lags, curve.correlations):
            fh.write(f"{lag},{full_precision(val)}\n")


def msd_from_csv(path, dt):
    """Read an MsdCurve from a 'lag,value[,n_pairs]' CSV."""
    lags, values, pairs = [], [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        has_pairs = len(header) >= 3
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            lags.append(int(row[0]))
            values.append(_parse_float(row[1], i, "value"))
            pairs.append(int(row[2]) if has_pairs else 0)
    return MsdCurve(
        lags=np.asarray(lags),
        values=np.asarray(values),
        dt=float(dt),
        n_pairs=np.asarray(pairs),
    )
