"""Command-line interface.

Verbs: simulate, estimate, msd, acf, gser, compare, distribution.  Every
verb that writes delimited output also renders a matplotlib figure next to
it unless --no-figures is given.  Exit codes: 0 success, 2 validation
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, inference, kernels, trackio
from .exactsim import cholesky_sim, cme_sim, fgle_increment_covariance
from .markovsim import simulate_langevin, simulate_prony_gle
from .spectral import fgle_params_from_physical
from .util import NumericalError, ValidationError, replicate_rng
from .waveletsim import WaveletSampler

SIM_MODELS = ("langevin", "prony", "fgle-wavelet", "fgle-cme", "fgle-cholesky", "fgle")


def _load_json(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad JSON in {path}: {exc}")


def _out_prefix(out, default):
    prefix = Path(out if out else default)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    return prefix


def _parse_range(text, name, typ=float):
    try:
        lo, hi = (typ(v) for v in text.split(":"))
    except Exception:
        raise ValidationError(f"--{name} must look like LO:HI, got {text!r}")
    return lo, hi


def _fgle_from_params(params):
    hurst = params.get("hurst", params.get("d", 0.25) + 0.5)
    return fgle_params_from_physical(
        params.get("drag", 2.0), params.get("mass", 1.0), params.get("kbt", 1.0), hurst
    )


def _cmd_simulate(args):
    params = _load_json(args.params)
    model = args.model
    if model == "fgle":
        model = f"fgle-{args.method}"
    reps = max(1, args.reps)
    n = args.n
    tracks = []
    for rep in range(reps):
        rng = replicate_rng(args.seed, rep)
        tid = f"sim{rep:04d}"
        if model == "langevin":
            tracks.append(
                simulate_langevin(
                    params.get("mass", 1.0),
                    params.get("drag", 1.0),
                    params.get("kbt", 1.0),
                    args.dt if args.dt else params.get("dt", 0.1),
                    n,
                    rng,
                    track_id=tid,
                )
            )
        elif model == "prony":
            kernel = kernels.PronyKernel(
                np.asarray(params.get("amplitudes", [1.0])),
                np.asarray(params.get("rates", [1.0])),
            )
            tracks.append(
                simulate_prony_gle(
                    kernel,
                    params.get("mass", 1.0),
                    params.get("drag", 1.0),
                    params.get("kbt", 1.0),
                    args.dt if args.dt else params.get("dt", 0.1),
                    n,
                    rng,
                    track_id=tid,
                )
            )
        elif model == "fgle-wavelet":
            fp = _fgle_from_params(params)
            if rep == 0:
                sampler = WaveletSampler(
                    fp,
                    levels=args.levels,
                    horizon=args.horizon if args.horizon else n,
                    cmf=args.cmf,
                    init_len=params.get("init_len", 1024),
                )
            tracks.append(sampler.sample_track(rng, track_id=tid))
        elif model in ("fgle-cme", "fgle-cholesky"):
            fp = _fgle_from_params(params)
            if rep == 0:
                cov = fgle_increment_covariance(fp, n, tol=params.get("quad_tol", 1e-8))
            if model == "fgle-cme":
                steps = cme_sim(cov, rng, n=n)
            else:
                steps = cholesky_sim(cov, rng, n=n)
            positions = np.concatenate(([0.0], np.cumsum(steps)))
            tracks.append(trackio.Track(id=tid, dt=1.0, positions=positions))
        else:
            raise ValidationError(f"unknown model {model!r}")
    prefix = _out_prefix(args.out, "out/simulate")
    csv_path = prefix.with_name(prefix.name + "_tracks.csv")
    trackio.save_tracks(tracks, csv_path)
    written = [str(csv_path)]
    if args.figures:
        from . import plots

        written.append(plots.plot_tracks(tracks, prefix.with_name(prefix.name + "_tracks.png")))
    return written


def _iter_tracks(args):
    tracks = trackio.load_tracks(args.input, dt=args.dt)
    return tracks


def _cmd_estimate(args):
    tracks = _iter_tracks(args)
    if not 0 < args.level < 1:
        raise ValidationError("--level must be a significance level in (0, 1)")
    coverage = 1.0 - args.level
    reports, ids = [], []
    for track in tracks:
        work = track if args.no_detrend else trackio.detrend(track, "linear")
        if args.method == "lw":
            series = trackio.increments(work, 1)
            rep = inference.local_whittle(series, m=args.m, theta=args.theta, level=coverage)
        else:
            curve = trackio.pathwise_msd(work)
            rep = inference.msd_loglog_fit(curve, lag_range=args.lags, level=coverage)
        reports.append(rep)
        ids.append(f"{track.id}:{track.coord}")
    prefix = _out_prefix(args.out, "out/estimate")
    csv_path = prefix.with_name(prefix.name + "_reports.csv")
    inference.reports_to_csv(reports, ids, csv_path)
    json_path = prefix.with_name(prefix.name + "_reports.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(
            {tid: rep.to_dict() for tid, rep in zip(ids, reports)},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    written = [str(csv_path), str(json_path)]
    for tid, rep in zip(ids, reports):
        print(f"{tid}: alpha_hat={rep.alpha_hat:.4f} +- {rep.stderr:.4f} ({rep.estimator})")
    return written


def _cmd_msd(args):
    tracks = _iter_tracks(args)
    prefix = _out_prefix(args.out, "out/msd")
    written = []
    curves, labels = [], []
    for track in tracks:
        curve = trackio.pathwise_msd(track, args.max_lag)
        name = f"{prefix.name}_{track.id}_{track.coord}.csv"
        trackio.msd_to_csv(curve, prefix.with_name(name))
        written.append(str(prefix.with_name(name)))
        curves.append(curve)
        labels.append(f"{track.id}:{track.coord}")
    if args.figures:
        from . import plots

        written.append(plots.plot_msd(curves, labels, prefix.with_name(prefix.name + ".png")))
    return written


def _cmd_acf(args):
    tracks = _iter_tracks(args)
    prefix = _out_prefix(args.out, "out/acf")
    written = []
    curves, labels = [], []
    n_obs = None
    for track in tracks:
        series = trackio.increments(track, 1)
        max_lag = args.max_lag if args.max_lag else min(50, series.size - 1)
        curve = trackio.sample_acf(series, max_lag)
        name = f"{prefix.name}_{track.id}_{track.coord}.csv"
        trackio.acf_to_csv(curve, prefix.with_name(name))
        written.append(str(prefix.with_name(name)))
        curves.append(curve)
        labels.append(f"{track.id}:{track.coord}")
        n_obs = series.size
    if args.figures:
        from . import plots

        written.append(
            plots.plot_acf(curves, labels, prefix.with_name(prefix.name + ".png"), n_obs=n_obs)
        )
    return written


def _cmd_gser(args):
    curve = trackio.msd_from_csv(args.input, dt=args.dt)
    if args.dim == "3d":
        kernels.warn_per_coordinate_convention(args.dim)
        print(
            "note: dim='3d' assumes a 3-d MSD; per-coordinate track curves need --dim 1d",
            file=sys.stderr,
        )
    z_grid = None
    if args.zgrid:
        pieces = args.zgrid.split(":")
        if len(pieces) != 3:
            raise ValidationError("--zgrid must look like LO:HI:COUNT")
        z_grid = np.geomspace(float(pieces[0]), float(pieces[1]), int(pieces[2]))
    modulus = kernels.gser_modulus(
        curve, radius=args.radius, kbt=args.kbt, dim=args.dim, z_grid=z_grid
    )
    prefix = _out_prefix(args.out, "out/gser")
    csv_path = prefix.with_name(prefix.name + "_modulus.csv")
    kernels.modulus_to_csv(modulus, csv_path)
    written = [str(csv_path)]
    if args.figures:
        from . import plots

        written.append(plots.plot_modulus(modulus, prefix.with_name(prefix.name + ".png")))
    return written


def _cmd_compare(args):
    config = _load_json(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads
    result = bench.run_comparison(config)
    prefix = _out_prefix(args.out, "out/compare")
    csv_path = prefix.with_name(prefix.name + "_table.csv")
    bench.comparison_to_csv(result, csv_path)
    json_path = prefix.with_name(prefix.name + "_report.json")
    bench.result_to_json(result, json_path)
    written = [str(csv_path), str(json_path)]
    if args.figures:
        from . import plots

        written.append(plots.plot_comparison(result, prefix.with_name(prefix.name + ".png")))
    for row in result.rows:
        t = "baseline" if row.t_stat is None else f"|t|={row.t_stat:.3f}"
        print(f"{row.method}: d_hat={row.d_hat:.5f} s={row.s:.5f} N={row.n_reps} {t}")
    return written


def _cmd_distribution(args):
    config = _load_json(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads
    result = bench.sampling_distribution(config)
    prefix = _out_prefix(args.out, "out/distribution")
    csv_path = prefix.with_name(prefix.name + "_estimates.csv")
    bench.estimates_to_csv(result.estimates, csv_path, column="alpha_hat")
    json_path = prefix.with_name(prefix.name + "_report.json")
    bench.result_to_json(result, json_path)
    written = [str(csv_path), str(json_path)]
    if args.figures:
        from . import plots

        written.append(plots.plot_distribution(result, prefix.with_name(prefix.name + ".png")))
    print(
        f"pooled alpha_hat={result.pooled_alpha:.4f}, overlay sd={result.overlay_sd:.4f}, "
        f"m={result.m}, reps={result.estimates.size}"
    )
    return written


def build_parser():
    parser = argparse.ArgumentParser(
        prog="microrheo",
        description="Simulation and inference for particle diffusion in viscoelastic fluids",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p):
        p.add_argument("--out", help="output path prefix")
        p.add_argument(
            "--figures",
            action=argparse.BooleanOptionalAction,
            default=True,
            help="render figures alongside delimited output",
        )

    p = sub.add_parser("simulate", help="generate trajectories")
    p.add_argument("--model", choices=SIM_MODELS, required=True)
    p.add_argument("--method", choices=("cholesky", "cme"), default="cholesky",
                   help="exact sampler when --model fgle")
    p.add_argument("--params", help="JSON file with model parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=512, help="number of increments")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--J", dest="levels", type=int, default=8, help="wavelet refinement levels")
    p.add_argument("--T", dest="horizon", type=int, default=None, help="wavelet horizon")
    p.add_argument("--cmf", default="db4vm")
    add_common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("estimate", help="subdiffusivity estimates from tracks")
    p.add_argument("--input", required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--method", choices=("lw", "msd"), default="lw")
    p.add_argument("--m", type=int, default=None, help="Local Whittle frequency count")
    p.add_argument("--lags", type=lambda s: _parse_range(s, "lags", int), default=None)
    p.add_argument("--level", type=float, default=0.05,
                   help="significance level (confidence intervals at 1 - level)")
    p.add_argument("--theta", type=lambda s: _parse_range(s, "theta"), default=(-0.49, 0.49))
    p.add_argument("--no-detrend", action="store_true")
    add_common(p)
    p.set_defaults(fn=_cmd_estimate)

    p = sub.add_parser("msd", help="pathwise MSD curves")
    p.add_argument("--input", required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--max-lag", type=int, default=None)
    add_common(p)
    p.set_defaults(fn=_cmd_msd)

    p = sub.add_parser("acf", help="sample ACF of increments")
    p.add_argument("--input", required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--max-lag", type=int, default=None)
    add_common(p)
    p.set_defaults(fn=_cmd_acf)

    p = sub.add_parser("gser", help="MSD to complex modulus via the GSER")
    p.add_argument("--input", required=True, help="MSD CSV (lag,value[,n_pairs])")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--radius", type=float, required=True, help="bead radius [m]")
    p.add_argument("--kbt", type=float, required=True, help="thermal energy [J]")
    p.add_argument("--dim", choices=("1d", "3d"), default="3d")
    p.add_argument("--zgrid", help="LO:HI:COUNT log-spaced Laplace abscissae")
    add_common(p)
    p.set_defaults(fn=_cmd_gser)

    p = sub.add_parser("compare", help="cross-simulator comparison table")
    p.add_argument("--config", help="JSON config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    add_common(p)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("distribution", help="estimator sampling distribution")
    p.add_argument("--config", help="JSON config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    add_common(p)
    p.set_defaults(fn=_cmd_distribution)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        written = args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for path in written or []:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
