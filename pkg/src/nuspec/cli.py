"""Command-line front end.

    nuspec <experiment> --config cfg.json [--set key=value ...] [--out dir]
    nuspec compare --recurrence report.json --lyapunov report.json [--out dir]

Each run writes manifest.json (the fully resolved configuration), report.json
(stable key order, byte-identical across reruns with the same config and
seed), and data.csv where the experiment produces tabular output.  Module
errors produce a nonzero exit status and a report.json carrying the error
and a "partial": true marker.  NUSPEC_THREADS bounds the worker count used
for independent certificate generation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import Point2, SystemKind, SystemSpec, step_xy
from .errors import ConfigError, NuspecError
from .lyapunov import (
    LyapunovSpectrum,
    PesinBlockParams,
    lyapunov_spectrum,
    _transport_sweeps,
)
from .recurrence import (
    SetSpec,
    birkhoff_indicator_average,
    interval_hit_check,
    nonlacunarity_profile,
    recurrence_scaling,
    return_times,
)
from .shadowing import assemble, check_domination, newton_refine_periodic, shadowing_profile
from .specification import (
    SlowVaryingFn,
    build_cover_context,
    fixed_point_context,
    gns_certificate,
    ns_certificate,
    sublinearity_scan,
)

_VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    system: SystemSpec
    seed: int
    experiment: str
    parameters: dict
    output_dir: Path


# parameter schemas: name -> default (None means optional, any JSON value)
_COVER_PARAMS = {
    "theta": 0.05,
    "eta_ratio": 0.1,
    "q": {"kind": "constant", "c": 1.0},
    "delta": None,
    "max_centers": 256,
    "sampling_orbit_length": 400_000,
    "block_samples": 200,
    "block_window": [200, 200, 50],
    "T_floor": 1,
    "h_cap": 512,
    "mixing": False,
    "newton_tol": 1e-11,
    "spectrum_N": 100_000,
}

SCHEMAS = {
    "lyapunov": {"N": 100_000, "qr_period": 10, "transient": None, "x0": None},
    "recurrence-scaling": {
        "radii_log2_min": 4,
        "radii_log2_max": 14,
        "grid": 5,
        "T_max": 400,
        "method": "auto",
        "spectrum_N": 100_000,
        "x0": None,
    },
    "nonlacunarity": {
        "radius": None,
        "count_fwd": 500,
        "count_bwd": 60,
        "horizon": 60_000,
        "thresholds": [10, 20, 50, 100],
        "hit_epsilon": 0.2,
        "N_start": 1,
        "x0": None,
    },
    "shadow": {
        "period_min": 55,
        "period_max": 70,
        "jitter": 2e-5,
        "tau_factor": 100.0,
        "epsilon_factor": 0.8,
        "newton_tol": 1e-11,
        "max_iter": 12,
        "spectrum_N": 100_000,
    },
    "ns-cert": dict(_COVER_PARAMS, m=100, n=100, x=None, fixed_point=False, connector_gap=None),
    "gns-cert": dict(
        _COVER_PARAMS,
        theta=0.1,
        mixing=True,
        k=3,
        m=60,
        n=60,
        segment_points=None,
        target_total_gap=None,
        block_samples=100,
        sampling_orbit_length=200_000,
    ),
    "sublinearity": dict(
        _COVER_PARAMS,
        eta_ratios=[0.1],
        mn_list=[[100, 100], [200, 200], [400, 400], [800, 800]],
        x=None,
    ),
    "domination": {
        "lam": 0.9,
        "S0": 1,
        "S_list": [1, 5, 10],
        "n_points": 40,
        "swap": False,
        "x0": None,
    },
}


def _parse_set_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(experiment: str, config_path, overrides, out_dir) -> ExperimentConfig:
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}", field="experiment")
    raw = {}
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
    allowed_top = {"system", "seed", "experiment", "parameters", "output_dir"}
    unknown = set(raw) - allowed_top
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {sorted(unknown)}", field=sorted(unknown)[0])
    if "experiment" in raw and raw["experiment"] != experiment:
        raise ConfigError(
            f"config names experiment {raw['experiment']!r} but {experiment!r} was requested",
            field="experiment",
        )
    system = SystemSpec.from_json(raw.get("system", {"kind": "CatMap", "params": {}}))
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer", field="seed")
    params = dict(raw.get("parameters", {}))
    if not isinstance(params, dict):
        raise ConfigError("parameters must be an object", field="parameters")
    for k, v in overrides or []:
        params[k] = v
    schema = SCHEMAS[experiment]
    unknown = set(params) - set(schema)
    if unknown:
        raise ConfigError(
            f"unknown parameter(s) for {experiment}: {sorted(unknown)}", field=sorted(unknown)[0]
        )
    resolved = dict(schema)
    resolved.update(params)
    outd = Path(out_dir) if out_dir else Path(raw.get("output_dir", "nuspec_out"))
    return ExperimentConfig(
        system=system, seed=seed, experiment=experiment, parameters=resolved, output_dir=outd
    )


# ---------------------------------------------------------------------------
# serialization helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else v for v in row])


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("NUSPEC_THREADS", "1")))
    except ValueError:
        return 1


def _seed_point(system: SystemSpec, rng, x0_param, transient=0) -> Point2:
    if x0_param is not None:
        return Point2(float(x0_param[0]), float(x0_param[1]), system.space)
    if system.kind is SystemKind.HENON:
        x, y = 0.1, 0.1
        for _ in range(max(transient, 1000)):
            x, y = step_xy(system, x, y)
        return Point2(x, y, system.space)
    p = rng.random(2)
    return Point2(float(p[0]), float(p[1]), system.space)


def _spectrum_for(system, rng, N) -> LyapunovSpectrum:
    x0 = _seed_point(system, rng, None)
    return lyapunov_spectrum(system, x0, N=N, qr_period=10)


def _q_from_param(qspec: dict, eta: float) -> SlowVaryingFn:
    kind = qspec.get("kind", "constant")
    if kind == "constant":
        return SlowVaryingFn.constant(float(qspec.get("c", 1.0)), eta)
    if kind == "modulated":
        return SlowVaryingFn.modulated(
            float(qspec.get("c", 1.0)),
            float(qspec.get("amplitude", 0.5)),
            int(qspec.get("frequency", 1)),
            eta,
        )
    raise ConfigError(f"unknown q kind {kind!r}", field="q.kind")


def _build_ctx(system, seed, p, mixing=None):
    return build_cover_context(
        system,
        theta=p["theta"],
        seed=seed,
        block_samples=p["block_samples"],
        delta=p["delta"],
        max_centers=p["max_centers"],
        sampling_orbit_length=p["sampling_orbit_length"],
        T_floor=p["T_floor"],
        mixing_mode=p["mixing"] if mixing is None else mixing,
        h_cap=p["h_cap"],
        epsilon_ratio=0.1,
        block_window=tuple(p["block_window"]),
        spectrum_N=p["spectrum_N"],
    )


# ---------------------------------------------------------------------------
# experiment runners; each returns (results_dict, csv_header, csv_rows)


def _run_lyapunov(cfg: ExperimentConfig):
    p = cfg.parameters
    rng = np.random.default_rng(cfg.seed)
    transient = p["transient"]
    if transient is None:
        transient = 1000 if cfg.system.kind is SystemKind.HENON else 0
    x0 = _seed_point(cfg.system, rng, p["x0"])
    spec = lyapunov_spectrum(cfg.system, x0, N=int(p["N"]), qr_period=int(p["qr_period"]), transient=transient)
    res = dict(spec.to_json())
    res["x0"] = [x0.x, x0.y]
    res["sum"] = sum(spec.exponents)
    return res, None, None


def _run_recurrence_scaling(cfg: ExperimentConfig):
    p = cfg.parameters
    rng = np.random.default_rng(cfg.seed)
    x = _seed_point(cfg.system, rng, p["x0"])
    spec = _spectrum_for(cfg.system, rng, int(p["spectrum_N"]))
    radii = [2.0**-e for e in range(int(p["radii_log2_min"]), int(p["radii_log2_max"]) + 1)]
    rep = recurrence_scaling(
        cfg.system, x, radii, grid=int(p["grid"]), T_max=int(p["T_max"]), spectrum=spec, method=p["method"]
    )
    res = rep.to_json()
    res["x"] = [x.x, x.y]
    res["spectrum"] = spec.to_json()
    rows = list(zip(rep.radii, rep.tau, rep.ratios, [int(c) for c in rep.censored]))
    return res, ["r", "tau", "ratio", "censored"], rows


def _run_nonlacunarity(cfg: ExperimentConfig):
    p = cfg.parameters
    rng = np.random.default_rng(cfg.seed)
    x = _seed_point(cfg.system, rng, p["x0"])
    radius = p["radius"]
    if radius is None:
        radius = math.sqrt(0.05 / math.pi)  # ball of area 0.05
    gamma = SetSpec.ball(x, float(radius))
    seq = return_times(
        cfg.system, x, gamma, count_fwd=int(p["count_fwd"]), count_bwd=int(p["count_bwd"]), horizon=int(p["horizon"])
    )
    prof = nonlacunarity_profile(seq, thresholds=tuple(p["thresholds"]))
    hit_N = interval_hit_check(seq, float(p["hit_epsilon"]), N_start=int(p["N_start"]))
    area = birkhoff_indicator_average(cfg.system, x, gamma, horizon=min(int(p["horizon"]), 200_000))
    res = {
        "x": [x.x, x.y],
        "radius": radius,
        "n_forward": int(seq.count_fwd),
        "n_backward": int(seq.count_bwd),
        "t_first": int(seq.forward[0]) if seq.count_fwd else None,
        "t_last": int(seq.forward[-1]) if seq.count_fwd else None,
        "tail_deviation": prof.tail_deviation,
        "interval_hit_N": hit_N,
        "hit_epsilon": p["hit_epsilon"],
        "indicator_average": area,
    }
    rows = [
        (i + 1, int(seq.forward[i]), float(prof.ratios_fwd[i - 1]) if i >= 1 else None)
        for i in range(seq.count_fwd)
    ]
    return res, ["i", "t_i", "ratio"], rows


def _cat_rational_orbit(period_min, period_max):
    """Integer search for a cat-map rational orbit with period in range."""
    for q in range(3, 600):
        a, b = 1, 0
        seen = 0
        for t in range(1, 4 * q * q + 4):
            a, b = (2 * a + b) % q, (a + b) % q
            seen = t
            if (a, b) == (1, 0):
                break
        if (a, b) != (1, 0):
            continue
        if period_min <= seen <= period_max:
            pts = np.empty((seen, 2))
            a, b = 1, 0
            for t in range(seen):
                pts[t, 0] = a / q
                pts[t, 1] = b / q
                a, b = (2 * a + b) % q, (a + b) % q
            return q, seen, pts
    raise NuspecError(f"no rational cat orbit with period in [{period_min}, {period_max}]")


def _run_shadow(cfg: ExperimentConfig):
    p = cfg.parameters
    system = cfg.system
    if system.kind not in (SystemKind.CAT_MAP, SystemKind.PERTURBED_CAT_MAP):
        raise ConfigError("shadow experiment supports CatMap and PerturbedCatMap", field="system.kind")
    rng = np.random.default_rng(cfg.seed)
    q_den, period, guess = _cat_rational_orbit(int(p["period_min"]), int(p["period_max"]))

    sp = system.space
    base = Point2(float(guess[0, 0]), float(guess[0, 1]), sp)
    arc0 = np.vstack([guess, guess[:1]])
    po0, _ = assemble([(base, period, arc0)], system, periodic=True)
    ref = newton_refine_periodic(system, po0, tol=1e-12, max_iter=40)
    Z = ref.points

    # contracting unit directions along the cycle, by pulling a generic
    # vector backward around it twice
    from .dynamics import jac_array

    jacs = jac_array(system, Z)
    vs = np.empty_like(Z)
    v = np.array([0.7, 0.3])
    for lap in range(2):
        for idx in range(period - 1, -1, -1):
            J = jacs[idx]
            det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
            v = np.array([(J[1, 1] * v[0] - J[0, 1] * v[1]) / det, (-J[1, 0] * v[0] + J[0, 0] * v[1]) / det])
            v /= np.hypot(v[0], v[1])
            if lap == 1:
                vs[idx] = v

    jit = float(p["jitter"])
    n1 = period // 2
    n2 = period - n1

    def displaced_arc(start, length, w0):
        arc = np.empty((length + 1, 2))
        w = w0.copy()
        for j in range(length + 1):
            idx = (start + j) % period
            arc[j] = (Z[idx] + w) % 1.0
            if j < length:
                w = jacs[idx] @ w
        return arc

    arc1 = displaced_arc(0, n1, jit * vs[0])
    arc2 = displaced_arc(n1, n2, jit * vs[n1])
    seg1 = (Point2(float(arc1[0, 0]), float(arc1[0, 1]), sp), n1, arc1)
    seg2 = (Point2(float(arc2[0, 0]), float(arc2[0, 1]), sp), n2, arc2)
    po, times = assemble([seg1, seg2], system, periodic=True)

    sol = newton_refine_periodic(system, po, tol=float(p["newton_tol"]), max_iter=int(p["max_iter"]))
    spec = _spectrum_for(system, rng, int(p["spectrum_N"]))
    epsilon = float(p["epsilon_factor"]) * spec.lambda_u
    tau = float(p["tau_factor"]) * po.delta
    prof = shadowing_profile(system, sol, po, tau=tau, epsilon=epsilon)
    res = {
        "rational_denominator": q_den,
        "period": period,
        "segment_lengths": [n1, n2],
        "concatenation_times": times.c.tolist(),
        "pseudo_orbit_delta": po.delta,
        "solution": sol.to_json(),
        "residual": sol.residual,
        "newton_iters": sol.newton_iters,
        "tau": tau,
        "epsilon": epsilon,
        "profile": prof.to_json(),
        "lambda_u": spec.lambda_u,
    }
    rows = list(zip(prof.indices.tolist(), prof.distances.tolist(), prof.bounds.tolist()))
    return res, ["index", "distance", "bound"], rows


def _pick_block_point(ctx, rng) -> Point2:
    pts = [p for p, _ in ctx.block_points]
    return pts[int(rng.integers(0, len(pts)))]


def _run_ns_cert(cfg: ExperimentConfig):
    p = cfg.parameters
    system = cfg.system
    rng = np.random.default_rng(cfg.seed)
    eta_ratio = float(p["eta_ratio"])
    if p["fixed_point"]:
        fp = Point2(0.0, 0.0, system.space)
        spec = _spectrum_for(system, rng, int(p["spectrum_N"]))
        eps = 0.1 * min(abs(spec.lambda_s), spec.lambda_u)
        ctx = fixed_point_context(system, fp, epsilon=eps)
        x = fp
    else:
        ctx = _build_ctx(system, cfg.seed, p)
        x = Point2(*p["x"], system.space) if p["x"] is not None else _pick_block_point(ctx, rng)
    eta = eta_ratio * ctx.epsilon
    q = _q_from_param(p["q"], eta)
    cg = p["connector_gap"]
    cert = ns_certificate(
        system,
        x,
        int(p["m"]),
        int(p["n"]),
        float(p["theta"]),
        eta,
        q,
        ctx,
        connector_gap=None if cg is None else int(cg),
        newton_tol=float(p["newton_tol"]),
    )
    res = {"certificate": cert.to_json(include_margins=False), "context": ctx.to_json()}
    rows = list(
        zip(
            cert.margins_j.tolist(),
            cert.margins_distance.tolist(),
            cert.margins_allowance.tolist(),
        )
    )
    return res, ["j", "distance", "allowance"], rows


def _run_gns_cert(cfg: ExperimentConfig):
    p = cfg.parameters
    system = cfg.system
    rng = np.random.default_rng(cfg.seed)
    ctx = _build_ctx(system, cfg.seed, p)
    eta = float(p["eta_ratio"]) * ctx.epsilon
    q = _q_from_param(p["q"], eta)
    k = int(p["k"])
    ms = p["m"] if isinstance(p["m"], list) else [p["m"]] * k
    ns = p["n"] if isinstance(p["n"], list) else [p["n"]] * k
    if p["segment_points"] is not None:
        xs = [Point2(float(a), float(b), system.space) for a, b in p["segment_points"]]
    else:
        xs = [_pick_block_point(ctx, rng) for _ in range(k)]
    segments = [(xs[i], int(ms[i]), int(ns[i])) for i in range(k)]
    tgt = p["target_total_gap"]
    cert = gns_certificate(
        system,
        segments,
        float(p["theta"]),
        eta,
        q,
        ctx,
        target_total_gap=None if tgt is None else int(tgt),
        newton_tol=float(p["newton_tol"]),
    )
    res = {"certificate": cert.to_json(include_margins=False), "context": ctx.to_json()}
    rows = []
    for si, seg in enumerate(cert.segments):
        for j, d, a in zip(seg.margins_j, seg.margins_distance, seg.margins_allowance):
            rows.append((si, int(j), float(d), float(a)))
    return res, ["segment", "j", "distance", "allowance"], rows


def _run_sublinearity(cfg: ExperimentConfig):
    p = cfg.parameters
    system = cfg.system
    rng = np.random.default_rng(cfg.seed)
    ctx = _build_ctx(system, cfg.seed, p)
    x = Point2(*p["x"], system.space) if p["x"] is not None else _pick_block_point(ctx, rng)
    base_eta = float(p["eta_ratios"][0]) * ctx.epsilon
    q = _q_from_param(p["q"], base_eta)
    eta_list = [float(r) * ctx.epsilon for r in p["eta_ratios"]]
    mn_list = [tuple(int(v) for v in mn) for mn in p["mn_list"]]
    table = sublinearity_scan(
        system,
        x,
        float(p["theta"]),
        eta_list,
        mn_list,
        q,
        ctx,
        newton_tol=float(p["newton_tol"]),
        workers=_workers(),
    )
    res = {"table": table.to_json(), "x": [x.x, x.y], "epsilon": ctx.epsilon, "context": ctx.to_json()}
    rows = [(r.m, r.n, r.eta, r.K, r.ratio, int(r.in_ball)) for r in table.rows]
    return res, ["m", "n", "eta", "K", "ratio", "in_ball"], rows


def _run_domination(cfg: ExperimentConfig):
    p = cfg.parameters
    system = cfg.system
    rng = np.random.default_rng(cfg.seed)
    x = _seed_point(system, rng, p["x0"])
    S_list = [int(s) for s in p["S_list"]]
    n_pts = int(p["n_points"]) + max(S_list)
    pts, vu, vs, _, _ = _transport_sweeps(system, x, 0, n_pts)
    E, F = (vu, vs) if p["swap"] else (vs, vu)
    rep = check_domination(system, pts, E, F, S0=int(p["S0"]), lam=float(p["lam"]), S_list=S_list)
    res = {"x": [x.x, x.y], "swap": bool(p["swap"]), "lam": p["lam"], **rep.to_json()}
    return res, None, None


_RUNNERS = {
    "lyapunov": _run_lyapunov,
    "recurrence-scaling": _run_recurrence_scaling,
    "nonlacunarity": _run_nonlacunarity,
    "shadow": _run_shadow,
    "ns-cert": _run_ns_cert,
    "gns-cert": _run_gns_cert,
    "sublinearity": _run_sublinearity,
    "domination": _run_domination,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment; returns the process exit status."""
    outd = cfg.output_dir
    outd.mkdir(parents=True, exist_ok=True)
    manifest = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "system": cfg.system.to_json(),
        "parameters": cfg.parameters,
        "version": _VERSION,
    }
    _write_json(outd / "manifest.json", manifest)
    try:
        results, header, rows = _RUNNERS[cfg.experiment](cfg)
    except (NuspecError, ValueError) as err:
        report = dict(manifest)
        report["error"] = {
            "type": type(err).__name__,
            "message": str(err),
            "field": getattr(err, "field", None),
        }
        report["partial"] = True
        _write_json(outd / "report.json", report)
        print(f"error: {err}", file=sys.stderr)
        return 1
    report = dict(manifest)
    report["results"] = results
    _write_json(outd / "report.json", report)
    if header is not None:
        _write_csv(outd / "data.csv", header, rows)
    return 0


# ---------------------------------------------------------------------------
# report comparison


def compare_to_bound(recurrence_report: dict, lyapunov_report: dict, tolerance: float = 0.35) -> dict:
    """Compare a measured ball-return limsup against 1/lambda_u - 1/lambda_s.

    Refuses mismatched system fingerprints and non-hyperbolic spectra."""
    if recurrence_report.get("experiment") != "recurrence-scaling":
        raise ConfigError("first report must come from recurrence-scaling")
    if lyapunov_report.get("experiment") != "lyapunov":
        raise ConfigError("second report must come from lyapunov")
    if recurrence_report.get("system") != lyapunov_report.get("system"):
        raise ConfigError("mismatched system fingerprints between reports")
    lam_res = lyapunov_report["results"]
    lam_s = lam_res["lambda_s"]
    lam_u = lam_res["lambda_u"]
    if lam_s is None or lam_u is None or not (lam_s < 0 < lam_u):
        raise ConfigError("not hyperbolic: spectrum lacks exponents of both signs")
    bound = 1.0 / lam_u - 1.0 / lam_s
    measured = recurrence_report["results"]["limsup_estimate"]
    return {
        "system": recurrence_report["system"],
        "measured_limsup": measured,
        "bound": bound,
        "tolerance": tolerance,
        "pass": bool(measured is not None and measured <= bound * (1.0 + tolerance)),
        "censored_radii": [
            r
            for r, c in zip(
                recurrence_report["results"]["radii"], recurrence_report["results"]["censored"]
            )
            if c
        ],
    }


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nuspec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCHEMAS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--out", default=None)
    cmp_p = sub.add_parser("compare")
    cmp_p.add_argument("--recurrence", required=True)
    cmp_p.add_argument("--lyapunov", required=True)
    cmp_p.add_argument("--tolerance", type=float, default=0.35)
    cmp_p.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    if args.command == "compare":
        try:
            with open(args.recurrence, encoding="utf-8") as fh:
                rec = json.load(fh)
            with open(args.lyapunov, encoding="utf-8") as fh:
                lya = json.load(fh)
            table = compare_to_bound(rec, lya, tolerance=args.tolerance)
        except (NuspecError, OSError, json.JSONDecodeError) as err:
            print(f"refusal: {err}", file=sys.stderr)
            return 1
        print(f"{'measured':>12} {'bound':>12} {'pass':>6}")
        print(f"{table['measured_limsup']:>12.4f} {table['bound']:>12.4f} {str(table['pass']):>6}")
        if args.out:
            outd = Path(args.out)
            outd.mkdir(parents=True, exist_ok=True)
            _write_json(outd / "summary.json", table)
        return 0

    overrides = []
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        k, _, v = item.partition("=")
        overrides.append((k, _parse_set_value(v)))
    try:
        cfg = load_config(args.command, args.config, overrides, args.out)
    except (ConfigError, OSError, json.JSONDecodeError) as err:
        payload = {
            "error": {
                "type": type(err).__name__,
                "message": str(err),
                "field": getattr(err, "field", None),
            },
            "partial": True,
        }
        if args.out:
            outd = Path(args.out)
            outd.mkdir(parents=True, exist_ok=True)
            _write_json(outd / "report.json", payload)
        print(f"config error: {err}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
