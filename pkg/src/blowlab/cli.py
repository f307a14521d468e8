"""Command-line front end: ``blowlab run | verify | profile | catalog``.

A run directory holds ``config.canonical``, ``trajectory.pack``,
``run.json``, ``verify.json``, ``verify.txt`` and the ``frames/``,
``energy/`` and ``plots/`` folders.  ``verify.json`` is always computed from
the pack, so ``run`` and ``verify`` write identical bytes.

Exit codes: 0 all applicable checks pass, 1 some check fails, 2 config
error, 3 numerical or I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import config as config_mod
from .energy import monotonicity_report, series_csv
from .errors import BlowlabError, ConfigError, ContractError, DomainError, LookupFailure
from .heat_solver import (comparison_violations, estimate_blowup_time, initial_snapshot, read_pack,
                          run_to_blowup, write_pack)
from .nonlinearity import catalog_names, default_params, get_entry
from .ode_profile import build_profile, compute_F, h_of_s, invert_F
from .similarity import check_H_decay, frame_csv
from .verify import default_points, prepare, verify_analysis

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("BLOWLAB_THREADS", "1")))
    except ValueError:
        return 1


def bundled_configs() -> list:
    root = resources.files("blowlab") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def _config_text(path: str) -> tuple:
    """Text of a config file, or of a bundled config named ``path``."""
    if not os.path.exists(path) and path in bundled_configs():
        res = resources.files("blowlab") / "configs" / f"{path}.ini"
        return res.read_text(encoding="utf-8"), path
    with open(path, encoding="utf-8") as fh:
        return fh.read(), path


class _Writer:
    """Collects every output file and writes them in one sorted pass."""

    def __init__(self, root):
        self.root = Path(root)
        self.files = {}

    def put(self, rel: str, data):
        self.files[rel] = data.encode("utf-8") if isinstance(data, str) else bytes(data)

    def flush(self):
        for rel in sorted(self.files):
            path = self.root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(self.files[rel])


def solve(cfg):
    grid = cfg.grid()
    nl = cfg.nonlinearity()
    return run_to_blowup(initial_snapshot(grid, cfg.u0()), grid, nl, cfg.policy())


def rehydrate(cfg, data: bytes):
    """Trajectory and profile from pack bytes, with ``T_est`` re-estimated."""
    grid = cfg.grid()
    traj = read_pack(data, grid.spacing, grid.focus)
    if traj.grid.size != grid.size or not np.array_equal(traj.grid.nodes, grid.nodes):
        raise ContractError("pack grid does not match the configuration")
    nl = cfg.nonlinearity()
    profile = build_profile(nl, 1.0)
    traj.nl_summary = nl.summary()
    c = traj.snapshots[0].u_max
    if traj.grid.boundary == "dirichlet" and c > 0:
        traj.diagnostics.comparison_violations = comparison_violations(traj, profile, c)
    if traj.status == "blew_up":
        try:
            traj.T_est, traj.T_unc = estimate_blowup_time(traj, profile)
        except BlowlabError:
            pass
    return traj, profile


def _plot_script() -> str:
    return "\n".join([
        "# gnuplot script; run from this directory",
        'set datafile separator ","',
        "set terminal pngcairo size 900,600",
        'set output "type_I.png"',
        'set xlabel "s"',
        'plot "type_I.csv" using 1:2 skip 1 with linespoints title "u_max / psi"',
        'set output "profiles.png"',
        'set xlabel "y"',
        "files = system('ls ../frames/a0_*.csv')",
        'plot for [f in files] f using 1:2 skip 1 with lines title f',
        'set output "energy.png"',
        'set xlabel "s"',
        'plot "../energy/a0.csv" using 1:3 skip 1 with linespoints title "G", \\',
        '     "../energy/a0.csv" using 1:4 skip 1 with linespoints title "dissipation"',
        'set output "H_decay.png"',
        "set logscale y",
        'plot "../energy/H_a0.csv" using 1:2 skip 1 with linespoints title "max |H|"',
        "",
    ])


def analyze(cfg, traj, profile, run_id: str, writer: _Writer):
    an = prepare(traj, profile, cfg.Y_max, cfg.C_box)
    points = default_points(an, cfg.a_list)
    if an.blew_up:
        an.type_I()
        with ThreadPoolExecutor(max_workers=thread_count()) as ex:
            list(ex.map(an.frames, points + [float(a) for a in cfg.outer_a]))
    report = verify_analysis(an, cfg.a_list, run_id, None, cfg.outer_a)
    writer.put("verify.json", report.to_json())
    writer.put("verify.txt", report.to_text())
    r = an.type_I()
    rows = ["s,u_max_over_psi"] + [f"{float(s)!r},{float(v)!r}" for s, v in r]
    writer.put("plots/type_I.csv", "\n".join(rows) + "\n")
    writer.put("plots/plots.gp", _plot_script())
    if not an.blew_up:
        return report
    for i, a in enumerate(points):
        fr, _ = an.frames(a)
        for k, f in enumerate(fr):
            writer.put(f"frames/a{i}_{k:03d}.csv", f"# a={a!r} s={f.s!r}\n" + frame_csv(f))
        if len(fr) >= 5:
            ser = an.series(a)
            writer.put(f"energy/a{i}.csv", series_csv(ser, monotonicity_report(ser).violations))
            hd = check_H_decay(fr, an.profile.nl.alpha)
            rows = ["s,H_max,H_scaled"] + [f"{float(s)!r},{float(m)!r},{float(c)!r}"
                                            for s, m, c in zip(hd.s, hd.m, hd.scaled)]
            writer.put(f"energy/H_a{i}.csv", "\n".join(rows) + "\n")
    return report


def _run_id(canonical: str) -> str:
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _load_config(path: str):
    text, _ = _config_text(path)
    return config_mod.parse(text)


def cmd_run(path: str, out: str | None = None) -> int:
    try:
        cfg = _load_config(path)
    except ConfigError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    root = out or cfg.out_dir
    canonical = config_mod.canonical_text(cfg)
    writer = _Writer(root)
    try:
        traj = solve(cfg)
        pack = write_pack(traj)
        d = traj.diagnostics
        meta = {"status": traj.status, "steps": d.steps, "clamped": d.clamped,
                "min_undershoot": d.min_undershoot, "comparison_violations": d.comparison_violations,
                "T_est": traj.T_est, "T_unc": traj.T_unc}
        writer.put("config.canonical", canonical)
        writer.put("trajectory.pack", pack)
        writer.put("run.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
        traj, profile = rehydrate(cfg, pack)
        report = analyze(cfg, traj, profile, _run_id(canonical), writer)
        writer.flush()
    except (BlowlabError, FloatingPointError, OSError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(report.to_text())
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_verify(run_dir: str) -> int:
    root = Path(run_dir)
    try:
        canonical = (root / "config.canonical").read_text(encoding="utf-8")
        cfg = config_mod.parse(canonical)
    except ConfigError as exc:
        print(f"{root / 'config.canonical'}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read run directory: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    writer = _Writer(root)
    try:
        data = (root / "trajectory.pack").read_bytes()
        traj, profile = rehydrate(cfg, data)
        report = analyze(cfg, traj, profile, _run_id(canonical), writer)
        writer.flush()
    except (BlowlabError, FloatingPointError, OSError) as exc:
        print(f"verification failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(report.to_text())
    return EXIT_PASS if report.passed else EXIT_FAIL


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise DomainError(f"parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        v = v.strip()
        out[k.strip()] = math.e if v == "e" else float(v)
    return out


def cmd_profile(name: str, p: float = 3.0, T: float = 1.0, params=None, out: str | None = None) -> int:
    try:
        prm = _parse_params(params)
        if name in catalog_names():
            for k, v in default_params(name).items():
                if isinstance(v, int) and k in prm:
                    prm[k] = int(prm[k])
        nl = get_entry(name, p=p, **prm)
        profile = build_profile(nl, T)
    except (LookupFailure, DomainError) as exc:
        print(f"profile: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowlabError as exc:
        print(f"profile: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    taus = np.geomspace(1e-12, profile.F_A, 20)
    resid = max(abs(compute_F(nl, invert_F(profile, t)) - t) / t for t in taus)
    print(f"nonlinearity  {name} p={nl.p!r} params={dict(nl.params)}")
    print(f"beta          {profile.beta:.12g}")
    print(f"kappa         {profile.kappa:.12g}")
    print(f"alpha         {nl.alpha!r}")
    print(f"A             {profile.A!r}   F(A) = {profile.F_A!r}")
    print(f"s0            {profile.s0!r}")
    print(f"roundtrip     max |F(F^-1(tau)) - tau| / tau = {resid:.3e}")
    for s in (10.0, 20.0, 40.0):
        print(f"h({s:g}) - beta = {h_of_s(profile, s) - profile.beta:.6e}")
    if out:
        rows = ["log_X,log_F"] + [f"{float(x)!r},{float(f)!r}"
                                  for x, f in zip(profile.table_log_X, profile.table_log_F)]
        try:
            Path(out).write_text("\n".join(rows) + "\n", encoding="utf-8")
        except OSError as exc:
            print(f"cannot write {out}: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"table         {out} ({len(rows) - 1} rows)")
    return EXIT_PASS


def cmd_catalog() -> int:
    for name in catalog_names():
        nl = get_entry(name)
        print(f"{name:<14} alpha={nl.alpha:<8.4g} defaults={default_params(name)}")
    for name in bundled_configs():
        print(f"config {name}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowlab", description="Blow-up lab for u_t - Laplace u = u^p L(u).")
    sub = ap.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="solve, rescale, analyse and verify")
    r.add_argument("config", help="config path or bundled config name")
    r.add_argument("--out", help="run directory (default: [output] dir)")
    v = sub.add_parser("verify", help="re-run the analysis from a run directory")
    v.add_argument("run_dir")
    pr = sub.add_parser("profile", help="print the ODE profile of a nonlinearity")
    pr.add_argument("name")
    pr.add_argument("--p", type=float, default=3.0)
    pr.add_argument("--T", type=float, default=1.0)
    pr.add_argument("--param", action="append", metavar="KEY=VALUE")
    pr.add_argument("--out", help="write the F table as CSV")
    sub.add_parser("catalog", help="list nonlinearities and bundled configs")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "run":
        return cmd_run(args.config, args.out)
    if args.verb == "verify":
        return cmd_verify(args.run_dir)
    if args.verb == "profile":
        return cmd_profile(args.name, args.p, args.T, args.param, args.out)
    return cmd_catalog()
