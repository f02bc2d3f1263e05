"""Command-line interface for the experiment pipelines.

Subcommands:
    run          full preset pipeline with assertions (exit code 0 iff pass)
    spectrum     assemble + solve only, writing spectrum.csv and eigenvectors
    model-sigma  level unions, gaps, and interface sets only (no solves)
    localization localization diagnostics on stored eigenvector dumps
    gauge-check  gauge-invariance suite on a reduced instance
    convergence  sweep table of clustering distances / decay rates across p

Common flags: --config PATH (required), --out DIR, --p LIST, --window A,B,
--seed N, --threads N, --dry-run.
"""

import argparse
import os
import sys
from pathlib import Path

_THREAD_KEYS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS")


def _apply_threads(n, real_cli):
    """Cap BLAS/OpenMP pools; re-exec so the caps precede numpy's import."""
    want = str(int(n))
    if os.environ.get("_MAGSPEC_THREADS") == want:
        return
    for key in _THREAD_KEYS:
        os.environ[key] = want
    os.environ["_MAGSPEC_THREADS"] = want
    if real_cli:
        os.execv(sys.executable, [sys.executable] + sys.argv)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="magspec",
        description="Spectral experiments for lattice magnetic operators")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("run", "full preset pipeline with assertions"),
            ("spectrum", "assemble and solve; write spectrum.csv"),
            ("model-sigma", "level unions, gaps, interface sets only"),
            ("localization", "analyze stored eigenvector dumps"),
            ("gauge-check", "gauge invariance suite"),
            ("convergence", "p-sweep scaling table")]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="config file path")
        cmd.add_argument("--out", help="output directory override")
        cmd.add_argument("--p", help="comma-separated tensor powers override")
        cmd.add_argument("--window", help="energy window override: A,B")
        cmd.add_argument("--seed", type=int, help="seed override")
        cmd.add_argument("--threads", type=int, help="worker thread cap")
        cmd.add_argument("--dry-run", action="store_true",
                         help="print the plan; no solves")
    return parser


def _load_config(args):
    from dataclasses import replace

    from .config import parse_config, validate_config
    from .errors import ConfigError

    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    cfg = parse_config(path.read_text(encoding="utf-8"))
    updates = {}
    if args.out:
        updates["out_dir"] = args.out
    if args.p:
        updates["p_list"] = [int(s) for s in args.p.split(",") if s]
    if args.window:
        a, b = (float(s) for s in args.window.split(","))
        updates["window"] = (a, b)
    if args.seed is not None:
        updates["seed"] = args.seed
    if updates:
        cfg = replace(cfg, **updates)
        validate_config(cfg)
    return cfg


def _print_assertions(summary):
    for item in summary.get("assertions", []):
        tag = "PASS" if item["passed"] else "FAIL"
        line = f"[{tag}] {item['name']}"
        if item.get("measured") is not None:
            line += f"  measured={item['measured']}"
        if item.get("threshold") is not None:
            line += f"  threshold={item['threshold']}"
        print(line)
    if "error" in summary:
        print(f"[ERROR] {summary['error']}")


def _cmd_run(cfg, args):
    from .experiments import run_experiment

    result = run_experiment(cfg, dry_run=args.dry_run)
    if args.dry_run:
        for plan in result.summary["plans"]:
            print(f"p={plan['p']}: {plan['kind']} extent={plan['extent']:.4g} "
                  f"nx={plan['nx']} h={plan['h']:.5g} sites={plan['n_sites']}")
        return 0
    _print_assertions(result.summary)
    print(f"artifacts: {result.out_dir}")
    return result.exit_code


def _cmd_spectrum(cfg, args):
    import numpy as np

    from .experiments import (_SPECTRUM_HEADER, _branch_of, _spectrum_rows,
                              build_instance, sigma_ceiling, _write_csv)
    from .model import distances_to_sigma, sigma_region
    from .solvers import lowest_eigs, window_eigs, write_slice

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.dry_run:
        return _cmd_run(cfg, args)
    path = out / "spectrum.csv"
    if path.exists():
        path.unlink()
    for p in cfg.p_list:
        inst = build_instance(cfg, p)
        op, b = inst["op"], inst["b"]
        if cfg.window is not None:
            sl = window_eigs(op, cfg.window, tol=cfg.tol, seed=cfg.seed)
            top = cfg.window[1]
        else:
            sl = lowest_eigs(op, min(20, op.n - 1), tol=cfg.tol,
                             seed=cfg.seed)
            top = float(sl.values.max())
        ceiling = cfg.cutoff if cfg.cutoff is not None \
            else sigma_ceiling(top, cfg.field_spec.max_intensity())
        sigma = sigma_region(b, inst["potential"], cutoff=ceiling)
        dists = distances_to_sigma(sl.values, sigma) if len(sl) \
            else np.empty(0)
        branches = [_branch_of(lam, sigma) for lam in sl.values]
        _write_csv(path, _SPECTRUM_HEADER,
                   _spectrum_rows(cfg, p, inst["plan"]["h"], sl, dists,
                                  branches), append=True)
        write_slice(sl, out / f"eigs_p{p}.bsev")
        print(f"p={p}: {len(sl)} pairs ({sl.certificate}), N={op.n}")
    print(f"artifacts: {out}")
    return 0


def _cmd_model_sigma(cfg, args):
    from .config import plan_geometry
    from .experiments import _dump_json, _sigma_entry, sigma_ceiling, \
        build_potential
    from .fields import sample_field
    from .lattice import build_lattice
    from .model import interface_set, sigma_region

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for p in cfg.p_list:
        plan = plan_geometry(cfg, p)
        if args.dry_run:
            print(f"p={p}: nx={plan['nx']} h={plan['h']:.5g}")
            continue
        lattice = build_lattice(plan["kind"], plan["extent"], plan["extent"],
                                plan["nx"], plan["nx"])
        b = sample_field(cfg.field_spec, lattice)
        potential = build_potential(cfg, lattice)
        top = cfg.window[1] if cfg.window is not None else 1.0
        ceiling = cfg.cutoff if cfg.cutoff is not None \
            else sigma_ceiling(top, cfg.field_spec.max_intensity())
        sigma = sigma_region(b, potential, cutoff=ceiling)
        interface = None
        if cfg.window is not None:
            interface = interface_set(lattice, b, potential, cfg.window,
                                      ceiling)
        entries.append(_sigma_entry(p, plan, sigma, interface))
        print(f"p={p}: {len(sigma.intervals)} intervals, "
              f"{len(entries[-1]['gaps'])} gaps")
    if not args.dry_run:
        _dump_json(out / "sigma.json", {"experiment": cfg.experiment,
                                        "entries": entries})
        print(f"artifacts: {out}")
    return 0


def _cmd_localization(cfg, args):
    from .analysis import localization_report
    from .experiments import build_instance, sigma_ceiling, _write_csv
    from .model import interface_set
    from .solvers import read_slice

    out = Path(cfg.out_dir)
    if args.dry_run:
        return _cmd_run(cfg, args)
    if cfg.window is None:
        print("localization needs a gap window in the config",
              file=sys.stderr)
        return 2
    path = out / "localization.csv"
    if path.exists():
        path.unlink()
    b_max = cfg.field_spec.max_intensity()
    wrote = 0
    for p in cfg.p_list:
        dump = out / f"eigs_p{p}.bsev"
        if not dump.exists():
            print(f"p={p}: no dump {dump}, skipping", file=sys.stderr)
            continue
        sl = read_slice(dump)
        inst = build_instance(cfg, p)
        if sl.vectors.shape[0] != inst["op"].n:
            print(f"p={p}: dump dimension {sl.vectors.shape[0]} does not "
                  f"match the configured lattice ({inst['op'].n})",
                  file=sys.stderr)
            return 2
        ceiling = cfg.cutoff if cfg.cutoff is not None \
            else sigma_ceiling(cfg.window[1], b_max)
        interface = interface_set(inst["lattice"], inst["b"],
                                  inst["potential"], cfg.window, ceiling)
        rep = localization_report(sl, interface, p, b_max,
                                  b_min=cfg.field_spec.min_intensity(),
                                  c_min=cfg.c_min, c_cap=cfg.c_cap)
        _write_csv(path,
                   ["experiment", "p", "h", "seed", "index", "c_star",
                    "kappa", "W_at_cmin"],
                   [[cfg.experiment, p, inst["plan"]["h"], cfg.seed, e.index,
                     e.c_star, e.kappa, e.w_at_cmin] for e in rep.entries],
                   append=True)
        wrote += len(rep.entries)
        print(f"p={p}: {len(rep.entries)} entries")
    print(f"artifacts: {out}")
    return 0 if wrote else 2


def _cmd_gauge_check(cfg, args):
    import numpy as np
    from dataclasses import replace

    from .experiments import build_instance
    from .fields import apply_gauge_transform, plaquette_holonomy
    from .operators import assemble_H
    from .solvers import dense_spectrum

    # reduced instance: dense-oracle sized regardless of the sweep
    small = replace(cfg, nx=24, p_list=[min(cfg.p_list)])
    if args.dry_run:
        print(f"gauge check on nx=24, p={small.p_list[0]}")
        return 0
    p = small.p_list[0]
    inst = build_instance(small, p)
    lattice, links = inst["lattice"], inst["links"]
    rng = np.random.default_rng(cfg.seed)
    phases = np.exp(2j * np.pi * rng.random(lattice.n_sites))
    moved = apply_gauge_transform(links, phases)

    hol0 = plaquette_holonomy(links)
    hol1 = plaquette_holonomy(moved)
    drift = float(np.abs(np.angle(np.exp(1j * (hol1 - hol0)))).max())

    w0 = dense_spectrum(inst["op"]).values
    w1 = dense_spectrum(assemble_H(lattice, moved, inst["potential"],
                                   p)).values
    scale = float(np.abs(w0).max())
    spec_dev = float(np.abs(w1 - w0).max() / scale)

    ok = drift <= 1e-12 and spec_dev <= 1e-10
    print(f"[{'PASS' if ok else 'FAIL'}] gauge invariance  "
          f"holonomy_drift={drift:.3e}  spectrum_rel_dev={spec_dev:.3e}")
    return 0 if ok else 1


def _cmd_convergence(cfg, args):
    from .experiments import run_experiment, _write_csv

    if args.dry_run:
        return _cmd_run(cfg, args)
    result = run_experiment(cfg)
    summary = result.summary
    out = Path(cfg.out_dir)
    rows = []
    per_p = summary.get("results", {}).get("per_p", [])
    for entry in per_p:
        rows.append([cfg.experiment, entry["p"], cfg.seed,
                     entry.get("max_distance", ""),
                     entry.get("kappa_median", "")])
        print(f"p={entry['p']}: "
              + "  ".join(f"{k}={v}" for k, v in entry.items() if k != "p"))
    _write_csv(out / "convergence.csv",
               ["experiment", "p", "seed", "max_distance", "kappa_median"],
               rows)
    exponent = summary.get("results", {}).get("clustering_exponent")
    if exponent is not None:
        print(f"clustering exponent: {exponent:.4f}")
    _print_assertions(summary)
    return result.exit_code


_COMMANDS = {
    "run": _cmd_run,
    "spectrum": _cmd_spectrum,
    "model-sigma": _cmd_model_sigma,
    "localization": _cmd_localization,
    "gauge-check": _cmd_gauge_check,
    "convergence": _cmd_convergence,
}


def main(argv=None):
    real_cli = argv is None
    args = build_parser().parse_args(argv)
    if args.threads:
        _apply_threads(args.threads, real_cli)
    from .errors import MagspecError

    try:
        cfg = _load_config(args)
        return _COMMANDS[args.command](cfg, args)
    except MagspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
