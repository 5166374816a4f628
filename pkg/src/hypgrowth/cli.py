"""Command line entry point.

Every artifact-producing command writes its tables into ``--out`` (default
``$HYPGROWTH_OUT`` or ``./hypgrowth-out``) together with ``manifest.json``
listing the command line, configuration, seeds, version, wall time and a
sha256 digest of each output.  ``--check-manifest`` replays a manifest into a
scratch directory and compares digests.

Exit codes: 0 success, 2 usage error, 3 invariant violation (a JSON error
report naming the module and error class goes to stderr), 4 manifest mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import HarnessConfig, ThermoConfig
from .errors import InvariantError

OUT_ENV = "HYPGROWTH_OUT"


class UsageError(Exception):
    pass


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return x


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# shared setup

def load_config_file(path):
    """JSON, or TOML when the interpreter ships tomllib."""
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file {path} not found")
    if p.suffix == ".toml":
        try:
            import tomllib
        except ImportError:
            raise UsageError("TOML config needs Python 3.11+; use JSON") from None
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    with open(p) as fh:
        return json.load(fh)


def thermo_config(args, filecfg):
    keys = ThermoConfig.__dataclass_fields__
    vals = {k: v for k, v in filecfg.get("thermo", filecfg).items() if k in keys}
    if getattr(args, "bins", None):
        vals["bins"] = args.bins
    if getattr(args, "extrapolation", None):
        vals["extrapolation"] = args.extrapolation
    try:
        return ThermoConfig(**vals)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad thermo config: {exc}") from None


def resolve_domain(args):
    from .groups import get_group, load_domain_json
    if getattr(args, "domain_file", None):
        p = Path(args.domain_file)
        if not p.exists():
            raise UsageError(f"domain file {p} not found")
        return load_domain_json(p.read_text(), name=p.stem), {"domain_sha256": sha256(p)}
    try:
        _, dom = get_group(args.group)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    return dom, {"group": args.group}


def build_dynamics(dom):
    from .boundary_map import build_bowen_series, build_finite_partition
    f = build_bowen_series(dom)
    return f, build_finite_partition(f)


def spectrum_for(part, cfg):
    from .thermo import pressure_curve, spectrum_curve
    curve = pressure_curve(part, cfg)
    return curve, spectrum_curve(curve, cfg)


def parse_floats(s):
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma separated numbers, got {s!r}") from None


def parse_ints(s):
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma separated integers, got {s!r}") from None


# ---------------------------------------------------------------------------
# commands; each returns (outputs, extra manifest fields)

def cmd_group_validate(args, out, filecfg):
    from .groups import validate
    dom, ident = resolve_domain(args)
    rep = validate(dom)
    print(json.dumps(rep, default=_json_default, sort_keys=True))
    return [write_json(out / "validate.json", rep)], ident


def cmd_bsmap_show(args, out, filecfg):
    from .boundary_map import build_bowen_series
    dom, ident = resolve_domain(args)
    desc = build_bowen_series(dom).describe()
    rows = [(r["branch"], r["label"], r["P"], r["P_next"], r["Q_next"]) for r in desc["branches"]]
    for r in rows:
        print(*(_fmt(v) for v in r))
    return [write_csv(out / "bsmap.csv", ["branch", "label", "P", "P_next", "Q_next"], rows)], ident


def cmd_partition_export(args, out, filecfg):
    dom, ident = resolve_domain(args)
    _, part = build_dynamics(dom)
    data = part.to_json()
    data["spectral_radius"] = part.spectral_radius()
    print(f"{len(data['arcs'])} arcs, spectral radius {data['spectral_radius']:.6f}")
    return [write_json(out / "partition.json", data)], ident


def cmd_geodesic_cutseq(args, out, filecfg):
    from .geodesics import growth_trace, sample_geodesics, trace_rows
    from .hyperbolic import OrientedGeodesic
    dom, ident = resolve_domain(args)
    f, _ = build_dynamics(dom)
    if args.src is not None and args.dst is not None:
        geo = OrientedGeodesic(args.src, args.dst)
    else:
        geo = sample_geodesics(dom, 1, args.seed, f=f)[0]
    tr = growth_trace(dom, f, geo, args.n)
    path = write_csv(out / "cutseq.csv", ["n", "symbol", "t_n", "s_n", "u_n", "deformed"],
                     trace_rows(tr))
    print(f"t_n/n = {tr.t[-1] / args.n:.6f}")
    return [path], {**ident, "seed": args.seed, "src": geo.src, "dst": geo.dst}


def cmd_pressure_compute(args, out, filecfg):
    from .thermo import cylinder_pressure_many, pressure_curve, transfer_pressure
    dom, ident = resolve_domain(args)
    cfg = thermo_config(args, filecfg)
    _, part = build_dynamics(dom)
    if args.beta:
        betas = parse_floats(args.beta)
        lo, hi = cylinder_pressure_many(part, betas, args.bracket_n, cap=cfg.cylinder_cap)
        rows = [(b, l, h, transfer_pressure(part, b, cfg.bins, cfg.quad_nodes))
                for b, l, h in zip(betas, lo, hi)]
    else:
        curve = pressure_curve(part, cfg)
        rows = [(b, math.nan, math.nan, p) for b, p in zip(curve.betas, curve.P_hat)]
    for r in rows:
        print(*(_fmt(v) for v in r))
    path = write_csv(out / "pressure.csv", ["beta", "P_inf", "P_sup", "P_hat"], rows)
    return [path], {**ident, "config": cfg.to_dict(), "bracket_n": args.bracket_n}


def cmd_spectrum_compute(args, out, filecfg):
    dom, ident = resolve_domain(args)
    cfg = thermo_config(args, filecfg)
    _, part = build_dynamics(dom)
    curve, sp = spectrum_for(part, cfg)
    nan = math.nan
    rows = list(sp.rows())
    # I is +inf off the spectrum; with cusps alpha_G = 0 and I(0) = 0 directly
    if dom.cusps:
        rows.insert(0, (0.0, nan, nan, 0.0, nan))
    else:
        rows.insert(0, (sp.alpha_lo - 0.1, nan, nan, math.inf, nan))
    rows.append((sp.alpha_hi + 0.1, nan, nan, math.inf, nan))
    path = write_csv(out / "spectrum.csv", ["alpha", "beta_of_alpha", "b", "I", "I_prime"],
                     rows)
    p2 = write_csv(out / "pressure.csv", ["beta", "P_hat"], zip(curve.betas, curve.P_hat))
    print(f"alpha_G = {sp.alpha_G:.6f}, alpha range [{sp.alpha_lo:.6f}, {sp.alpha_hi:.6f}]")
    return [path, p2], {**ident, "config": cfg.to_dict(), "alpha_G": sp.alpha_G}


def cmd_ldp_simulate(args, out, filecfg):
    from . import ldp
    dom, ident = resolve_domain(args)
    cfg = thermo_config(args, filecfg)
    hv = {k: v for k, v in filecfg.get("harness", {}).items()
          if k in HarnessConfig.__dataclass_fields__}
    if args.n_list:
        hv["n_list"] = parse_ints(args.n_list)
    if args.samples:
        hv["samples"] = args.samples
    if args.seed is not None:
        hv["seed"] = args.seed
    hv["method"] = args.method
    try:
        hcfg = HarnessConfig(**hv)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad harness config: {exc}") from None
    f, part = build_dynamics(dom)
    _, sp = spectrum_for(part, cfg)
    if args.alpha_list:
        cells = []
        for a in parse_floats(args.alpha_list):
            cells.append((a, ldp.UPPER if a >= sp.alpha_G else ldp.LOWER))
    else:
        cells = ldp.default_alphas(sp)
    rep = ldp.simulate(f, part, sp, cells, hcfg, cylinder_n=args.cylinder_n,
                       cap=cfg.cylinder_cap)
    outputs = [write_csv(out / "tails.csv", ["alpha", "side", "n", "m_hat", "se", "hits",
                                              "method"], rep.rows())]
    srows = [(a, s, rep.rates.get(a, math.nan), sl) for (a, s), sl in rep.slopes.items()]
    outputs.append(write_csv(out / "slopes.csv", ["alpha", "side", "I", "slope"], srows))
    for r in srows:
        print(*(_fmt(v) for v in r))
    extra = {**ident, "config": cfg.to_dict(), "harness": hcfg.to_dict(),
             "failures": rep.failures}
    if hcfg.method != "cylinder" and len(cells) >= 2:
        try:
            ldp.calibrate(rep, sp, bool(dom.cusps), hcfg.min_hits)
            outputs.append(write_csv(out / "margins.csv", ["alpha", "n", "margin"],
                                     [(m["alpha"], m["n"], m["margin"]) for m in rep.margins]))
            extra["kappas"] = rep.kappas
        except InvariantError as exc:
            extra["failures"] = rep.failures + [exc.report()]
    return outputs, extra


def cmd_er_law(args, out, filecfg):
    from .geodesics import erdos_renyi_statistic, growth_trace, sample_geodesics
    from .thermo import legendre_data
    dom, ident = resolve_domain(args)
    if dom.cusps:
        raise UsageError("the Erdos-Renyi law is stated for groups without cusps")
    cfg = thermo_config(args, filecfg)
    f, part = build_dynamics(dom)
    _, sp = spectrum_for(part, cfg)
    alpha = args.alpha if args.alpha is not None else \
        sp.alpha_G + args.fraction * (sp.alpha_hi - sp.alpha_G)
    _, b, I = legendre_data(sp.fit, alpha)
    rows = []
    for k, geo in enumerate(sample_geodesics(dom, args.count, args.seed, f=f)):
        tr = growth_trace(dom, f, geo, args.n, with_s=False)
        rows.append((k, geo.src, geo.dst, erdos_renyi_statistic(tr.t, I, args.n)))
    mean = float(np.mean([r[3] for r in rows]))
    print(f"alpha {alpha:.6f}: mean statistic {mean:.4f}, limit 1/(1-b) = {1 / (1 - b):.4f}")
    path = write_csv(out / "er_law.csv", ["geodesic", "src", "dst", "statistic"], rows)
    return [path], {**ident, "alpha": alpha, "limit": 1 / (1 - b), "mean": mean,
                    "seed": args.seed, "config": cfg.to_dict()}


# ---------------------------------------------------------------------------
# parser

def _common(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--group", default="octagon", help="built-in group id")
    g.add_argument("--domain-file", help="JSON fundamental domain")
    p.add_argument("--config", help="JSON (or TOML on 3.11+) config file")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./hypgrowth-out)")


def build_parser():
    ap = argparse.ArgumentParser(prog="hypgrowth", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--check-manifest", metavar="MANIFEST",
                    help="replay a manifest and verify output digests")
    top = ap.add_subparsers(dest="area")

    def area(name, action, fn, help_):
        sp = top.add_parser(name, help=help_).add_subparsers(dest="action", required=True)
        p = sp.add_parser(action, help=help_)
        _common(p)
        p.set_defaults(fn=fn)
        return p

    area("group", "validate", cmd_group_validate, "check side pairings, corners, relators")
    area("bsmap", "show", cmd_bsmap_show, "print the Bowen-Series branches")
    area("partition", "export", cmd_partition_export, "write the finite Markov partition")

    p = area("geodesic", "cutseq", cmd_geodesic_cutseq, "cutting sequence and growth trace")
    p.add_argument("--src", type=float)
    p.add_argument("--dst", type=float)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)

    p = area("pressure", "compute", cmd_pressure_compute, "pressure curve or brackets")
    p.add_argument("--beta", help="comma separated betas (brackets + transfer estimate)")
    p.add_argument("--bracket-n", type=int, default=6)
    p.add_argument("--bins", type=int)
    p.add_argument("--extrapolation", choices=["none", "richardson"])

    p = area("spectrum", "compute", cmd_spectrum_compute, "Legendre data b(alpha), I(alpha)")
    p.add_argument("--bins", type=int)

    p = area("ldp", "simulate", cmd_ldp_simulate, "tail measures and slopes")
    p.add_argument("--alpha-list")
    p.add_argument("--n-list")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=["mc", "cylinder", "both"], default="mc")
    p.add_argument("--cylinder-n", type=int, default=8)

    p = top.add_parser("er-law", help="Erdos-Renyi window statistic")
    _common(p)
    p.set_defaults(fn=cmd_er_law)
    p.add_argument("--alpha", type=float)
    p.add_argument("--fraction", type=float, default=0.2,
                   help="alpha = alpha_G + fraction * (alpha_max - alpha_G)")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    return ap


def run(argv, out_override=None):
    """Parse and execute; returns (exit code, manifest dict or None)."""
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), None
    if args.check_manifest:
        return check_manifest(args.check_manifest), None
    if not getattr(args, "fn", None):
        ap.print_usage(sys.stderr)
        return 2, None
    out = Path(out_override or args.out or os.environ.get(OUT_ENV, "hypgrowth-out"))
    t0 = time.perf_counter()
    try:
        filecfg = load_config_file(args.config)
        out.mkdir(parents=True, exist_ok=True)
        outputs, extra = args.fn(args, out, filecfg)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2, None
    except InvariantError as exc:
        print(json.dumps(exc.report(), sort_keys=True, default=_json_default), file=sys.stderr)
        return 3, None
    manifest = {
        "command": list(argv),
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "outputs": {p.name: sha256(p) for p in outputs},
        "seeds": _seeds(extra),
        **extra,
    }
    write_json(out / "manifest.json", manifest)
    return 0, manifest


def _seeds(extra):
    out = {k: v for k, v in extra.items() if k == "seed"}
    if "harness" in extra:
        out["seed"] = extra["harness"]["seed"]
    return out


def _strip_out(argv):
    res, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        res.append(a)
    return res


def check_manifest(path):
    p = Path(path)
    if not p.exists():
        print(f"error: manifest {path} not found", file=sys.stderr)
        return 2
    man = json.loads(p.read_text())
    with tempfile.TemporaryDirectory() as tmp:
        code, new = run(_strip_out(man["command"]), out_override=tmp)
        if code != 0:
            return code
        bad = [k for k, v in man["outputs"].items() if new["outputs"].get(k) != v]
    if bad:
        print(f"digest mismatch: {', '.join(bad)}", file=sys.stderr)
        return 4
    print(f"manifest ok: {len(man['outputs'])} outputs reproduced")
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
