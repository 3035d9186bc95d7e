"""Command-line front end.

    fracdiff mesh --h 0.0245 --out grid2.msh
    fracdiff table1 --out table1.csv
    fracdiff stationary --h 0.0245 --mu 10 --beta 0.5 --gamma 0 --ksteps 5,10,20,40
    fracdiff evolve --alpha 0.5 --tau 0.0025 --nsteps 40 --delta 50
    fracdiff sigma-sweep --alpha 0.95 --sigmas 0.5,0.3,0.1
    fracdiff verify

Settings may also come from a ``key = value`` file given with --config;
flags on the command line take precedence.  Exit codes: 0 success, 1 bad
configuration, 2 numerical failure, 3 failed verification check.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from . import experiments
from .assembly import Coefficients, assemble
from .geometry import GRID_H, Mesh, MeshError, generate_mesh, reference_grid, read_mesh, write_mesh
from .linalg import NonConvergence
from .timestepping import SchemeConfig

log = logging.getLogger("fracdiff")

EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 1, 2, 3

DEFAULTS = {
    "h": GRID_H[2],
    "mu": 10.0,
    "alpha": 0.5,
    "beta": 0.5,
    "sigma": 0.5,
    "tau": 0.0025,
    "nsteps": 40,
    "ksteps": "10",
    "delta": "auto",
    "gamma": 100.0,
    "stepper": "cn",
    "scheme": "regularized",
    "jobs": 1,
    "sigmas": "0.5,0.4,0.3,0.2,0.1,0.05,0.01,0.0",
    "mus": "1,10,100",
}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--mesh", help="mesh file to read")
    src.add_argument("--h", type=float, help="generate a mesh with this target edge length")
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--mu", type=float, help="Robin coefficient")
    common.add_argument("--alpha", type=float, help="fractional power of the evolution operator")
    common.add_argument("--beta", type=float, help="power of the stationary problem A^beta y = P f")
    common.add_argument("--sigma", type=float, help="regularization weight")
    common.add_argument("--tau", type=float, help="time step")
    common.add_argument("--nsteps", type=int, help="number of time levels N")
    common.add_argument("--ksteps", help="pseudo-time steps K (comma list for stationary)")
    common.add_argument("--delta", help="'auto' (0.99 lambda_1) or a value")
    common.add_argument("--gamma", type=float, help="steepness of the source term")
    common.add_argument("--stepper", choices=("euler", "cn"))
    common.add_argument("--scheme", choices=("regularized", "explicit"))
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--jobs", type=int, help="concurrent sweep points")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="fracdiff", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("mesh", parents=[common], help="generate and write a mesh")
    t = sub.add_parser("table1", parents=[common], help="lambda_1 on three grids")
    t.add_argument("--meshes", nargs=3, metavar="PATH", help="three mesh files, coarse to fine")
    t.add_argument("--mus", help="comma list of Robin coefficients")
    sub.add_parser("stationary", parents=[common], help="A^-beta P f over a K sweep")
    e = sub.add_parser("evolve", parents=[common], help="time evolution")
    e.add_argument("--monitor-d", action="store_true", help="record the D-norm (dense, n <= 600)")
    s = sub.add_parser("sigma-sweep", parents=[common], help="stability versus sigma")
    s.add_argument("--sigmas", help="comma list of sigma values")
    v = sub.add_parser("verify", parents=[common], help="oracle and invariant checks on a small mesh")
    v.set_defaults(h_verify=0.07)
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("config",):
            cfg[key] = value
    # an explicit --h beats a mesh path from the config file
    if args.h is not None:
        cfg.pop("mesh", None)
    elif cfg.get("mesh"):
        cfg["h"] = None
    for key in ("h", "mu", "alpha", "beta", "sigma", "tau", "gamma"):
        if key in cfg and cfg[key] is not None:
            cfg[key] = float(cfg[key])
    for key in ("nsteps", "jobs"):
        cfg[key] = int(cfg[key])
    return cfg


def _mesh(cfg) -> Mesh:
    if cfg.get("mesh"):
        return read_mesh(cfg["mesh"])
    return generate_mesh(cfg["h"])


def _delta(cfg):
    d = str(cfg["delta"]).strip().lower()
    if d == "auto":
        return None
    value = float(d)
    if value <= 0:
        raise ConfigError("delta must be positive")
    return value


def _scheme(cfg) -> SchemeConfig:
    ks = _ints(cfg["ksteps"])
    if len(ks) != 1:
        raise ConfigError("--ksteps takes a single value for this command")
    return SchemeConfig(alpha=cfg["alpha"], tau=cfg["tau"], n_steps=cfg["nsteps"], sigma=cfg["sigma"],
                        delta=_delta(cfg), ksteps=ks[0], stepper=cfg["stepper"], scheme=cfg["scheme"],
                        gamma=cfg["gamma"])


def write_report(path, header, rows, echo: dict, footer: dict | None = None) -> None:
    buf = io.StringIO()
    for key in sorted(echo):
        buf.write(f"# {key} = {echo[key]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    for key, value in (footer or {}).items():
        buf.write(f"# {key} = {value}\n")
    text = buf.getvalue()
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _echo(cfg, **extra) -> dict:
    keep = {k: v for k, v in cfg.items() if k not in ("out", "verbose", "command", "h_verify", "monitor_d")}
    keep.update(extra)
    return keep


def cmd_mesh(cfg) -> int:
    mesh = _mesh(cfg)
    if not cfg.get("out"):
        raise ConfigError("mesh needs --out")
    write_mesh(mesh, cfg["out"])
    log.info("wrote %d nodes, %d triangles to %s", mesh.n_nodes, mesh.n_triangles, cfg["out"])
    return 0


def cmd_table1(cfg) -> int:
    meshes = [read_mesh(p) for p in cfg["meshes"]] if cfg.get("meshes") else [reference_grid(g) for g in (1, 2, 3)]
    rows = experiments.table1(meshes, _floats(cfg["mus"]), jobs=cfg["jobs"])
    # wall time goes to the log so the CSV stays reproducible
    for g, mu, _, _, secs in rows:
        log.info("grid %d, mu=%g: %.3f s", g, mu, secs)
    write_report(cfg.get("out"), ("grid", "mu", "lambda1", "iterations"), [r[:4] for r in rows],
                 _echo(cfg, nodes=",".join(str(m.n_nodes) for m in meshes)))
    return 0


def cmd_stationary(cfg) -> int:
    sys_ = assemble(_mesh(cfg), Coefficients(mu=cfg["mu"]))
    res = experiments.stationary(sys_, cfg["beta"], _ints(cfg["ksteps"]), cfg["gamma"],
                                 cfg["stepper"], _delta(cfg), jobs=cfg["jobs"])
    write_report(cfg.get("out"), ("K", "eta", "y_max", "M_norm", "error_vs_finest"), res.rows,
                 _echo(cfg, delta=res.delta, lambda1=res.lambda1, nodes=sys_.n))
    return 0


def cmd_evolve(cfg) -> int:
    sys_ = assemble(_mesh(cfg), Coefficients(mu=cfg["mu"]))
    rows, status, scheme = experiments.evolve(sys_, _scheme(cfg), monitor_d=bool(cfg.get("monitor_d")))
    header = ("n", "t", "w_max", "M_norm") + (("D_norm",) if cfg.get("monitor_d") else ())
    write_report(cfg.get("out"), header, rows,
                 _echo(cfg, delta=scheme.delta, beta=scheme.beta, lambda1=sys_.lambda1, nodes=sys_.n),
                 {"status": status})
    return 0


def cmd_sigma_sweep(cfg) -> int:
    sys_ = assemble(_mesh(cfg), Coefficients(mu=cfg["mu"]))
    rows, star, scheme = experiments.sigma_sweep(sys_, _scheme(cfg), _floats(cfg["sigmas"]), jobs=cfg["jobs"])
    write_report(cfg.get("out"), ("sigma", "w_max", "max_M_norm", "status"), rows,
                 _echo(cfg, delta=scheme.delta, beta=scheme.beta, lambda1=sys_.lambda1, nodes=sys_.n),
                 {"sigma_star": star})
    return 0


def cmd_verify(cfg) -> int:
    from .verify import run_checks

    h = cfg["h"] if cfg.get("h") is not None and cfg["h"] != DEFAULTS["h"] else cfg["h_verify"]
    checks = run_checks(h=h, mu=cfg["mu"])
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    return 0 if all(c.passed for c in checks) else EXIT_VERIFY


COMMANDS = {
    "mesh": cmd_mesh,
    "table1": cmd_table1,
    "stationary": cmd_stationary,
    "evolve": cmd_evolve,
    "sigma-sweep": cmd_sigma_sweep,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except NonConvergence as exc:
        print(f"fracdiff: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, MeshError, ValueError, OSError) as exc:
        print(f"fracdiff: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
