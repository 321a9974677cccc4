"""Command-line entry point.

Every subcommand takes an optional config file of ``key=value`` lines
(``#`` starts a comment) followed by ``key=value`` overrides::

    dodecawave mesh level=2 out=mesh2.txt
    dodecawave run run.cfg t_end=4
    dodecawave horizon model=inflating t_star=3.5 R=0.1

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

REQUIRED = object()


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ config


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{origin}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise UsageError(f"{origin}:{lineno}: empty key")
        out[key] = value
    return out


def gather(items: list[str]) -> dict[str, str]:
    """Merge config files and ``key=value`` overrides, later items winning."""
    conf = {}
    for item in items:
        if "=" in item:
            conf.update(parse_config_text(item, "<argument>"))
        else:
            path = Path(item)
            try:
                text = path.read_text()
            except OSError as exc:
                raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
            conf.update(parse_config_text(text, str(path)))
    return conf


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _points(text: str) -> list[tuple[float, float, float]]:
    pts = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = [float(v) for v in chunk.split(",")]
        if len(vals) != 3:
            raise ValueError(f"probe {chunk.strip()!r} needs three coordinates")
        pts.append(tuple(vals))
    return pts


def _flag(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


MESH_KEYS = {"level": (int, None), "mesh": (str, None)}
MODEL_KEYS = {"model": (str, REQUIRED), "H": (float, 1.0)}
FIELD_KEYS = {"state": (str, None), "constant": (float, None)}

SCHEMAS = {
    "mesh": {"level": (int, REQUIRED), "out": (str, REQUIRED)},
    "run": {
        **MESH_KEYS,
        **MODEL_KEYS,
        "t_star": (float, REQUIRED),
        "t_end": (float, REQUIRED),
        "dt": (float, REQUIRED),
        "init": (str, REQUIRED),
        "value": (float, 0.0),
        "velocity": (float, 0.0),
        "seed": (int, 0),
        "count": (int, 100),
        "probes": (_points, []),
        "snapshots": (_floats, None),
        "log_interval": (float, 0.05),
        "start_order": (int, 1),
        "norm": (_flag, True),
        "out": (str, REQUIRED),
    },
    "modes": {
        **MODEL_KEYS,
        "beta_max": (int, REQUIRED),
        "data": (str, "uniform"),
        "u0": (float, 1.0),
        "u0p": (float, 0.0),
        "seed": (int, 0),
        "t_end": (float, 10.0),
        "dt": (float, 1e-4),
        "out": (str, REQUIRED),
    },
    "sky": {
        **MESH_KEYS,
        **FIELD_KEYS,
        "chi": (_floats, None),
        "R": (_floats, None),
        "n_theta": (int, 512),
        "n_phi": (int, 1024),
        "out": (str, REQUIRED),
    },
    "horizon": {
        **MODEL_KEYS,
        "t_star": (float, None),
        "R": (float, None),
        "t": (float, None),
        "t_ls": (float, None),
        "t_obs": (float, None),
    },
    "tiling": {
        **MESH_KEYS,
        **FIELD_KEYS,
        "cells": (str, None),
        "out": (str, REQUIRED),
    },
    "selftest": {"criteria": (str, None)},
}


def validate(command: str, conf: dict[str, str]) -> dict:
    schema = SCHEMAS[command]
    unknown = sorted(set(conf) - set(schema))
    if unknown:
        raise UsageError(f"{command}: unknown key(s): {', '.join(unknown)}")
    out = {}
    for key, (conv, default) in schema.items():
        if key not in conf:
            if default is REQUIRED:
                raise UsageError(f"{command}: missing required key '{key}'")
            out[key] = default
            continue
        try:
            out[key] = conv(conf[key])
        except ValueError as exc:
            raise UsageError(f"{command}: bad value for '{key}': {exc}") from None
    return out


# ---------------------------------------------------------------- helpers


def _model(cfg):
    from .models import from_name

    try:
        return from_name(cfg["model"], cfg["H"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _mesh(cfg, default_level=None):
    from .mesh import build_mesh, read_mesh

    if cfg.get("mesh") is not None and cfg.get("level") is not None:
        raise UsageError("give either 'level' or 'mesh', not both")
    if cfg.get("mesh") is not None:
        return read_mesh(cfg["mesh"])
    level = cfg.get("level", default_level)
    if level is None:
        raise UsageError("missing required key 'level' (or 'mesh')")
    if level < 0:
        raise UsageError("level must be non-negative")
    return build_mesh(level)


def _field(cfg, mesh):
    from .evolution import read_state

    if (cfg["state"] is None) == (cfg["constant"] is None):
        raise UsageError("give exactly one of 'state' or 'constant'")
    if cfg["constant"] is not None:
        return np.full(mesh.n_classes, cfg["constant"])
    U = read_state(cfg["state"])
    if len(U) != mesh.n_classes:
        raise ValueError(f"{cfg['state']}: {len(U)} values for a mesh with {mesh.n_classes} classes")
    return U


def _say(text=""):
    print(text, flush=True)


# --------------------------------------------------------------- commands


def cmd_mesh(cfg):
    from .mesh import MAX_LEVEL, build_mesh, write_mesh

    if not 0 <= cfg["level"] <= MAX_LEVEL:
        raise UsageError(f"level must lie in [0, {MAX_LEVEL}]")
    mesh = build_mesh(cfg["level"])
    write_mesh(mesh, cfg["out"])
    _say(f"level {mesh.level}: {len(mesh.tets)} tets, {mesh.n_vertices} vertices, "
         f"{mesh.n_nodes} nodes, {mesh.n_classes} classes -> {cfg['out']}")


def _init_spec(cfg):
    from .evolution import InitSpec, init_preset

    name = cfg["init"].lower()
    if name == "constant":
        spec = InitSpec(constant=cfg["value"], label=f"constant {cfg['value']:g}")
    else:
        try:
            spec = init_preset(name, seed=cfg["seed"], count=cfg["count"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        spec.constant = cfg["value"]
    spec.velocity = cfg["velocity"]
    return spec


def cmd_run(cfg):
    from .evolution import run
    from .fem import assemble

    model = _model(cfg)
    if cfg["start_order"] not in (1, 2):
        raise UsageError("start_order must be 1 or 2")
    spec = _init_spec(cfg)
    mesh = _mesh(cfg, default_level=1)
    matrices = assemble(mesh)
    snaps = cfg["snapshots"] if cfg["snapshots"] is not None else [cfg["t_end"]]
    traj = run(
        mesh, matrices, spec, cfg["t_star"], cfg["t_end"], dt=cfg["dt"], model=model,
        probes=cfg["probes"], snapshot_times=snaps, log_interval=cfg["log_interval"],
        start_order=cfg["start_order"], out_dir=cfg["out"], with_norm=cfg["norm"],
    )
    _say(f"{traj.state.n} steps, {len(traj.times)} log records, "
         f"E_d {traj.energy[0]:.6g} -> {traj.energy[-1]:.6g}, outputs in {cfg['out']}")


def mode_table(model, beta_max, u0, u0p, t_end=10.0, dt=1e-4):
    """Rows ``beta q2 A+ A- u_inf max_dev`` for the admissible labels up to ``beta_max``."""
    from .spectral import (
        asymptotic_profile,
        coeffs_from_data,
        eigen_betas,
        mode_closed,
        mode_ode_rk4,
    )

    labels = eigen_betas(beta_max)
    if not labels:
        return []
    beta = np.array([lab.beta for lab in labels])
    u0 = np.broadcast_to(np.asarray(u0, float), beta.shape)
    u0p = np.broadcast_to(np.asarray(u0p, float), beta.shape)
    coeffs = coeffs_from_data(model, labels, u0, u0p)
    u_inf = asymptotic_profile(model, labels, coeffs)
    every = max(1, int(round(0.01 / dt)))
    traj = mode_ode_rk4(model, labels, u0, u0p, 0.0, t_end, dt, every)
    exact = mode_closed(model, labels, coeffs, traj.t[:, None]).u
    dev = np.abs(traj.u - exact).max(axis=0)
    return [
        (int(b), int(b * b - 1), float(ap), float(am), float(ui), float(d))
        for b, ap, am, ui, d in zip(beta, coeffs.a_plus, coeffs.a_minus, u_inf, dev)
    ]


def cmd_modes(cfg):
    model = _model(cfg)
    if cfg["beta_max"] < 1:
        raise UsageError("beta_max must be at least 1")
    from .spectral import eigen_betas

    n = len(eigen_betas(cfg["beta_max"]))
    if cfg["data"] == "uniform":
        u0, u0p = cfg["u0"], cfg["u0p"]
    elif cfg["data"] == "random":
        rng = np.random.default_rng(cfg["seed"])
        u0, u0p = rng.standard_normal(n), rng.standard_normal(n)
    else:
        raise UsageError("data must be 'uniform' or 'random'")
    rows = mode_table(model, cfg["beta_max"], u0, u0p, cfg["t_end"], cfg["dt"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / "modes.tsv"
    with open(path, "w") as fh:
        fh.write(f"# model={model.kind} H={model.H:g} data={cfg['data']} t_end={cfg['t_end']:g} dt={cfg['dt']:g}\n")
        fh.write("# beta\tq2\tA_plus\tA_minus\tu_inf\tmax_dev\n")
        for row in rows:
            fh.write("\t".join([str(row[0]), str(row[1])] + [f"{v:.17g}" for v in row[2:]]) + "\n")
    worst = max(r[5] for r in rows)
    _say(f"{len(rows)} modes, max RK4 deviation {worst:.3g} -> {path}")


def cmd_sky(cfg):
    from .fem import Locator
    from .sky import circle_residual, sky_map, write_sky

    if (cfg["chi"] is None) == (cfg["R"] is None):
        raise UsageError("give exactly one of 'chi' or 'R'")
    chis = cfg["chi"] if cfg["chi"] is not None else [math.asin(r) for r in cfg["R"]]
    for c in chis:
        if not 0.0 < c < math.pi:
            raise UsageError("chi must lie in (0, pi)")
    if cfg["n_theta"] < 1 or cfg["n_phi"] < 1:
        raise UsageError("grid dimensions must be positive")
    mesh = _mesh(cfg, default_level=1)
    U = _field(cfg, mesh)
    loc = Locator(mesh)
    for chi in chis:
        sky = sky_map(mesh, U, chi, cfg["n_theta"], cfg["n_phi"], locator=loc)
        tsv, pgm = write_sky(sky, cfg["out"])
        rep = circle_residual(sky)
        line = f"chi={chi:.6f}: range [{sky.values.min():.6g}, {sky.values.max():.6g}]"
        if rep.n_pairs:
            line += f", matched-circle residual {rep.ratio:.3%} of range"
        _say(f"{line} -> {tsv.name}, {pgm.name}")


def cmd_horizon(cfg):
    from .horizon import HorizonSpec, circles_condition, comoving_radius, horizon_radius

    model = _model(cfg)
    did = False
    if cfg["t_star"] is not None or cfg["R"] is not None:
        if cfg["t_star"] is None or cfg["R"] is None:
            raise UsageError("horizon radius needs both 't_star' and 'R'")
        try:
            spec = HorizonSpec(model, cfg["t_star"], cfg["R"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        rh = horizon_radius(spec)
        _say(f"R_h = {rh.radius:.4f}" + (" (wrapped)" if rh.wrapped else ""))
        if cfg["t"] is not None:
            rt = comoving_radius(model, cfg["t_star"], cfg["R"], cfg["t"])
            _say(f"R(t={cfg['t']:g}) = {rt.radius:.4f}" + (" (wrapped)" if rt.wrapped else ""))
        did = True
    if cfg["t_ls"] is not None or cfg["t_obs"] is not None:
        if cfg["t_ls"] is None or cfg["t_obs"] is None:
            raise UsageError("circles query needs both 't_ls' and 't_obs'")
        if not cfg["t_obs"] > cfg["t_ls"]:
            raise UsageError("t_obs must exceed t_ls")
        res = circles_condition(cfg["t_ls"], cfg["t_obs"], model)
        _say(f"R_ls = {res.radius:.4f}")
        _say(f"conformal distance = {res.distance:.4f}")
        _say(f"multiple images: {'yes' if res.multiple_images else 'no'}")
        did = True
    if not did:
        raise UsageError("horizon: give 't_star' and 'R', or 't_ls' and 't_obs'")


def cmd_tiling(cfg):
    from .sky import neighbour_cells, parse_elements, tiling_export

    try:
        cells = parse_elements(cfg["cells"]) if cfg["cells"] else neighbour_cells()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    mesh = _mesh(cfg, default_level=1)
    U = _field(cfg, mesh)
    tiling_export(mesh, U, cells, cfg["out"])
    _say(f"{len(cells)} cells x {mesh.n_vertices} vertices -> {cfg['out']}")


def cmd_selftest(cfg):
    from .acceptance import CRITERIA, run_criteria

    if cfg["criteria"]:
        try:
            wanted = [int(v) for v in cfg["criteria"].split(",") if v.strip()]
        except ValueError:
            raise UsageError("criteria must be a comma list of integers") from None
        bad = [k for k in wanted if k not in CRITERIA]
        if bad:
            raise UsageError(f"unknown criteria: {bad}")
    else:
        wanted = sorted(CRITERIA)
    results = run_criteria(wanted, report=_say)
    failed = [r.number for r in results if not r.passed]
    _say(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


COMMANDS = {
    "mesh": cmd_mesh,
    "run": cmd_run,
    "modes": cmd_modes,
    "sky": cmd_sky,
    "horizon": cmd_horizon,
    "tiling": cmd_tiling,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dodecawave",
        description="Waves on the Poincare dodecahedral space: meshes, runs, modes, horizons and sky maps.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"{name} (keys: {', '.join(SCHEMAS[name])})")
        p.add_argument("items", nargs="*", metavar="CONFIG|key=value")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from ._jit import configure_threads

    configure_threads()
    try:
        cfg = validate(args.command, gather(args.items))
        status = COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"dodecawave {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"dodecawave {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return int(status or 0)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
