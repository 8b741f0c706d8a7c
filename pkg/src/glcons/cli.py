"""Command-line entry point: ``glcons <command> --config FILE --out DIR``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
Primary outputs carry a provenance line (config sha256, seed, version) and
never contain timings, so a rerun with the same config and seed is
byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .config import (BeanConfig, CellConfig, ConfigError, ConvergeConfig, GraphConfig, MinimizeConfig,
                     SegmentConfig, ValidateConfig, COMMANDS, config_hash, load_config, to_dict)
from .continuum import hard_interface_energy
from .core import DimensionError, PointCloud, read_labels_csv, read_points_csv, validate_assumptions
from .energy import FidelitySpec
from .experiments import (bean_seed, bean_summary, cell_table, converge_summary, converge_table, direction_vectors,
                          fan_out, segment_image, two_tone_image)
from .graph import build_graph, connectivity_report, write_edge_list
from .imageio import ImageFormatError, labels_to_pgm, read_image, read_mask
from .solver import NumericalError, minimize, threshold
from .transport import BudgetError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class Provenance:
    def __init__(self, command: str, cfg, seed: int):
        self.command = command
        self.sha = config_hash(cfg)
        self.seed = int(seed)

    def to_dict(self) -> dict:
        return {"command": self.command, "config_sha256": self.sha, "seed": self.seed, "version": __version__}

    def line(self) -> str:
        return (f"glcons {__version__} command={self.command} config_sha256={self.sha} seed={self.seed}")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x)}")


def write_json(path: str, payload: dict, prov: Provenance) -> None:
    doc = {"provenance": prov.to_dict(), **payload}
    with open(path, "w") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable, allow_nan=True) + "\n")


def write_csv(path: str, header, rows, prov: Provenance) -> None:
    buf = io.StringIO()
    buf.write(f"# {prov.line()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for v in row])
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


# ---------------------------------------------------------------- helpers

def _points(cfg: GraphConfig) -> tuple:
    """(PointCloud, sampled?)"""
    if cfg.points.path is not None:
        return read_points_csv(cfg.points.path), False
    rho = cfg.points.density.build()
    x = rho.sample(cfg.points.n, np.random.default_rng(np.uint64(cfg.seed)))
    return PointCloud(x), True


def _graph(cfg: GraphConfig):
    cloud, sampled = _points(cfg)
    eps = cfg.resolve_eps(cloud.n, cloud.dim)
    g = build_graph(cloud, cfg.kernel.build(cloud.dim), eps)
    return cloud, sampled, g


def _write_points(path, cloud: PointCloud, prov: Provenance, extra=None) -> None:
    header = [f"x{k}" for k in range(cloud.dim)]
    cols = [cloud.points]
    if extra:
        for name, vals in extra:
            header.append(name)
            cols.append(np.asarray(vals, float)[:, None])
    write_csv(path, header, np.hstack(cols).tolist(), prov)


# ---------------------------------------------------------------- commands

def cmd_graph(cfg: GraphConfig, out: str, prov: Provenance, threads: int = 1) -> dict:
    cloud, sampled, g = _graph(cfg)
    write_edge_list(os.path.join(out, "edges.csv"), g, comment=prov.line())
    if sampled:
        _write_points(os.path.join(out, "points.csv"), cloud, prov)
    summary = {"n": g.n, "dim": g.dim, "eps": g.eps, "num_edges": g.num_edges,
               "connectivity": connectivity_report(g).to_dict()}
    write_json(os.path.join(out, "summary.json"), summary, prov)
    return summary


def _fidelity(cfg: MinimizeConfig, n: int) -> Optional[FidelitySpec]:
    fs = cfg.fidelity
    if fs.weight == 0:
        return None
    if fs.labels is not None:
        vals = read_labels_csv(fs.labels).values
        if vals.shape[0] != n:
            raise ConfigError(f"fidelity.labels has {vals.shape[0]} rows for {n} points")
        idx = np.flatnonzero(np.isfinite(vals))
        return FidelitySpec(idx, vals[idx], fs.weight, fs.q)
    return None


def cmd_minimize(cfg: MinimizeConfig, out: str, prov: Provenance, threads: int = 1) -> dict:
    cloud, sampled, g = _graph(cfg)
    fid = _fidelity(cfg, cloud.n)
    if fid is None and cfg.fidelity.weight > 0 and cfg.fidelity.regions:
        regions = [(r.center, r.radius, r.value) for r in cfg.fidelity.regions]
        for c, _, _ in regions:
            if len(c) != cloud.dim:
                raise ConfigError("fidelity region centre has the wrong dimension")
        fid = FidelitySpec.from_regions(cloud.points, regions, cfg.fidelity.weight, cfg.fidelity.q)
    init = None
    if cfg.init_field is not None:
        init = read_labels_csv(cfg.init_field).values
        if init.shape[0] != cloud.n:
            raise ConfigError("init_field length does not match the point count")
    opts = cfg.solver.build(cfg.seed, init)
    res = minimize(g, cfg.p, cfg.potential.build(), fid, opts)
    _write_points(os.path.join(out, "u.csv"), cloud, prov, [("u", res.u), ("label", threshold(res.u))])
    write_csv(os.path.join(out, "trace.csv"), ["iter", "energy"], list(enumerate(res.energy_trace.tolist())), prov)
    summary = {"n": g.n, "eps": g.eps, "p": cfg.p, "final_energy": res.final_energy, "converged": res.converged,
               "iters": res.iterations, "purity": float(np.mean(np.abs(res.u) > 0.9)),
               "monotone": res.monotone(), "labelled": 0 if fid is None else int(fid.indices.size)}
    write_json(os.path.join(out, "summary.json"), summary, prov)
    return summary


def cmd_segment(cfg: SegmentConfig, out: str, prov: Provenance, threads: int = 1) -> dict:
    truth = None
    if cfg.image is None:
        rgb, mask, truth = two_tone_image(64)
    else:
        img = read_image(cfg.image)
        mask = read_mask(cfg.mask)
        if mask.shape != (img.height, img.width):
            raise ConfigError(f"mask is {mask.shape}, image is {(img.height, img.width)}")
        rgb = img.rgb
    if not (np.any(mask > 0) and np.any(mask < 0)):
        raise ConfigError("mask must contain both classes")
    res = segment_image(rgb, mask, cfg.p, cfg.lam, cfg.tau_color, cfg.eps, cfg.potential.build(),
                        cfg.solver.build(cfg.seed))
    labels_to_pgm(os.path.join(out, "labels.pgm"), res.labels, mask.shape, comment=prov.line())
    summary = res.summary()
    summary["config"] = to_dict(cfg)
    if truth is not None:
        summary["truth_agreement"] = float(np.mean(res.labels == truth))
    write_json(os.path.join(out, "summary.json"), summary, prov)
    return summary


def cmd_bean(cfg: BeanConfig, out: str, prov: Provenance, threads: int = 1) -> dict:
    geom = cfg.geometry()
    k = cfg.kernel.build(2)
    V = cfg.potential.build()
    solver = cfg.solver.build(cfg.seed)
    seeds = [cfg.seed + i for i in range(cfg.n_seeds)]

    def one(s):
        return bean_seed(s, cfg.n, cfg.eps_c, k, V, cfg.p_list, cfg.lam, geom, cfg.std, cfg.seeds_at,
                         cfg.seed_radius, solver, cfg.starts, cfg.start_width, cfg.init)

    results = fan_out(one, seeds, threads)
    rows = []
    for r in results:
        for run in r.runs:
            rows.append([r.seed, run.p, run.crossing, run.purity, run.energy, run.start, run.converged,
                         run.monotone, run.iterations])
            name = f"field_seed{r.seed}_p{run.p:g}.csv"
            write_csv(os.path.join(out, name), ["x0", "x1", "u", "label"],
                      np.column_stack([r.points, run.u, threshold(run.u)]).tolist(), prov)
    write_csv(os.path.join(out, "cuts.csv"),
              ["seed", "p", "crossing", "purity", "energy", "start", "converged", "monotone", "iters"], rows, prov)
    table = bean_summary(results)
    summary = {"per_p": table, "seeds": seeds, "n": cfg.n, "eps": results[0].eps if results else None}
    ps = [str(float(p)) for p in cfg.p_list]
    if len(ps) >= 2 and all(table[p]["median_crossing"] is not None for p in ps[:2]):
        summary["ordering_holds"] = table[ps[0]]["median_crossing"] > table[ps[1]]["median_crossing"]
    write_json(os.path.join(out, "summary.json"), summary, prov)
    return summary


def cmd_converge(cfg: ConvergeConfig, out: str, prov: Provenance, threads: int = 1) -> dict:
    rho = cfg.density.build()
    k = cfg.kernel.build(rho.dim)
    plane = None
    if cfg.plane_point is not None:
        if len(cfg.plane_point) != rho.dim or len(cfg.plane_normal) != rho.dim:
            raise ConfigError("plane has the wrong dimension")
        plane = (cfg.plane_point, cfg.plane_normal)
    seeds = [cfg.seed + i for i in range(cfg.n_seeds)]
    rows = converge_table(rho, plane, cfg.n_list, seeds, cfg.eps_c, cfg.p, k, cfg.potential.build(), threads)
    write_csv(os.path.join(out, "converge.csv"), ["n", "seed", "eps", "discrete", "prediction", "ratio"],
              [[r.n, r.seed, r.eps, r.discrete, r.prediction, r.ratio] for r in rows], prov)
    summary = {"rows": converge_summary(rows), "prediction": rows[0].prediction if rows else None}
    write_json(os.path.join(out, "summary.json"), summary, prov)
    return summary


def cmd_cell(cfg: CellConfig, out: str, prov: Provenance, threads: int = 1) -> dict:
    k = cfg.kernel.build(cfg.dim)
    try:
        direction_vectors(cfg.dim, cfg.directions)
    except ValueError as exc:
        raise ConfigError(f"directions: {exc}") from exc
    rows = cell_table(k, cfg.potential.build(), cfg.p, cfg.rho, cfg.directions, cfg.profile.build(), threads)
    header = ["rho"] + [f"nu{i}" for i in range(cfg.dim)] + ["sigma", "hard_interface", "converged"]
    out_rows = []
    for r in rows:
        bound = hard_interface_energy(r["rho"], k, r["nu"], cfg.p)
        out_rows.append([r["rho"], *r["nu"], r["sigma"], bound, r["converged"]])
    write_csv(os.path.join(out, "sigma.csv"), header, out_rows, prov)
    spread = {}
    for rho in cfg.rho:
        s = [r["sigma"] for r in rows if r["rho"] == float(rho)]
        spread[repr(float(rho))] = {"min": min(s), "max": max(s), "rel_spread": (max(s) - min(s)) / max(s)}
    write_json(os.path.join(out, "summary.json"), {"p": cfg.p, "by_rho": spread}, prov)
    return spread


def cmd_validate(cfg: ValidateConfig, out: str, prov: Provenance, threads: int = 1) -> dict:
    rho = None
    if cfg.density is not None:
        rho = cfg.density.build()
        if rho.dim != cfg.dim:
            raise ConfigError("density dimension differs from dim")
    report = validate_assumptions(cfg.kernel.build(cfg.dim), cfg.potential.build(), rho, seed=cfg.seed)
    summary = report.to_dict()
    write_json(os.path.join(out, "report.json"), summary, prov)
    return summary


HANDLERS = {
    "graph": cmd_graph,
    "minimize": cmd_minimize,
    "segment": cmd_segment,
    "bean": cmd_bean,
    "converge": cmd_converge,
    "cell": cmd_cell,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glcons", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML config (defaults are used when omitted)")
        sp.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for seed-replicated trials")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        prov = Provenance(args.command, cfg, cfg.seed)
        summary = HANDLERS[args.command](cfg, args.out, prov, args.threads)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ImageFormatError, DimensionError, BudgetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(summary, sort_keys=True, default=_jsonable)[:2000])
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
