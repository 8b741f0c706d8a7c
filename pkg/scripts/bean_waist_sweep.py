"""Bean ordering statistic as a function of the waist length scale."""
import argparse
import json
import dataclasses

from glcons.config import BeanConfig
from glcons.experiments import bean_seed, bean_summary, fan_out

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--widths", type=float, nargs="+", default=[0.12, 0.16, 0.20])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--threads", type=int, default=1)
    a = ap.parse_args()
    out = {}
    for w in a.widths:
        cfg = dataclasses.replace(BeanConfig(), waist_width=w, n_seeds=a.seeds)
        geom, k, V = cfg.geometry(), cfg.kernel.build(2), cfg.potential.build()
        solver = cfg.solver.build(cfg.seed)
        res = fan_out(lambda s: bean_seed(s, cfg.n, cfg.eps_c, k, V, cfg.p_list, cfg.lam, geom, cfg.std,
                                          cfg.seeds_at, cfg.seed_radius, solver, cfg.starts, cfg.start_width),
                      list(range(cfg.n_seeds)), a.threads)
        tab = bean_summary(res)
        out[w] = {p: {"median_crossing": v["median_crossing"], "min_purity": v["min_purity"]} for p, v in tab.items()}
        print(w, json.dumps(out[w]))
