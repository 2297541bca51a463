"""Config-driven experiment runner.

Subcommands: simulate, probe, lrb-scan, astlo, validate, plot.  Outputs
are deterministic for a fixed config and seed: CSV trajectories, JSON
probe reports, SVG figures with embedded data tables.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import astlo as astlo_mod
from . import config as cfgmod
from . import couplings as cpl
from . import probes as probes_mod
from .config import ConfigError
from .dynamics import Propagator, heisenberg_expectation
from .fock import (
    QuantumState,
    diagonal_operator,
    diagonal_power,
    hamiltonian,
    number_operator,
    site_number_operator,
)

DEFAULT_TOLERANCES = {
    "fit_margin": 1e-8,
    "exact_identity": 1e-12,
}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header: list[str], rows, config_hash: str):
    lines = [f"# config_hash: {config_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _parse_overrides(pairs) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    for kv in pairs or []:
        if "=" not in kv:
            raise ConfigError("override", "--tolerance-overrides", f"expected KEY=VAL, got {kv!r}")
        k, v = kv.split("=", 1)
        tol[k] = float(v)
    return tol


class _Context:
    """Built objects shared across subcommands."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.hash = cfgmod.config_hash(cfg)
        self.lattice = cfgmod.build_lattice(cfg)
        self.J, self.V, self.q_terms = cfgmod.build_couplings(self.lattice, cfg)
        self.basis = cfgmod.build_basis_from_config(self.lattice, cfg)

    def state(self) -> QuantumState:
        return cfgmod.build_state(self.basis, self.cfg)

    def times(self) -> np.ndarray:
        return cfgmod.build_times(self.cfg)

    def propagator(self) -> Propagator:
        H = hamiltonian(self.basis, self.J, self.V, self.q_terms)
        return Propagator(H)

    def observable(self, spec: dict):
        if "hop" in spec:
            i, j = (int(k) for k in spec["hop"])
            m = np.zeros((self.basis.n_sites,) * 2, dtype=complex)
            m[i, j] = m[j, i] = 1.0
            from .couplings import HOPPING, CouplingMatrix
            from .fock import hopping_operator

            return hopping_operator(self.basis, CouplingMatrix(self.lattice, HOPPING, m))
        if "site" in spec:
            op = site_number_operator(self.basis, int(spec["site"]))
        else:
            reg = cfgmod.build_region(self.lattice, spec["region"], "observables.region")
            op = number_operator(self.basis, reg)
        p = spec.get("power", 1)
        return diagonal_power(op, p) if p != 1 else op

    def velocity(self, spec: dict) -> float:
        if "v" in spec:
            return float(spec["v"])
        k = cpl.kappa(self.J) if self.J is not None else 0.0
        return float(spec.get("v_factor", 12.0)) * max(k, 1e-12)


def cmd_simulate(ctx: _Context, out: Path, args) -> int:
    times = ctx.times()
    obs = {}
    for spec in ctx.cfg.get("observables", []):
        obs[spec["id"]] = ctx.observable(spec)
    psi0 = ctx.state()
    prop = ctx.propagator()
    if obs:
        traj = heisenberg_expectation(prop, obs, psi0, times, provenance=ctx.hash)
    else:
        traj = None
    rows = []
    if traj is not None:
        for oid in sorted(obs):
            vals = traj.values[oid]
            for t, v in zip(times, vals):
                rows.append((float(t), oid, float(v.real), float(v.imag)))
    _write_csv(out / "trajectory.csv", ["time", "observable_id", "re", "im"], rows, ctx.hash)
    _write_json(
        out / "trajectory.json",
        {
            "config_hash": ctx.hash,
            "times": [float(t) for t in times],
            "observables": {
                oid: [[float(v.real), float(v.imag)] for v in traj.values[oid]]
                for oid in sorted(obs)
            }
            if traj
            else {},
        },
    )
    return 0


def _run_probe(ctx: _Context, spec: dict, tol: dict, seed: int):
    kind = spec["kind"]
    if kind == "moment_bounds":
        res = probes_mod.check_moment_bounds(
            ctx.basis, ctx.J, ctx.V, ctx.state(),
            spec["R"], spec["r"], ctx.velocity(spec), int(spec.get("p", 1)),
            cfgmod.build_times({"times": spec["times"]}),
            tolerance=tol["fit_margin"], config_hash=ctx.hash,
        )
        return [res["upper"].to_dict(), res["lower"].to_dict()]
    if kind == "annulus_mvb":
        X = cfgmod.build_region(ctx.lattice, spec["region"], "probes.region")
        rep = probes_mod.annulus_mvb(
            ctx.basis, ctx.J, ctx.V, ctx.state(), X,
            spec["xi"], spec["gamma1"], spec["gamma2"], int(spec.get("p", 1)),
            cfgmod.build_times({"times": spec["times"]}),
            ctx.velocity(spec), spec["alpha"],
            tolerance=tol["fit_margin"], config_hash=ctx.hash,
        )
        return [rep.to_dict()]
    if kind == "holder":
        rng = np.random.default_rng(seed)
        out = []
        dim = ctx.basis.dim
        for p in spec.get("p_values", [2.0]):
            for _ in range(int(spec.get("n_trials", 10))):
                A = diagonal_operator(ctx.basis, rng.uniform(0, 3, dim))
                B = diagonal_operator(ctx.basis, rng.uniform(0, 3, dim))
                v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
                psi = QuantumState(ctx.basis, v / np.linalg.norm(v))
                out.append(
                    probes_mod.check_operator_holder(
                        A, B, float(p), psi,
                        tolerance=tol["exact_identity"], config_hash=ctx.hash,
                    ).to_dict()
                )
        return out
    if kind == "truncation":
        X = cfgmod.build_region(ctx.lattice, spec["region"], "probes.region")
        rep = probes_mod.truncation_consistency(
            ctx.state(), spec["n0_ladder"], X, int(spec.get("p", 1)),
            float(spec.get("t", 0.0)), ctx.J, ctx.V,
            tolerance=tol["exact_identity"], config_hash=ctx.hash,
        )
        return [rep.to_dict()]
    if kind == "density_window":
        win = probes_mod.density_window_check(ctx.state(), int(spec.get("p", 1)))
        win["config_hash"] = ctx.hash
        win["name"] = "density-window"
        return [win]
    raise ConfigError("probe", "probes.kind", f"unknown probe kind {kind!r}")


def cmd_probe(ctx: _Context, out: Path, args) -> int:
    tol = _parse_overrides(args.tolerance_overrides)
    specs = ctx.cfg.get("probes", [])
    if args.jobs > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(lambda s: _run_probe(ctx, s, tol, args.seed), specs))
    else:
        results = [_run_probe(ctx, s, tol, args.seed) for s in specs]
    reports = [r for chunk in results for r in chunk]
    _write_json(out / "probes.json", {"config_hash": ctx.hash, "reports": reports})
    rows = []
    for r in reports:
        rows.append(
            (
                r.get("name", "?"),
                r.get("verdict", "?"),
                float(r["margin"]) if r.get("margin") is not None else float("nan"),
            )
        )
    _write_csv(out / "probes_summary.csv", ["name", "verdict", "margin"], rows, ctx.hash)
    return 0


def cmd_lrb_scan(ctx: _Context, out: Path, args) -> int:
    spec = ctx.cfg.get("lrb")
    if spec is None:
        raise ConfigError("missing", "lrb", "lrb-scan needs an [lrb] section")
    X = cfgmod.build_region(ctx.lattice, spec["X"], "lrb.X")
    Y = cfgmod.build_region(ctx.lattice, spec["Y"], "lrb.Y")
    A = ctx.observable(spec["A"])
    B = ctx.observable(spec["B"])
    states = {float(s["xi"]): np.asarray(s["occupations"]) for s in spec["states"]}

    from .fock import shell_state

    def state_for_xi(xi):
        return shell_state(ctx.basis, X, xi, states[float(xi)])

    alpha = spec.get("alpha") or ctx.cfg["couplings"]["hopping"]["alpha"]
    res = probes_mod.lrb_scan(
        ctx.basis, ctx.J, ctx.V, A, X, B, Y,
        sorted(states), cfgmod.build_times({"times": spec["times"]}),
        state_for_xi, alpha, config_hash=ctx.hash,
    )
    rows = []
    for i, xi in enumerate(res["xi_values"]):
        for k, t in enumerate(res["times"]):
            rows.append(
                (float(xi), float(t),
                 float(res["commutator_magnitudes"][i, k]),
                 float(res["bRem_magnitudes"][i, k]))
            )
    _write_csv(out / "lrb_scan.csv", ["xi", "time", "commutator_abs", "bRem_abs"], rows, ctx.hash)
    _write_json(
        out / "lrb_scan.json",
        {
            "config_hash": ctx.hash,
            "C": res["C"],
            "beta": res["beta"],
            "log_slope": res["log_slope"],
            "alpha_regime_ok": res["alpha_regime_ok"],
            "reports": [r.to_dict() for r in res["reports"]],
        },
    )
    return 0


def cmd_astlo(ctx: _Context, out: Path, args) -> int:
    spec = ctx.cfg.get("astlo")
    if spec is None:
        raise ConfigError("missing", "astlo", "astlo needs an [astlo] section")
    v = ctx.velocity(spec)
    k = cpl.kappa(ctx.J) if ctx.J is not None else 0.0
    schedule = astlo_mod.make_schedule(spec["R"], spec["r"], v, k, int(spec.get("l_max", 2)))
    cutoff = astlo_mod.make_cutoff(schedule.omega, int(spec.get("resolution", 4001)))
    times = cfgmod.build_times({"times": spec["times"]})
    psi0 = ctx.state()
    prop = ctx.propagator()
    # the moving observable depends on t, so record expectations time by time
    from .dynamics import evolve

    cur = psi0
    prev = 0.0
    per_key = {(l, s): np.zeros(len(times)) for l in range(len(schedule.levels)) for s in ("minus", "plus")}
    for k_t, t in enumerate(times):
        cur = evolve(prop, cur, float(t) - prev)
        prev = float(t)
        for l in range(len(schedule.levels)):
            for sign in ("minus", "plus"):
                op = astlo_mod.astlo_operator(ctx.basis, schedule, l, cutoff, sign, float(t))
                per_key[(l, sign)][k_t] = op.operator.expectation(cur).real
    monitor = astlo_mod.bad_time_monitor(
        times, per_key, schedule, float(spec.get("lambda1", 1.0)), ctx.lattice.dimension
    )
    rows = []
    for (l, sign), vals in sorted(per_key.items()):
        for t, vv in zip(times, vals):
            rows.append((int(l), sign, float(t), float(vv)))
    _write_csv(out / "astlo.csv", ["level", "sign", "time", "value"], rows, ctx.hash)
    _write_json(
        out / "astlo.json",
        {
            "config_hash": ctx.hash,
            "t1": monitor["t1"] if np.isfinite(monitor["t1"]) else None,
            "t1_floor": monitor["floor"],
            "min_ratio": monitor["min_ratio"],
            "schedule": {
                "a": schedule.a,
                "b": schedule.b,
                "v": schedule.v,
                "v_prime": schedule.v_prime,
                "omega": schedule.omega,
                "levels": [
                    {"l": lv.l, "R": lv.R, "r": lv.r, "s": lv.s} for lv in schedule.levels
                ],
            },
        },
    )
    return 0


def cmd_validate(args) -> int:
    cfg = cfgmod.load_config(args.config)
    report = cfgmod.validate_config(cfg)
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def _read_traj_csv(path: Path):
    lines = path.read_text().splitlines()
    chash = ""
    if lines and lines[0].startswith("# config_hash:"):
        chash = lines[0].split(":", 1)[1].strip()
        lines = lines[1:]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:] if ln]
    return chash, header, rows


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("svg")
    matplotlib.rcParams["svg.hashsalt"] = "bhlab"
    import matplotlib.pyplot as plt

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hashes = set()
    for src in args.inputs:
        src = Path(src)
        chash, header, rows = _read_traj_csv(src)
        if chash:
            hashes.add(chash)
        if len(hashes) > 1:
            raise ConfigError("hash_mismatch", "inputs", "inputs carry different config hashes")
        fig, ax = plt.subplots(figsize=(6, 4))
        if header[:2] == ["time", "observable_id"]:
            series = {}
            for t, oid, re, _im in rows:
                series.setdefault(oid, []).append((float(t), float(re)))
            for oid in sorted(series):
                pts = np.array(series[oid])
                ax.plot(pts[:, 0], pts[:, 1], label=oid)
            ax.set_xlabel("time")
            ax.set_ylabel("expectation")
            ax.legend()
        elif header[0] == "xi":
            series = {}
            for xi, t, cmag, _b in rows:
                series.setdefault(float(t), []).append((float(xi), float(cmag)))
            for t in sorted(series):
                if t == 0:
                    continue
                pts = np.array(sorted(series[t]))
                pos = pts[:, 1] > 0
                ax.loglog(pts[pos, 0], pts[pos, 1], marker="o", label=f"t={t:g}")
            ax.set_xlabel("xi")
            ax.set_ylabel("|<[a_t(A), B]>|")
            ax.legend()
        else:
            raise ConfigError("plot", "inputs", f"unrecognized CSV schema in {src}")
        ax.set_title(src.stem)
        fig.tight_layout()
        target = out / f"{src.stem}.svg"
        fig.savefig(target, metadata={"Date": None})
        plt.close(fig)
        _embed_data_table(target, header, rows)
    return 0


def _embed_data_table(svg_path: Path, header: list[str], rows) -> None:
    """Append the plotted data as a comment block inside the SVG."""
    text = svg_path.read_text()
    table = "\n".join([",".join(header)] + [",".join(map(str, r)) for r in rows])
    text = text.replace("</svg>", f"<!-- data-table\n{table}\n-->\n</svg>", 1)
    svg_path.write_text(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bhlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def _common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="out")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tolerance-overrides", nargs="*", metavar="KEY=VAL")

    for name in ("simulate", "probe", "lrb-scan", "astlo"):
        _common(sub.add_parser(name))
    pv = sub.add_parser("validate")
    pv.add_argument("--config", required=True)
    pp = sub.add_parser("plot")
    pp.add_argument("inputs", nargs="+")
    pp.add_argument("--out", default="out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "plot":
            return cmd_plot(args)
        cfg = cfgmod.load_config(args.config)
        ctx = _Context(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(ctx, out, args)
        if args.command == "probe":
            return cmd_probe(ctx, out, args)
        if args.command == "lrb-scan":
            return cmd_lrb_scan(ctx, out, args)
        if args.command == "astlo":
            return cmd_astlo(ctx, out, args)
        raise ConfigError("command", "command", f"unknown command {args.command!r}")
    except ConfigError as e:
        print(json.dumps(e.to_json()), file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(
            json.dumps({"code": "precondition", "field_path": "", "message": str(e)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
