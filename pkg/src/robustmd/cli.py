"""Command-line front end: JSON problem specs in, JSON reports and CSV series out.

Commands: guarantee, check-robust, robustify, figure. Exit codes partition the
outcomes: 0 solved/robust, 1 malformed spec or parameters, 2 infeasible,
3 non-robust, 4 inconclusive. Output files are rendered fully in memory before
anything is written, so a failing command leaves no partial CSV behind.
ROBUSTMD_LOG in {quiet, info, debug} controls logging.
"""

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ambiguity import (
    HalfSpace,
    InfeasibleSetError,
    LinearSet,
    MomentRow,
    QuantileSet,
    Singleton,
    SupportInterval,
    WassersteinBall,
)
from .guarantee import worst_case, worst_case_ball
from .measures import DiscretePrior, Grid, ValueFunction
from .mechanisms import (
    E_INV,
    NEG_REGRET,
    REVENUE,
    bs_optimal_cdf,
    cdf_value,
    median_example_bundle,
    monopoly_grid,
    persuasion_value,
    posted_price_value,
    robustify,
    verify_saddle,
)
from .optim import LpStatus
from .robustness import Verdict, check_robust

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_BAD_SPEC = 1
EXIT_INFEASIBLE = 2
EXIT_NON_ROBUST = 3
EXIT_INCONCLUSIVE = 4

DEFAULT_SPACING = 1.0 / 400.0
DEFAULT_TOL = 1e-8


class SpecError(ValueError):
    """Malformed problem spec (maps to exit code 1)."""


# ---------------------------------------------------------------------------
# problem-spec parsing

_VALUE_KINDS = ("posted_price", "bergemann_schlag", "price_cdf", "persuasion", "table")
_AMBIGUITY_KINDS = ("quantile", "support", "half_space", "singleton", "linear", "wasserstein_ball")
_G_KINDS = ("identity", "power", "indicator_leq", "indicator_outside", "table")


def _need(d: dict, key: str, ctx: str):
    if key not in d:
        raise SpecError(f"{ctx}: missing required field {key!r}")
    return d[key]


def parse_spec(doc: dict) -> dict:
    """Validate and normalize a problem-spec document (round-trip stable)."""
    if not isinstance(doc, dict):
        raise SpecError("spec must be a JSON object")
    out = {}
    grid = dict(_need(doc, "grid", "spec"))
    for key in ("lo", "hi", "spacing"):
        val = _need(grid, key, "grid")
        if not isinstance(val, (int, float)) or not math.isfinite(val):
            raise SpecError(f"grid.{key} must be a finite number")
    if grid["lo"] < 0 or grid["hi"] <= grid["lo"] or grid["spacing"] <= 0:
        raise SpecError("grid needs 0 <= lo < hi and spacing > 0")
    grid.setdefault("extra_points", [])
    out["grid"] = {
        "lo": float(grid["lo"]),
        "hi": float(grid["hi"]),
        "spacing": float(grid["spacing"]),
        "extra_points": [float(x) for x in grid["extra_points"]],
    }
    out["value_function"] = _parse_value(_need(doc, "value_function", "spec"))
    out["ambiguity"] = _parse_ambiguity(_need(doc, "ambiguity", "spec"))
    options = dict(doc.get("options", {}))
    if "radius" in options and options["radius"] is not None:
        options["radius"] = float(options["radius"])
        if options["radius"] < 0:
            raise SpecError("options.radius must be nonnegative")
    out["options"] = options
    return out


def _parse_value(vd) -> dict:
    vd = dict(vd)
    kind = _need(vd, "kind", "value_function")
    if kind not in _VALUE_KINDS:
        raise SpecError(f"unknown value_function kind {kind!r} (expected one of {_VALUE_KINDS})")
    if kind in ("posted_price", "bergemann_schlag", "price_cdf"):
        vd.setdefault("objective", REVENUE if kind == "posted_price" else NEG_REGRET)
        if vd["objective"] not in (REVENUE, NEG_REGRET):
            raise SpecError(f"unknown objective {vd['objective']!r}")
    if kind == "posted_price":
        vd["price"] = float(_need(vd, "price", kind))
    elif kind == "bergemann_schlag":
        vd["theta_bar"] = float(_need(vd, "theta_bar", kind))
    elif kind == "persuasion":
        vd["alpha"] = float(_need(vd, "alpha", kind))
    elif kind == "price_cdf":
        vd["theta"] = [float(x) for x in _need(vd, "theta", kind)]
        vd["q"] = [float(x) for x in _need(vd, "q", kind)]
        if len(vd["theta"]) != len(vd["q"]):
            raise SpecError("price_cdf theta and q must have equal length")
    elif kind == "table":
        vd["theta"] = [float(x) for x in _need(vd, "theta", kind)]
        vd["values"] = [float(x) for x in _need(vd, "values", kind)]
        if len(vd["theta"]) != len(vd["values"]):
            raise SpecError("table theta and values must have equal length")
    return vd


def _parse_g(gd) -> dict:
    gd = dict(gd)
    kind = _need(gd, "kind", "moment function")
    if kind not in _G_KINDS:
        raise SpecError(f"unknown moment function kind {kind!r}")
    if kind == "power":
        gd["exponent"] = float(_need(gd, "exponent", kind))
    elif kind == "indicator_leq":
        gd["x"] = float(_need(gd, "x", kind))
    elif kind == "indicator_outside":
        gd["a"] = float(_need(gd, "a", kind))
        gd["b"] = float(_need(gd, "b", kind))
    elif kind == "table":
        gd["theta"] = [float(x) for x in _need(gd, "theta", kind)]
        gd["values"] = [float(x) for x in _need(gd, "values", kind)]
    return gd


def _parse_ambiguity(ad) -> dict:
    ad = dict(ad)
    kind = _need(ad, "kind", "ambiguity")
    if kind not in _AMBIGUITY_KINDS:
        raise SpecError(f"unknown ambiguity kind {kind!r} (expected one of {_AMBIGUITY_KINDS})")
    if kind == "quantile":
        pairs = _need(ad, "pairs", kind)
        ad["pairs"] = [[float(x), float(a)] for x, a in pairs]
    elif kind == "support":
        ad["a"], ad["b"] = float(_need(ad, "a", kind)), float(_need(ad, "b", kind))
    elif kind == "half_space":
        ad["v"] = _parse_value(_need(ad, "v", kind))
        ad["level"] = float(_need(ad, "level", kind))
    elif kind == "singleton":
        ad["theta"] = [float(x) for x in _need(ad, "theta", kind)]
        ad["weights"] = [float(x) for x in _need(ad, "weights", kind)]
    elif kind == "linear":
        rows = _need(ad, "rows", kind)
        ad["rows"] = [
            {
                "g": _parse_g(_need(row, "g", "linear row")),
                "lo": None if row.get("lo") is None else float(row["lo"]),
                "hi": None if row.get("hi") is None else float(row["hi"]),
            }
            for row in rows
        ]
        ad.setdefault("continuous_moments", False)
    elif kind == "wasserstein_ball":
        ad["base"] = _parse_ambiguity(_need(ad, "base", kind))
        if ad["base"]["kind"] == "wasserstein_ball":
            raise SpecError("ball base must not itself be a ball")
        ad["radius"] = float(_need(ad, "radius", kind))
        if ad["radius"] <= 0:
            raise SpecError("ball radius must be positive")
    return ad


def _structural_points(spec: dict) -> list:
    """Grid points the descriptors need exactly (atoms, kinks, pins)."""
    pts = []
    vd = spec["value_function"]
    if vd["kind"] == "posted_price":
        pts.append(vd["price"])
    elif vd["kind"] == "bergemann_schlag":
        pts.extend([vd["theta_bar"], E_INV, 1.0])
    elif vd["kind"] == "persuasion":
        pts.append(vd["alpha"])
    elif vd["kind"] == "price_cdf":
        pts.extend(vd["theta"])

    def amb_points(ad):
        kind = ad["kind"]
        if kind == "quantile":
            return [x for x, _ in ad["pairs"]]
        if kind == "support":
            return [ad["a"], ad["b"]]
        if kind == "singleton":
            return list(ad["theta"])
        if kind == "linear":
            out = []
            for row in ad["rows"]:
                g = row["g"]
                if g["kind"] == "indicator_leq":
                    out.append(g["x"])
                elif g["kind"] == "indicator_outside":
                    out.extend([g["a"], g["b"]])
            return out
        if kind == "wasserstein_ball":
            return amb_points(ad["base"])
        return []

    pts.extend(amb_points(spec["ambiguity"]))
    lo, hi = spec["grid"]["lo"], spec["grid"]["hi"]
    return [p for p in pts if lo <= p <= hi]


def build_grid(spec: dict, spacing_override: float | None = None) -> Grid:
    g = spec["grid"]
    spacing = spacing_override if spacing_override else g["spacing"]
    extra = list(g["extra_points"]) + _structural_points(spec)
    return Grid.regular(g["lo"], g["hi"], spacing, extra=extra)


def build_value(spec: dict, grid: Grid) -> ValueFunction:
    vd = spec["value_function"]
    kind = vd["kind"]
    if kind == "posted_price":
        return posted_price_value(vd["price"], grid, vd["objective"])
    if kind == "bergemann_schlag":
        return cdf_value(bs_optimal_cdf(vd["theta_bar"], grid), vd["objective"])
    if kind == "persuasion":
        return persuasion_value(vd["alpha"], grid)
    if kind == "price_cdf":
        from .mechanisms import PriceCdf

        theta = np.asarray(vd["theta"])
        qvals = np.asarray(vd["q"])
        idx = np.searchsorted(theta, grid.points, side="right") - 1
        q = np.where(idx >= 0, qvals[np.maximum(idx, 0)], 0.0)
        return cdf_value(PriceCdf(grid, q), vd["objective"])
    # table: linear interpolation onto the grid
    return ValueFunction(grid, np.interp(grid.points, vd["theta"], vd["values"]))


def _build_g(gd: dict, grid: Grid) -> ValueFunction:
    pts = grid.points
    if gd["kind"] == "identity":
        return ValueFunction(grid, pts.copy())
    if gd["kind"] == "power":
        return ValueFunction(grid, pts**gd["exponent"])
    if gd["kind"] == "indicator_leq":
        return ValueFunction(grid, (pts <= gd["x"] + 1e-12).astype(float))
    if gd["kind"] == "indicator_outside":
        out = (pts < gd["a"] - 1e-12) | (pts > gd["b"] + 1e-12)
        return ValueFunction(grid, out.astype(float))
    return ValueFunction(grid, np.interp(pts, gd["theta"], gd["values"]))


def build_ambiguity(spec: dict, grid: Grid):
    ad = spec["ambiguity"]
    return _build_ambiguity_node(ad, grid)


def _build_ambiguity_node(ad: dict, grid: Grid):
    kind = ad["kind"]
    if kind == "quantile":
        return QuantileSet(tuple((x, a) for x, a in ad["pairs"]))
    if kind == "support":
        return SupportInterval(ad["a"], ad["b"])
    if kind == "half_space":
        vf = build_value({"value_function": ad["v"]}, grid)
        return HalfSpace(vf, ad["level"])
    if kind == "singleton":
        w = np.zeros(grid.n)
        for x, m in zip(ad["theta"], ad["weights"]):
            w[grid.index_of(x)] += m
        return Singleton(DiscretePrior(grid, w))
    if kind == "linear":
        rows = tuple(
            MomentRow(
                _build_g(row["g"], grid),
                -math.inf if row["lo"] is None else row["lo"],
                math.inf if row["hi"] is None else row["hi"],
            )
            for row in ad["rows"]
        )
        return LinearSet(rows, continuous_moments=bool(ad["continuous_moments"]))
    if kind == "wasserstein_ball":
        return WassersteinBall(_build_ambiguity_node(ad["base"], grid), ad["radius"])
    raise SpecError(f"unknown ambiguity kind {kind!r}")


# ---------------------------------------------------------------------------
# output helpers

def _fmt(x: float) -> str:
    return f"{x:.9g}"


def render_csv(columns: dict) -> str:
    names = list(columns)
    cols = [columns[n] for n in names]
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def _write_outputs(out_dir: str | None, files: dict):
    """Write fully rendered files; nothing touches disk before this point."""
    if out_dir is None:
        return
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (d / name).write_text(text)


def _prior_table(prior: DiscretePrior, atol: float = 1e-12) -> list:
    idx = prior.support_indices(atol)
    return [[float(prior.grid.points[i]), float(prior.weights[i])] for i in idx]


def _report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _provenance(grid: Grid, tol: float, iterations: int) -> dict:
    return {
        "grid": {
            "n": grid.n,
            "lo": float(grid.points[0]),
            "hi": float(grid.points[-1]),
            "max_spacing": grid.max_spacing,
        },
        "tolerances": {"membership": tol, "feasibility": 1e-8, "pivot": 1e-10},
        "solver_iterations": iterations,
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# commands

def _load_spec(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from exc
    return parse_spec(doc)


def cmd_guarantee(args) -> int:
    spec = _load_spec(args.spec)
    grid = build_grid(spec, args.grid_spacing)
    v = build_value(spec, grid)
    amb = build_ambiguity(spec, grid)
    radius = spec["options"].get("radius")
    if radius:
        rep = worst_case_ball(v, amb, radius)
    else:
        rep = worst_case(v, amb)
    result = {
        "command": "guarantee",
        "spec": spec,
        "status": rep.status.value,
        "value": None if rep.worst_prior is None else rep.value,
        "active_constraints": rep.active_constraints,
        "worst_prior": None if rep.worst_prior is None else _prior_table(rep.worst_prior),
        "provenance": _provenance(grid, args.tol, rep.iterations),
    }
    files = {"guarantee_report.json": _report_json(result)}
    if rep.worst_prior is not None:
        table = _prior_table(rep.worst_prior)
        files["worst_prior.csv"] = render_csv(
            {"theta": [t for t, _ in table], "value": [w for _, w in table]}
        )
    _write_outputs(args.out, files)
    if rep.status is LpStatus.OPTIMAL:
        print(f"guarantee value = {_fmt(rep.value)}")
        return EXIT_OK
    print(f"guarantee failed: {rep.status.value}")
    return EXIT_INFEASIBLE


def cmd_check_robust(args) -> int:
    spec = _load_spec(args.spec)
    grid = build_grid(spec, args.grid_spacing)
    v = build_value(spec, grid)
    amb = build_ambiguity(spec, grid)
    try:
        cert = check_robust(v, amb)
    except InfeasibleSetError as exc:
        print(f"check-robust failed: {exc}")
        return EXIT_INFEASIBLE
    result = {
        "command": "check_robust",
        "spec": spec,
        "verdict": cert.verdict.value,
        "guarantee": cert.guarantee,
        "gap": cert.gap,
        "threshold": cert.threshold,
        "h_schedule": cert.h_schedule,
        "envelope_values": cert.envelope_values,
        "witness_payoffs": cert.witness_payoffs,
        "provenance": _provenance(grid, args.tol, cert.iterations),
    }
    files = {"robustness_report.json": _report_json(result)}
    if cert.witness:
        seq, theta, weight = [], [], []
        for k, w in enumerate(cert.witness):
            for t, m in _prior_table(w):
                seq.append(k)
                theta.append(t)
                weight.append(m)
        files["witnesses.csv"] = render_csv({"sequence": seq, "theta": theta, "value": weight})
    _write_outputs(args.out, files)
    print(f"verdict = {cert.verdict.value} (guarantee {_fmt(cert.guarantee)}, gap {_fmt(cert.gap)})")
    if cert.verdict is Verdict.ROBUST:
        return EXIT_OK
    if cert.verdict is Verdict.NON_ROBUST:
        return EXIT_NON_ROBUST
    return EXIT_INCONCLUSIVE


def cmd_robustify(args) -> int:
    spacing = args.grid_spacing or DEFAULT_SPACING
    grid = monopoly_grid(spacing=spacing, theta_bar=args.theta_bar, r=args.r)
    sol = robustify(args.theta_bar, args.r, grid)
    saddle = verify_saddle(sol)
    regret = -cdf_value(sol.qhat, NEG_REGRET).values
    result = {
        "command": "robustify",
        "theta_bar": sol.theta_bar,
        "r": sol.r,
        "case": sol.case.value,
        "alpha": sol.alpha,
        "kappa": sol.kappa,
        "beta": sol.beta,
        "critical_radius": sol.r_hat,
        "regret_guarantee": sol.guarantee,
        "saddle": {
            "designer_slack": saddle.designer_slack,
            "nature_slack": saddle.nature_slack,
            "wasserstein_residual": saddle.wasserstein_residual,
        },
        "provenance": _provenance(grid, args.tol, 0),
    }
    files = {
        "robustify_report.json": _report_json(result),
        "mechanism.csv": render_csv(
            {"theta": grid.points, "qhat": sol.qhat.q, "regret": regret}
        ),
        "worst_prior.csv": render_csv(
            {
                "theta": [t for t, _ in _prior_table(sol.worst_prior)],
                "value": [w for _, w in _prior_table(sol.worst_prior)],
            }
        ),
    }
    _write_outputs(args.out, files)
    print(
        f"robustified mechanism: case={sol.case.value} kappa={_fmt(sol.kappa)} "
        f"guarantee={_fmt(sol.guarantee)}"
    )
    return EXIT_OK


FIGURES = ("fig1", "fig2", "fig3", "fig4")


def cmd_figure(args) -> int:
    spacing = args.grid_spacing or DEFAULT_SPACING
    name = args.name
    files = {}
    if name == "fig1":
        grid = monopoly_grid(spacing=spacing, extra=[0.4])
        ex = median_example_bundle(0.4, grid)
        files["fig1_value.csv"] = render_csv({"theta": grid.points, "value": ex.value_fn.values})
        files["fig1_worst_cdf.csv"] = render_csv(
            {"theta": grid.points, "value": ex.saddle_prior.cdf()}
        )
    elif name == "fig2":
        grid = monopoly_grid(spacing=spacing, theta_bar=0.5)
        regret = -cdf_value(bs_optimal_cdf(0.5, grid), NEG_REGRET).values
        files["fig2_regret.csv"] = render_csv({"theta": grid.points, "value": regret})
    elif name == "fig3":
        grid = monopoly_grid(spacing=spacing, extra=[0.3, 0.4, 0.6])
        files["fig3_value.csv"] = render_csv(
            {"theta": grid.points, "value": persuasion_value(0.3, grid).values}
        )
    elif name == "fig4":
        manifest = {}
        for r in (0.0, 0.001, 0.003, 0.006):
            grid = monopoly_grid(spacing=spacing, theta_bar=0.5, r=r)
            if r == 0.0:
                regret = -cdf_value(bs_optimal_cdf(0.5, grid), NEG_REGRET).values
                on_plateau = (grid.points >= 0.5) & (grid.points <= 1.0)
                kink, plateau = 0.5, float(np.min(regret[on_plateau]))
            else:
                sol = robustify(0.5, r, grid)
                regret = -cdf_value(sol.qhat, NEG_REGRET).values
                kink = sol.kappa
                plateau = sol.guarantee - (sol.alpha - 1.0) * r
            files[f"fig4_regret_r{_fmt(r)}.csv"] = render_csv(
                {"theta": grid.points, "value": regret}
            )
            manifest[_fmt(r)] = {"kink": kink, "plateau": plateau}
        files["fig4_manifest.json"] = _report_json({"command": "figure", "name": "fig4", "series": manifest})
    else:
        print(f"unknown figure {name!r} (expected one of {FIGURES})")
        return EXIT_BAD_SPEC
    _write_outputs(args.out, files)
    print(f"{name}: wrote {len(files)} file(s) to {args.out or '(nowhere, no --out)'}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _configure_logging():
    level = os.environ.get("ROBUSTMD_LOG", "quiet").strip().lower()
    levels = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        print(f"warning: unknown ROBUSTMD_LOG={level!r}, using info", file=sys.stderr)
    logging.basicConfig(level=levels.get(level, logging.INFO), format="%(name)s %(message)s")


def _add_common(p):
    p.add_argument("--out", default=None, help="output directory for reports and CSV files")
    p.add_argument("--grid-spacing", type=float, default=None, help="override grid spacing")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="membership tolerance (recorded)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robustmd", description=__doc__)
    ap.add_argument("--version", action="version", version=f"robustmd {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("guarantee", help="worst-case payoff over an ambiguity set")
    p.add_argument("--spec", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_guarantee)

    p = sub.add_parser("check-robust", help="robustness certificate for a guarantee")
    p.add_argument("--spec", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_check_robust)

    p = sub.add_parser("robustify", help="robustified regret-minimizing mechanism")
    p.add_argument("--theta-bar", type=float, required=True, dest="theta_bar")
    p.add_argument("--r", type=float, required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_robustify)

    p = sub.add_parser("figure", help="emit the data series behind a bundled figure")
    p.add_argument("--name", required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_figure)
    return ap


def main(argv=None) -> int:
    _configure_logging()
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_BAD_SPEC
    except InfeasibleSetError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_SPEC


if __name__ == "__main__":
    sys.exit(main())
