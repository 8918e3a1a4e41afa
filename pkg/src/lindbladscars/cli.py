"""Experiment runner: JSON configs in, reproducible CSV/JSON out.

Each subcommand wraps one library workflow (commutant tables, master-equation
evolution, scaling collapses, coherence decay, Brownian circuits, short-time
derivative checks).  The resolved configuration -- including every default --
is echoed into the output header together with its hash, the seed and the
package version, so identical config + seed gives byte-identical output.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure, 4 output
I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .brownian import (
    BrownianSpec,
    averaged_autocorrelation,
    sample_circuit_autocorrelation,
    stationary_autocorrelation,
)
from .commutant import commutant_basis, irrep_decomposition, mazur_bound
from .dynamics import (
    coherence_norm_series,
    collapse_discrepancy,
    density_matrix,
    evolve_exact,
    evolve_trajectories,
    fidelity_series,
    observable_series,
    plateau,
    short_time_derivatives,
)
from .errors import ConfigError, SolverError
from .models import (
    aqmbs_state,
    build_model,
    catalog_ids,
    default_aqmbs_momentum,
    product_state,
    scar_aqmbs_superposition,
    scar_state,
    ScarStateSpec,
    tower_state,
)
from .operators import site_operator

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "lindbladscars experiment configuration",
    "type": "object",
    "required": ["experiment"],
    "additionalProperties": False,
    "properties": {
        "experiment": {
            "enum": ["commutant", "evolve", "collapse", "coherence", "brownian", "derivatives"]
        },
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "model": {
            "type": "object",
            "required": ["id"],
            "additionalProperties": False,
            "properties": {
                "id": {"type": "string"},
                "L": {"type": "integer", "minimum": 2},
                "boundary": {"enum": ["open", "periodic"]},
                "params": {"type": "object", "additionalProperties": {"type": "number"}},
            },
        },
        "initial_state": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {
                    "enum": [
                        "product",
                        "tower",
                        "aqmbs",
                        "scar-plus-aqmbs",
                        "ferromagnet-up",
                        "ferromagnet-down",
                    ]
                },
                "pattern": {"type": "string"},
                "n": {"type": "integer", "minimum": 0},
                "k_steps": {"type": "integer"},
            },
        },
        "times": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "start": {"type": "number", "minimum": 0},
                "stop": {"type": "number", "exclusiveMinimum": 0},
                "num": {"type": "integer", "minimum": 2},
                "list": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
        },
        "method": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["exact", "trajectories"]},
                "n_traj": {"type": "integer", "minimum": 1},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "sector": {"oneOf": [{"type": "null"}, {"type": "integer"}, {"const": "auto"}]},
            },
        },
        "observable": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"type": "string"},
                "site": {"type": "integer", "minimum": 1},
            },
        },
        "collapse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L_list": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "scaling": {"enum": ["t2_over_L2", "t_over_L2"]},
                "x_max": {"type": "number", "exclusiveMinimum": 0},
                "num": {"type": "integer", "minimum": 2},
                "fidelity_window": {"type": "number"},
            },
        },
        "coherence": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["dephasing-bound", "exact-law"]},
                "n": {"type": "integer", "minimum": 1},
            },
        },
        "brownian": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "n_samples": {"type": "integer", "minimum": 1},
                "variance": {"type": "number", "exclusiveMinimum": 0},
                "stationary_from": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "derivatives": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L_list": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "n": {"type": "integer", "minimum": 1},
            },
        },
    },
}

_DEFAULTS = {
    "seed": 0,
    "model": {"boundary": "open", "params": {}},
    "times": {"start": 0.0},
    "method": {"kind": "exact", "sector": "auto", "n_traj": 500},
    "collapse": {"fidelity_window": 0.8, "num": 60},
    "brownian": {"eps": 1e-2, "n_samples": 2000, "variance": 0.5, "stationary_from": 1.0},
}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    if jsonschema is None:  # pragma: no cover
        raise ConfigError("jsonschema is required to validate configurations")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config violates schema: {exc.message}") from exc


def resolve_config(cfg: dict) -> dict:
    """Fill every default so the output header records the effective run."""
    out = json.loads(json.dumps(cfg))  # deep copy via round trip
    out.setdefault("seed", _DEFAULTS["seed"])
    for block, defaults in _DEFAULTS.items():
        if not isinstance(defaults, dict):
            continue
        if block in out or block in ("model", "times", "method"):
            sub = out.setdefault(block, {})
            for key, val in defaults.items():
                sub.setdefault(key, val)
    return out


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _header_lines(cfg: dict) -> list[str]:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return [
        f"# lindbladscars {__version__}",
        f"# experiment: {cfg['experiment']}",
        f"# config-sha256: {config_hash(cfg)}",
        f"# seed: {cfg['seed']}",
        f"# config: {canon}",
    ]


def write_csv(path: str, cfg: dict, columns: list[str], rows, extra_header: list[str] = ()):
    lines = _header_lines(cfg)
    lines.extend(extra_header)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    _write_text(path, "\n".join(lines) + "\n")


def write_json(path: str, cfg: dict, payload: dict):
    doc = {
        "artifact": f"lindbladscars {__version__}",
        "experiment": cfg["experiment"],
        "config_sha256": config_hash(cfg),
        "seed": cfg["seed"],
        "config": cfg,
        "result": payload,
    }
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_text(path: str, text: str):
    with open(path, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# shared pieces

def _model_from(cfg: dict, L: int | None = None):
    mc = cfg["model"]
    if L is None:
        if "L" not in mc:
            raise ConfigError("model.L is required for this experiment")
        L = mc["L"]
    if mc["id"] not in catalog_ids():
        raise ConfigError(f"unknown model id {mc['id']!r}; catalog: {catalog_ids()}")
    try:
        return build_model(mc["id"], L, boundary=mc["boundary"], params=mc["params"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _initial_state(cfg: dict, model) -> np.ndarray:
    sc = cfg.get("initial_state")
    if sc is None:
        raise ConfigError("initial_state is required for this experiment")
    spec = model.spec
    kind = sc["type"]
    try:
        if kind == "product":
            if "pattern" not in sc:
                raise ConfigError("product states need a pattern")
            return product_state(spec, sc["pattern"])
        if kind == "tower":
            return tower_state(spec, sc.get("n", spec.L // 2))
        if kind in ("aqmbs", "scar-plus-aqmbs"):
            n = sc.get("n", 1)
            k = np.pi + 2.0 * np.pi * sc.get("k_steps", 1) / spec.L
            if kind == "aqmbs":
                return aqmbs_state(spec, n, k)
            return scar_aqmbs_superposition(spec, n, k)
        return scar_state(ScarStateSpec(kind=kind, spec=spec))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _times(cfg: dict) -> np.ndarray:
    tc = cfg.get("times")
    if tc is None:
        raise ConfigError("times block is required for this experiment")
    if "list" in tc:
        return np.asarray(tc["list"], dtype=float)
    if "stop" not in tc or "num" not in tc:
        raise ConfigError("times needs either a list or stop + num")
    return np.linspace(tc.get("start", 0.0), tc["stop"], tc["num"])


def _observable(cfg: dict, model):
    oc = cfg.get("observable", {})
    site = oc.get("site", model.spec.L // 2)
    kind = oc.get("kind", "z")
    try:
        return site_operator(model.spec, kind, site)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# subcommands

def cmd_commutant(cfg: dict, out: str, threads: int) -> None:
    model = _model_from(cfg)
    basis = commutant_basis(model.algebra, seed=cfg["seed"])
    decomp = irrep_decomposition(model.algebra, basis, seed=cfg["seed"])
    total = sum(b.dim_krylov * b.multiplicity for b in decomp.blocks)
    rows = [(b.label, b.dim_krylov, b.multiplicity) for b in decomp.blocks]
    extra = [
        f"# commutant-dimension: {basis.dim}",
        f"# kernel-gap: {_fmt(basis.gap)}",
        f"# sum-D-d: {total}",
        f"# hilbert-dimension: {model.spec.dim}",
    ]
    write_csv(out, cfg, ["block", "D", "d"], rows, extra)
    print(f"dim(C) = {basis.dim}, blocks = {len(decomp.blocks)}, "
          f"sum D*d = {total} / {model.spec.dim}, gap = {basis.gap:.6g}")


def cmd_evolve(cfg: dict, out: str, threads: int) -> None:
    model = _model_from(cfg)
    psi0 = _initial_state(cfg, model)
    times = _times(cfg)
    obs = _observable(cfg, model)
    method = cfg["method"]
    if method["kind"] == "exact":
        result = evolve_exact(model, density_matrix(psi0), times, sector=method["sector"])
        fid = fidelity_series(result, psi0)
        ovals = observable_series(result, obs)
        rows = list(zip(times, ovals, fid))
        columns = ["time", "observable", "fidelity"]
    else:
        result = evolve_trajectories(
            model,
            psi0,
            times,
            n_traj=method["n_traj"],
            dt=method.get("dt"),
            seed=cfg["seed"],
            observables={"obs": obs},
            sector=method["sector"],
            n_threads=threads,
        )
        om, oe = result.observables["obs"]
        fm, fe = result.fidelity
        rows = list(zip(times, om, fm, oe, fe))
        columns = ["time", "observable", "fidelity", "observable_stderr", "fidelity_stderr"]
    fid_mean, fid_spread = plateau([r[2] for r in rows])
    extra = [f"# fidelity-plateau: {_fmt(fid_mean)}", f"# fidelity-plateau-spread: {_fmt(fid_spread)}"]
    write_csv(out, cfg, columns, rows, extra)
    print(f"fidelity plateau {fid_mean:.8g} (spread {fid_spread:.2g}) over final 10% of grid")


def cmd_collapse(cfg: dict, out: str, threads: int) -> None:
    cc = cfg.get("collapse")
    if cc is None or "L_list" not in cc or "scaling" not in cc or "x_max" not in cc:
        raise ConfigError("collapse needs L_list, scaling and x_max")
    scaling = cc["scaling"]
    x = np.linspace(0.0, cc["x_max"], cc["num"])
    grids, curves, rows = [], [], []
    for L in cc["L_list"]:
        model = _model_from(cfg, L=L)
        n = cfg.get("initial_state", {}).get("n", 1)
        k = default_aqmbs_momentum(L)
        psi0 = aqmbs_state(model.spec, n, k)
        times = L * np.sqrt(x) if scaling == "t2_over_L2" else L**2 * x
        result = evolve_exact(model, density_matrix(psi0), times, sector="auto")
        fid = fidelity_series(result, psi0)
        grids.append(x)
        curves.append(fid)
        rows.extend((xi, fi, L) for xi, fi in zip(x, fid))
    metric = collapse_discrepancy(grids, curves, f_min=cc["fidelity_window"])
    extra = [f"# collapse-max-spread: {_fmt(metric)}",
             f"# fidelity-window: {_fmt(cc['fidelity_window'])}"]
    write_csv(out, cfg, ["scaling_variable", "fidelity", "L"], rows, extra)
    print(f"collapse max |dF| = {metric:.4g} over F >= {cc['fidelity_window']} window")


def cmd_coherence(cfg: dict, out: str, threads: int) -> None:
    cc = cfg.get("coherence")
    if cc is None or "preset" not in cc:
        raise ConfigError("coherence needs a preset")
    times = _times(cfg)
    model = _model_from(cfg)
    spec = model.spec
    if cc["preset"] == "dephasing-bound":
        up = scar_state(ScarStateSpec(kind="ferromagnet-up", spec=spec))
        flip = product_state(spec, "d" + "u" * (spec.L - 1))
        psi0 = (up + flip) / np.sqrt(2.0)
        proj_s = density_matrix(up)
        proj_th = np.eye(spec.dim) - proj_s
        series = coherence_norm_series(model, density_matrix(psi0), proj_s, proj_th, times)
        g_min = 4.0 * min(model.rates.values())
        analytic = series[0] * np.exp(-g_min * times)
        label = "exponential_bound"
    elif cc["preset"] == "exact-law":
        n = cc.get("n", 1)
        k = default_aqmbs_momentum(spec.L)
        psi0 = scar_aqmbs_superposition(spec, n, k)
        scar = tower_state(spec, n)
        proj_s = density_matrix(scar)
        from .operators import sector_partition

        part = sector_partition(spec)
        m = -spec.L + 2 * n
        idx = part.indices(m)
        proj_m = np.zeros((spec.dim, spec.dim), dtype=complex)
        proj_m[idx, idx] = 1.0
        proj_th = proj_m - proj_s
        series = coherence_norm_series(
            model, density_matrix(psi0), proj_s, proj_th, times, sector=m
        )
        gamma = next(iter(model.rates.values()))
        rate = 2.0 * gamma * 2.0 * np.sin(np.pi / spec.L) ** 2
        analytic = 0.25 * np.exp(-rate * times)
        label = "exact_law"
    else:  # pragma: no cover
        raise ConfigError(f"unknown coherence preset {cc['preset']!r}")
    rows = list(zip(times, series, analytic))
    if label == "exponential_bound":
        gap = float(np.max(series - analytic))
        extra = [f"# max-bound-violation: {_fmt(gap)}"]
        note = f"max(series - bound) = {gap:.3g}"
    else:
        gap = float(np.max(np.abs(series - analytic)))
        extra = [f"# max-deviation: {_fmt(gap)}"]
        note = f"max |series - {label}| = {gap:.3g}"
    write_csv(out, cfg, ["time", "coherence_norm_sq", label], rows, extra)
    print(f"coherence series written; {note}")


def cmd_brownian(cfg: dict, out: str, threads: int) -> None:
    bc = cfg["brownian"] if "brownian" in cfg else dict(_DEFAULTS["brownian"])
    model = _model_from(cfg)
    times = _times(cfg)
    obs = _observable(cfg, model)
    variances = {lab: bc["variance"] for lab in model.algebra.labels("hamiltonian-term")}
    bspec = BrownianSpec(
        algebra=model.algebra,
        variances=variances,
        rates=dict(model.rates),
        eps=bc["eps"],
        n_samples=bc["n_samples"],
        seed=cfg["seed"],
    )
    deterministic = averaged_autocorrelation(bspec, obs, times)
    sampled, stderr = sample_circuit_autocorrelation(bspec, obs, times)
    basis = commutant_basis(model.algebra, seed=cfg["seed"])
    bound = mazur_bound(basis, obs)
    stat, t_stat = stationary_autocorrelation(bspec, obs, t_start=bc["stationary_from"])
    rows = [
        (t, sm, se, dv, bound)
        for t, sm, se, dv in zip(times, sampled, stderr, deterministic)
    ]
    extra = [
        f"# mazur-bound: {_fmt(bound)}",
        f"# stationary-value: {_fmt(stat)}",
        f"# stationary-time: {_fmt(t_stat)}",
    ]
    write_csv(out, cfg, ["time", "sampled_mean", "sampled_stderr", "deterministic", "mazur_bound"], rows, extra)
    print(f"Mazur bound {bound:.8g}; plateau {stat:.8g} at t = {t_stat:.3g}")


def cmd_derivatives(cfg: dict, out: str, threads: int) -> None:
    dc = cfg.get("derivatives", {})
    l_list = dc.get("L_list", [cfg["model"].get("L", 4)])
    n = dc.get("n", 1)
    reports = []
    for L in l_list:
        model = _model_from(cfg, L=L)
        k = default_aqmbs_momentum(L)
        psi = aqmbs_state(model.spec, n, k)
        obs = _observable(cfg, model)
        rep = short_time_derivatives(model, psi, aqmbs_k=k, observable=obs)
        reports.append(
            {
                "L": L,
                "n": n,
                "momentum": k,
                "first_numeric": rep.first_numeric,
                "first_analytic": rep.first_analytic,
                "second_numeric": rep.second_numeric,
                "second_analytic": rep.second_analytic,
                "observable_rate": rep.observable_rate,
                "observable_bound": rep.observable_bound,
            }
        )
    write_json(out, cfg, {"reports": reports})
    print(f"wrote {len(reports)} derivative reports")


COMMANDS = {
    "commutant": cmd_commutant,
    "evolve": cmd_evolve,
    "collapse": cmd_collapse,
    "coherence": cmd_coherence,
    "brownian": cmd_brownian,
    "derivatives": cmd_derivatives,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lindbladscars",
        description="Commutant algebras and scar dynamics of Lindbladian spin chains",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to a JSON experiment config")
    parser.add_argument("--out", help="output path (overrides config)")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for trajectories")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = resolve_config(cfg)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative")
            cfg["seed"] = args.seed
        if cfg["experiment"] != args.command:
            raise ConfigError(
                f"config is for experiment {cfg['experiment']!r}, not {args.command!r}"
            )
        out = args.out or cfg.get("output")
        if not out:
            raise ConfigError("no output path (config 'output' or --out)")
        cfg["output"] = out
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        COMMANDS[args.command](cfg, out, max(args.threads, 1))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"output failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
