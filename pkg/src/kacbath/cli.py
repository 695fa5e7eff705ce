"""Command-line entry point.

One executable, nine subcommands, one shared JSON configuration shape.
Curves go to CSV (17 significant digits, '.' decimal), reports and
sweeps to JSON, operators to the plain matrix format. Exit codes:
0 success, 2 configuration problem, 3 a numerical tolerance failed,
4 file I/O. Failures additionally emit a one-line machine-readable
record on stderr.

Verification subcommands write their artifact first and raise after,
so a tolerance failure still leaves the numbers on disk for a
post-mortem.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bounds import (
    anisotropic_pair_data,
    bound_curve,
    estimate_l,
    lambda_rate,
    make_bound_params,
    scaling_study,
)
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DegenerateBoundError,
    HorizonError,
    KacbathError,
    NegativeWeightError,
    StateError,
    ToleranceError,
    UnitVectorError,
)
from .evolution import default_time_grid, distance_curve
from .hermite import HermiteCoeffs, make_basis
from .jump import (
    EquilibriumInit,
    PerturbationInit,
    SimConfig,
    hermite_observable,
    run_ensemble,
)
from .kinematics import JointState, ModelParams, total_energy, total_momentum
from .output import read_json, write_csv, write_json, write_matrix
from .projector import estimate_lemma1_ratio, lemma1_constant
from .randomness import RngStream
from .spectral import (
    assemble_T,
    assemble_generator,
    invariant_projector,
    spectral_gap,
    symmetric_tensor_eigenvalues,
    verify_lemma2,
)

LEMMA3_SUP = 2.0 / 3.0


# ---------------------------------------------------------------------------
# shared pieces

def _model(cfg: RunConfig) -> ModelParams:
    return ModelParams(cfg.m, cfg.n, lambda_s=cfg.lambda_s,
                       lambda_r=cfg.lambda_r, mu=cfg.mu)


def _unit_coeff(m: int, degree: int, key_exponent: dict[int, int]) -> HermiteCoeffs:
    """1 plus one unit Hermite mode: exponent map {var: power} on 3M vars."""
    b = make_basis(3 * m, degree)
    vec = np.zeros(b.size)
    vec[0] = 1.0
    key = tuple(key_exponent.get(i, 0) for i in range(3 * m))
    vec[b.index[key]] = 1.0
    return HermiteCoeffs(b, vec)


def perturbation_data(family: str, eps: float, m: int) -> HermiteCoeffs:
    """Named initial-density families, as mean-one Hermite data on 3M vars."""
    b_deg = {"h1_v1x": 1, "h2_aniso": 2}
    if family not in b_deg:
        raise ConfigError(f"unknown perturbation family {family!r}")
    if m == 1 and family == "h2_aniso":
        return anisotropic_pair_data(eps)
    b = make_basis(3 * m, b_deg[family])
    vec = np.zeros(b.size)
    vec[0] = 1.0
    def key(var: int, power: int):
        return tuple(power if i == var else 0 for i in range(3 * m))
    if family == "h1_v1x":
        vec[b.index[key(0, 1)]] = eps
    else:
        vec[b.index[key(0, 2)]] = eps
        vec[b.index[key(1, 2)]] = -eps
    return HermiteCoeffs(b, vec)


def observable_registry(p: ModelParams) -> dict:
    """The named observables the simulate subcommand can record."""
    return {
        "v1x": lambda s: float(s.v[0, 0]),
        "v1x_h1": hermite_observable(_unit_coeff(p.m, 1, {0: 1}), p),
        "v1x_h2": hermite_observable(_unit_coeff(p.m, 2, {0: 2}), p),
        "system_energy": lambda s: float(np.sum(s.v ** 2)),
        "total_energy": total_energy,
        "momentum_x": lambda s: float(total_momentum(s)[0]),
    }


def _record_times(cfg: RunConfig) -> np.ndarray:
    if cfg.record_times is not None:
        return np.asarray(cfg.record_times, dtype=float)
    return default_time_grid(cfg.t_end, count=cfg.grid["count"],
                             t_min=cfg.grid["t_min"])


def _require_config(cfg: RunConfig | None) -> RunConfig:
    if cfg is None:
        raise ConfigError("this subcommand needs --config")
    return cfg


def _measured_bound_params(cfg: RunConfig, p: ModelParams, h0: HermiteCoeffs):
    """BoundParams with the gap and the bath-map dispersion measured here."""
    gen = assemble_generator("reservoir", p, cfg.degree)
    _, _, comp = invariant_projector(p, cfg.degree)
    k_hat = spectral_gap(gen, comp)
    l_hat = estimate_l(assemble_T(1, cfg.degree))
    bp = make_bound_params(
        c=lemma1_constant(p.m, p.n).c,
        lambda_s=cfg.lambda_s,
        mu=cfg.mu,
        k=k_hat,
        l=l_hat,
        h0_norm=h0.fluctuation_norm(),
    )
    return bp, k_hat, l_hat


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(cfg: RunConfig | None, args) -> int:
    cfg = _require_config(cfg)
    p = _model(cfg)
    times = _record_times(cfg)
    sim = SimConfig(t_end=cfg.t_end, record_times=tuple(float(t) for t in times),
                    ensemble=cfg.ensemble, seed=cfg.seed,
                    system_kind=cfg.system_kind)
    if cfg.init["kind"] == "equilibrium":
        init = EquilibriumInit()
    else:
        init = PerturbationInit(
            perturbation_data(cfg.init["family"], cfg.init["eps"], cfg.m))
    registry = observable_registry(p)
    try:
        obs = {name: registry[name] for name in cfg.observables}
    except KeyError as exc:
        raise ConfigError(f"unknown observable {exc.args[0]!r}") from exc
    records = run_ensemble(sim, p, init, obs, workers=cfg.threads)
    write_csv(args.out, ["time", "observable", "mean", "std_error", "n_samples"],
              [(r.time, r.observable, r.mean, r.std_error, r.n_samples)
               for r in records])
    return 0


def cmd_spectral(cfg: RunConfig | None, args) -> int:
    cfg = _require_config(cfg)
    p = _model(cfg)
    if cfg.operator == "bath_map":
        op = assemble_T(p.m, cfg.degree)
    else:
        op = assemble_generator(cfg.operator, p, cfg.degree)
    write_matrix(args.out, op.mat)
    return 0


def cmd_verify_lemma1(cfg: RunConfig | None, args) -> int:
    cfg = _require_config(cfg)
    ms = cfg.system_sizes if cfg.system_sizes is not None else (cfg.m,)
    ns = cfg.reservoir_sizes if cfg.reservoir_sizes is not None else (cfg.n,)
    rows = []
    failures = []
    for row_id, (m, n) in enumerate((m, n) for m in ms for n in ns):
        h = perturbation_data(cfg.init["family"], cfg.init["eps"], m)
        est = estimate_lemma1_ratio(h, m, n, cfg.samples,
                                    RngStream(cfg.seed, row_id), inner=cfg.inner)
        c = lemma1_constant(m, n).c
        rows.append((m, n, c, est.ratio, est.stderr, cfg.samples * cfg.inner))
        if est.ratio > c + 3.0 * est.stderr:
            failures.append(f"M={m} N={n}: ratio {est.ratio:.6g} > "
                            f"C + 3 stderr = {c + 3 * est.stderr:.6g}")
    write_csv(args.out, ["M", "N", "C", "ratio", "stderr", "samples"], rows)
    if failures:
        raise ToleranceError("projector contraction violated: " + "; ".join(failures))
    return 0


def cmd_verify_lemma2(cfg: RunConfig | None, args) -> int:
    cfg = _require_config(cfg)
    p = _model(cfg)
    basis = make_basis(3 * cfg.m, cfg.degree)
    trials = []
    for trial in range(cfg.random_polynomials):
        vec = RngStream(cfg.seed, trial).rng.standard_normal(basis.size)
        res = verify_lemma2(HermiteCoeffs(basis, vec), p, d=cfg.degree)
        trials.append({"lhs": res.lhs, "rhs": res.rhs,
                       "variance_bound": res.variance_bound})
    identity_defect = max(abs(t["lhs"] - t["rhs"]) for t in trials)
    bound_violation = max(t["lhs"] - t["variance_bound"] for t in trials)
    write_json(args.out, {
        "m": cfg.m, "n": cfg.n, "degree": cfg.degree,
        "random_polynomials": cfg.random_polynomials,
        "identity_defect": identity_defect,
        "bound_violation": bound_violation,
        "trials": trials,
    })
    if identity_defect > 1e-9:
        raise ToleranceError(
            f"averaged-rotation identity defect {identity_defect:.3e} > 1e-9")
    if bound_violation > 1e-12:
        raise ToleranceError(
            f"variance bound violated by {bound_violation:.3e}")
    return 0


def cmd_verify_lemma3(cfg: RunConfig | None, args) -> int:
    max_degree = args.max_degree
    if max_degree is None:
        max_degree = cfg.max_degree if cfg is not None else 6
    if not 1 <= max_degree <= 6:
        raise ConfigError(f"max degree must be in 1..6, got {max_degree}")
    t = assemble_T(1, max_degree)
    tensor_route = {}
    matrix_route = {}
    for deg in range(1, max_degree + 1):
        tensor_route[str(deg)] = float(np.max(symmetric_tensor_eigenvalues(deg)))
        matrix_route[str(deg)] = float(
            np.linalg.eigvalsh(t.block(deg)).max())
    route_gap = max(abs(tensor_route[k] - matrix_route[k]) for k in tensor_route)
    top = max(matrix_route.values())
    payload = {
        "max_degree": max_degree,
        "supremum": LEMMA3_SUP,
        "tensor_route": tensor_route,
        "matrix_route": matrix_route,
        "route_disagreement": route_gap,
        "top_eigenvalue": top,
        "degree1_eigenvalue": matrix_route["1"],
    }
    if args.out:
        write_json(args.out, payload)
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    if route_gap > 1e-9:
        raise ToleranceError(f"eigenvalue routes disagree by {route_gap:.3e}")
    if top > LEMMA3_SUP + 1e-10:
        raise ToleranceError(f"bath-map eigenvalue {top!r} exceeds 2/3")
    if abs(matrix_route["1"] - LEMMA3_SUP) > 1e-12:
        raise ToleranceError(
            f"degree-1 eigenvalue {matrix_route['1']!r} is not 2/3")
    return 0


def cmd_gap(cfg: RunConfig | None, args) -> int:
    cfg = _require_config(cfg)
    p = _model(cfg)
    gen = assemble_generator(cfg.system_kind, p, cfg.degree)
    _, _, comp = invariant_projector(p, cfg.degree)
    k_hat = spectral_gap(gen, comp)
    l_hat = estimate_l(assemble_T(1, cfg.degree))
    write_json(args.out, {
        "m": cfg.m, "n": cfg.n, "degree": cfg.degree,
        "lambda_s": cfg.lambda_s, "lambda_r": cfg.lambda_r, "mu": cfg.mu,
        "system_kind": cfg.system_kind,
        "k_hat": k_hat, "l_hat": l_hat,
    })
    return 0


def cmd_distance(cfg: RunConfig | None, args) -> int:
    cfg = _require_config(cfg)
    p = _model(cfg)
    h0 = perturbation_data(cfg.init["family"], cfg.init["eps"], cfg.m)
    times = _record_times(cfg)
    curve = distance_curve(p, h0, times, d=cfg.degree,
                           cross_check=cfg.cross_check)
    bp, _, _ = _measured_bound_params(cfg, p, h0)
    bc = bound_curve(bp, cfg.m, cfg.n, times)
    write_csv(args.out, ["t", "distance", "bound", "bound_term1", "bound_term2"],
              list(zip(curve.times, curve.distance, bc.total, bc.term1, bc.term2)))
    slack = min(b - d for b, d in zip(bc.total, curve.distance))
    if slack < -1e-9:
        raise ToleranceError(
            f"distance exceeds the bound by {-slack:.3e} somewhere on the grid")
    return 0


def cmd_bound(cfg: RunConfig | None, args) -> int:
    cfg = _require_config(cfg)
    if cfg.reservoir_sizes is not None and len(cfg.reservoir_sizes) >= 2:
        study = scaling_study(
            cfg.m, ns=cfg.reservoir_sizes, eps=cfg.eps,
            lambda_s=cfg.lambda_s, lambda_r=cfg.lambda_r, mu=cfg.mu,
            t_end=cfg.t_end, grid_count=cfg.grid["count"], d=cfg.degree,
            cross_check=cfg.cross_check)
        write_json(args.out, {
            "m": study.m, "degree": study.degree, "eps": study.eps,
            "rows": [{"n": r.n, "limit": r.limit, "gap": r.gap,
                      "bump": r.bump} for r in study.rows],
            "p": study.p, "q": study.q,
        })
        return 0
    p = _model(cfg)
    h0 = perturbation_data(cfg.init["family"], cfg.init["eps"], cfg.m)
    times = _record_times(cfg)
    bp, _, _ = _measured_bound_params(cfg, p, h0)
    bc = bound_curve(bp, cfg.m, cfg.n, times)
    write_csv(args.out, ["t", "bound", "bound_term1", "bound_term2"],
              list(zip(bc.times, bc.total, bc.term1, bc.term2)))
    return 0


# ---------------------------------------------------------------------------
# report: recognize result files by shape and re-check their claims

def _check_distance_rows(rows) -> tuple[bool, str]:
    slack = min(float(r["bound"]) - float(r["distance"]) for r in rows)
    split = max(abs(float(r["bound"]) - float(r["bound_term1"])
                    - float(r["bound_term2"])) for r in rows)
    ok = slack >= -1e-9 and split <= 1e-12
    return ok, f"min slack {slack:.3e}, max term-split defect {split:.3e}"


def _check_lemma1_rows(rows) -> tuple[bool, str]:
    worst = max(float(r["ratio"]) - (float(r["C"]) + 3.0 * float(r["stderr"]))
                for r in rows)
    return worst <= 0.0, f"worst ratio excess over C + 3 stderr: {worst:.3e}"


def _check_moment_rows(rows) -> tuple[bool, str]:
    ok = all(float(r["std_error"]) >= 0.0 and int(r["n_samples"]) >= 1
             for r in rows)
    return ok, f"{len(rows)} records structurally sound" if ok else "bad record"


def _check_lemma2_json(doc) -> tuple[bool, str]:
    ok = doc["identity_defect"] <= 1e-9 and doc["bound_violation"] <= 1e-12
    return ok, (f"identity defect {doc['identity_defect']:.3e}, "
                f"bound violation {doc['bound_violation']:.3e}")


def _check_lemma3_json(doc) -> tuple[bool, str]:
    top = doc["top_eigenvalue"]
    ok = (top <= LEMMA3_SUP + 1e-10
          and abs(doc["degree1_eigenvalue"] - LEMMA3_SUP) <= 1e-12
          and doc["route_disagreement"] <= 1e-9)
    return ok, f"top eigenvalue {top!r}"


def _check_scaling_json(doc) -> tuple[bool, str]:
    ok = 0.8 <= doc["p"] <= 1.2 and 0.3 <= doc["q"] <= 0.7
    return ok, f"p = {doc['p']:.3f}, q = {doc['q']:.3f}"


def _check_gap_json(doc) -> tuple[bool, str]:
    ok = doc["k_hat"] > 0.0 and doc["l_hat"] >= 0.0
    return ok, f"k_hat = {doc['k_hat']:.6g}, l_hat = {doc['l_hat']:.6g}"


_CSV_CHECKS = {
    ("t", "distance", "bound", "bound_term1", "bound_term2"):
        ("distance-vs-bound", _check_distance_rows),
    ("M", "N", "C", "ratio", "stderr", "samples"):
        ("projector-contraction", _check_lemma1_rows),
    ("time", "observable", "mean", "std_error", "n_samples"):
        ("ensemble-moments", _check_moment_rows),
}

_JSON_CHECKS = [
    ("identity_defect", "rotation-average-identity", _check_lemma2_json),
    ("tensor_route", "bath-map-spectrum", _check_lemma3_json),
    ("rows", "scaling-table", _check_scaling_json),
    ("k_hat", "spectral-gap", _check_gap_json),
]


def _read_csv_dicts(path: str) -> list[dict] | None:
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return None
        return list(reader)


def cmd_report(cfg: RunConfig | None, args) -> int:
    import os

    checks = []
    for name in sorted(os.listdir(args.dir)):
        path = os.path.join(args.dir, name)
        if not os.path.isfile(path):
            continue
        try:
            if name.endswith(".csv"):
                rows = _read_csv_dicts(path)
                if not rows:
                    continue
                kind_fn = _CSV_CHECKS.get(tuple(rows[0].keys()))
                if kind_fn is None:
                    continue
                kind, fn = kind_fn
                passed, detail = fn(rows)
            elif name.endswith(".json"):
                doc = read_json(path)
                if not isinstance(doc, dict):
                    continue
                for key, kind, fn in _JSON_CHECKS:
                    if key in doc:
                        passed, detail = fn(doc)
                        break
                else:
                    continue
            else:
                continue
        except (KeyError, ValueError, TypeError) as exc:
            kind, passed, detail = "unreadable", False, f"{type(exc).__name__}: {exc}"
        checks.append({"file": name, "kind": kind, "passed": passed,
                       "detail": detail})

    if not checks:
        raise ConfigError(f"no recognized result files in {args.dir!r}")
    overall = all(c["passed"] for c in checks)
    payload = {"directory": args.dir, "passed": overall,
               "files_checked": len(checks), "checks": checks}
    if args.out:
        write_json(args.out, payload)
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if overall else 3


# ---------------------------------------------------------------------------
# wiring

_HANDLERS = {
    "simulate": cmd_simulate,
    "spectral": cmd_spectral,
    "verify-lemma1": cmd_verify_lemma1,
    "verify-lemma2": cmd_verify_lemma2,
    "verify-lemma3": cmd_verify_lemma3,
    "gap": cmd_gap,
    "distance": cmd_distance,
    "bound": cmd_bound,
    "report": cmd_report,
}

_NEEDS_OUT = {"simulate", "spectral", "verify-lemma1", "verify-lemma2",
              "gap", "distance", "bound"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kacbath",
        description="Numerical checks for a tagged particle system coupled "
                    "to a finite reservoir or an infinite bath.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _HANDLERS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON configuration file")
        s.add_argument("--out", required=name in _NEEDS_OUT,
                       help="output file (CSV, JSON, or matrix)")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--threads", type=int, help="override the config threads")
        if name == "verify-lemma3":
            s.add_argument("--max-degree", type=int, dest="max_degree",
                           help="highest polynomial degree to check (1..6)")
        if name == "report":
            s.add_argument("--dir", default=".",
                           help="run directory to summarize")
    return parser


def _exit_code(exc: Exception) -> int | None:
    if isinstance(exc, (ConfigError, StateError, UnitVectorError)):
        return 2
    if isinstance(exc, (ToleranceError, HorizonError, DegenerateBoundError,
                        NegativeWeightError)):
        return 3
    if isinstance(exc, OSError):
        return 4
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = None
        if args.config is not None:
            cfg = load_config(args.config)
            overrides = {}
            if args.seed is not None:
                overrides["seed"] = args.seed
            if args.threads is not None:
                overrides["threads"] = args.threads
            if overrides:
                import dataclasses

                cfg = dataclasses.replace(cfg, **overrides)
        return _HANDLERS[args.command](cfg, args)
    except (KacbathError, OSError) as exc:
        code = _exit_code(exc)
        if code is None:
            raise
        record = {"error": type(exc).__name__, "message": str(exc),
                  "exit_code": code}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
