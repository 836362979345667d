"""``semcf`` command line: validate model files, run queries, compare with
the Monte Carlo oracle.

Exit codes: 0 success, 1 unexpected failure, 2 input/model/numerical error,
3 unidentified effect, 4 oracle disagreement, 5 rejection budget exceeded.
Every outcome, errors included, is printed as one JSON object on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import engine as E
from .conditioning import Evidence
from .errors import ParseError, RejectionBudgetExceeded, SEMError, Unidentified
from .identification import identify
from .io import dumps, evidence_to_dict, load_model, parse_evidence, parse_number
from .oracle import SimConfig, mc_counterfactual
from .sem import LinearSEM, implied_moments

EXIT_OK, EXIT_UNEXPECTED, EXIT_INPUT, EXIT_UNIDENTIFIED, EXIT_ORACLE_FAIL, EXIT_REJECTION = range(6)
ORACLE_SE = 4.0

_QUERY_KEYS = {"x", "y", "x0", "plan", "optimize_over", "rank", "evidence", "full"}


def exit_code_for(exc: BaseException) -> int:
    """Exit code as a function of the error class."""
    if isinstance(exc, Unidentified):
        return EXIT_UNIDENTIFIED
    if isinstance(exc, RejectionBudgetExceeded):
        return EXIT_REJECTION
    if isinstance(exc, SEMError):
        return EXIT_INPUT
    return EXIT_UNEXPECTED


@dataclass
class Query:
    x: str
    y: str
    evidence: Evidence
    kind: str  # identify | intervene | point | plan | optimal | rank
    x0: float = 0.0
    plan: Optional[E.Plan] = None
    w: tuple = ()
    candidates: tuple = ()
    full: bool = False
    raw: Optional[dict] = None


def parse_query(doc) -> Query:
    if not isinstance(doc, dict):
        raise ParseError("query must be a JSON object")
    extra = set(doc) - _QUERY_KEYS
    if extra:
        raise ParseError(f"unknown keys in query: {sorted(extra)}")
    for key in ("x", "y"):
        if not isinstance(doc.get(key), str):
            raise ParseError(f"query needs a variable name under {key!r}")
    x, y = doc["x"], doc["y"]
    ev = parse_evidence(doc.get("evidence")).normalized()
    x0 = parse_number(doc.get("x0", 0.0), "x0")
    full = bool(doc.get("full", False))
    q = Query(x, y, ev, "identify", x0=x0, full=full, raw=doc)

    modes = [k for k in ("plan", "optimize_over", "rank") if k in doc]
    if len(modes) > 1:
        raise ParseError(f"query may use only one of {modes}")
    if "rank" in doc:
        cands = doc["rank"]
        if not isinstance(cands, list) or not all(isinstance(c, list) for c in cands):
            raise ParseError("'rank' must be a list of covariate lists")
        q.kind, q.candidates = "rank", tuple(tuple(c) for c in cands)
    elif "optimize_over" in doc:
        w = doc["optimize_over"]
        if not isinstance(w, list):
            raise ParseError("'optimize_over' must be a list of names")
        q.kind, q.w = "optimal", tuple(w)
    elif "plan" in doc:
        p = doc["plan"]
        if not isinstance(p, dict) or set(p) - {"x0", "w", "a"}:
            raise ParseError("'plan' must be an object with keys x0, w, a")
        x0 = parse_number(p.get("x0", x0), "plan.x0")
        a = [parse_number(c, "plan.a") for c in p.get("a", [])]
        q.kind, q.x0, q.plan = "plan", x0, E.Plan(x, x0, tuple(p.get("w", [])), tuple(a))
    elif "x0" in doc:
        if ev.box:
            q.kind, q.plan = "plan", E.Plan(x, x0)
        elif ev.point:
            q.kind = "point"
        else:
            q.kind = "intervene"
    return q


def _config(args) -> E.EngineConfig:
    return E.EngineConfig(tol=args.tol, seed=args.seed,
                          max_adjustment_size=args.max_adjustment_size)


def _result_dict(q: Query, res: E.CounterfactualResult) -> dict:
    out = {
        "route": res.route.to_dict(),
        "y_mean": res.y_mean,
        "y_var": res.y_var,
        "moment_error": res.moment_error,
        "warnings": list(res.warnings),
    }
    if res.plan is not None and q.kind in ("plan", "optimal"):
        out["plan"] = res.plan.to_dict()
    if res.residual_cross_cov is not None:
        out["residual_cross_cov"] = {
            "rows": list(res.moments.variables),
            "cols": list(res.plan.w),
            "matrix": res.residual_cross_cov,
        }
    if q.full:
        out["moments"] = {"variables": list(res.moments.variables),
                          "mean": res.moments.mean, "cov": res.moments.cov}
    return out


def run_query(model, q: Query, config: E.EngineConfig = E.EngineConfig()):
    """Execute ``q``; returns ``(payload, result_or_None)``."""
    if q.kind == "identify":
        if isinstance(model, LinearSEM):
            observed = model.observed
            moments = implied_moments(model).subset(observed)
        else:
            observed, moments = model.observed, model.moments
        if isinstance(model, E.ObservationalModel) and model.tau is not None:
            route = E.IdentificationResult("supplied", float(model.tau), {})
        else:
            route = identify(model.diagram, observed, moments, q.x, q.y,
                             max_adjustment_size=config.max_adjustment_size)
        payload = {"route": route.to_dict(), "warnings": []}
        if not route.identified:
            payload["warnings"].append("total effect is not identifiable from the observed set")
        return payload, None
    if q.kind == "rank":
        ranked = E.rank_covariate_sets(model, q.evidence, q.candidates, q.x, q.y, config=config)
        return {"ranking": [{"w": list(c.w), "score": c.score,
                             "optimal_variance": c.optimal_variance, "flag": c.flag}
                            for c in ranked],
                "warnings": []}, None
    if q.kind == "intervene":
        res = E.intervene(model, q.x, q.y, q.x0, full=q.full, config=config)
    elif q.kind == "point":
        res = E.counterfactual_point(model, q.evidence, q.x, q.y, q.x0, full=q.full, config=config)
    elif q.kind == "plan":
        res = E.counterfactual_plan(model, q.evidence, q.plan, q.y, full=q.full, config=config)
    else:
        _, res = E.optimal_plan(model, q.evidence, q.w, q.x, q.y, q.x0, full=q.full, config=config)
    return _result_dict(q, res), res


def _echo(q: Query) -> dict:
    echo = dict(q.raw)
    echo["evidence"] = evidence_to_dict(q.evidence)
    return echo


def _read_query(arg: str):
    try:
        text = sys.stdin.read() if arg == "-" else arg
        if arg != "-" and not arg.lstrip().startswith("{"):
            with open(arg) as fh:
                text = fh.read()
        return json.loads(text)
    except OSError as exc:
        raise ParseError(f"cannot read query {arg}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"query is not valid JSON ({exc})") from None


def cmd_validate(args) -> tuple:
    model = load_model(args.model)
    if isinstance(model, LinearSEM):
        m = implied_moments(model)
        kind = "structural"
    else:
        m = model.moments
        kind = "observational"
    return EXIT_OK, {
        "status": "ok",
        "mode": kind,
        "variables": list(model.diagram.vertices),
        "topological_order": list(model.diagram.topological_order),
        "implied_moments": {"variables": list(m.variables), "mean": m.mean, "cov": m.cov},
        "variances": {v: m.sigma(v) for v in m.variables},
    }


def cmd_query(args) -> tuple:
    model = load_model(args.model)
    q = parse_query(_read_query(args.query))
    payload, _ = run_query(model, q, _config(args))
    return EXIT_OK, {"query_echo": _echo(q), **payload}


def _oracle_plan(q: Query, res: E.CounterfactualResult) -> E.Plan:
    if q.kind in ("intervene", "point"):
        return E.Plan(q.x, q.x0)
    return res.plan


def cmd_oracle(args) -> tuple:
    model = load_model(args.model)
    if not isinstance(model, LinearSEM):
        raise ParseError("the oracle needs a structural model")
    q = parse_query(_read_query(args.query))
    if q.kind in ("identify", "rank"):
        raise ParseError("the oracle compares intervene, point, plan and optimize_over queries")
    config = _config(args)
    payload, res = run_query(model, q, config)
    plan = _oracle_plan(q, res)
    mc = mc_counterfactual(model, q.evidence, plan, q.y, SimConfig(n_draws=args.draws, seed=args.seed))

    floor = 1e-8 + res.moment_error
    checks = {
        "mean": abs(res.y_mean - mc.y_mean) <= ORACLE_SE * mc.se_mean + floor,
        "variance": abs(res.y_var - mc.y_var) <= ORACLE_SE * mc.se_var + floor,
    }
    if plan.w:
        cross = np.asarray(res.residual_cross_cov)[0]
        checks["cross_cov"] = bool(np.all(np.abs(cross - mc.cross_cov)
                                          <= ORACLE_SE * mc.se_cross_cov + floor))
    passed = all(checks.values())
    out = {
        "query_echo": _echo(q),
        "engine": payload,
        "oracle": {
            "y_mean": mc.y_mean, "se_mean": mc.se_mean,
            "y_var": mc.y_var, "se_var": mc.se_var,
            "cross_cov": mc.cross_cov, "se_cross_cov": mc.se_cross_cov,
            "acceptance_rate": mc.acceptance_rate, "n_draws": args.draws, "seed": args.seed,
        },
        "checks": checks,
        "threshold_se": ORACLE_SE,
        "pass": passed,
    }
    return (EXIT_OK if passed else EXIT_ORACLE_FAIL), out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semcf", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--draws", type=int, default=1_000_000, help="oracle draws")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-8,
                        help="target absolute error of box-evidence moments")
    common.add_argument("--max-adjustment-size", type=int, default=4,
                        help="largest adjustment set tried by identification")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate", parents=[common], help="check a model file")
    v.add_argument("model")
    for name, help_ in (("query", "evaluate a query"),
                        ("oracle", "compare a query with Monte Carlo simulation")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("model")
        s.add_argument("query", help="JSON text, a path, or - for stdin")
    return p


_COMMANDS = {"validate": cmd_validate, "query": cmd_query, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code, out = _COMMANDS[args.command](args)
    except Exception as exc:  # every failure becomes a JSON error object
        code = exit_code_for(exc)
        out = {"status": "error", "error": type(exc).__name__, "message": str(exc)}
    print(dumps(out))
    return code


if __name__ == "__main__":
    sys.exit(main())
