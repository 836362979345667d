"""JSON model files and query documents.

Structural model::

    {"mode": "structural",
     "variables": ["Z", "X", "Y"],
     "edges": [{"from": "Z", "to": "X", "coef": 1.0}, ...],
     "error_cov": [{"u": "X", "v": "Y", "cov": 0.5},
                   {"var": "Z", "variance": 1.0, "mean": 0.0}]}

Observational model: same graph keys (``coef``/``cov`` optional) plus
``"covariance": {"order": [...], "matrix": [[...], ...], "mean": [...]}``
and optionally ``"observed"`` and ``"tau"``.  Infinite box bounds are the
strings ``"-inf"`` and ``"inf"``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .conditioning import Evidence
from .engine import ObservationalModel
from .errors import ParseError
from .graph import build_diagram
from .sem import GaussianMoments, LinearSEM

_MODEL_KEYS = {"mode", "variables", "edges", "error_cov", "observed", "covariance", "tau"}
_EDGE_KEYS = {"from", "to", "coef"}
_COV_KEYS = {"u", "v", "cov"}
_VAR_KEYS = {"var", "variance", "mean"}
_MATRIX_KEYS = {"order", "matrix", "mean"}


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ParseError(f"{where} must be an object")
    extra = set(obj) - allowed
    if extra:
        raise ParseError(f"unknown keys in {where}: {sorted(extra)}")


def parse_number(value, where="value") -> float:
    """Float from a JSON number or one of the strings "inf", "-inf"."""
    if isinstance(value, bool):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        if value.strip().lower() in ("-inf", "-infinity"):
            return -math.inf
        raise ParseError(f"{where}: expected a number or 'inf'/'-inf', got {value!r}")
    if not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _finite(value, where):
    x = parse_number(value, where)
    if not math.isfinite(x):
        raise ParseError(f"{where} must be finite")
    return x


def parse_model(doc: dict):
    """Build a :class:`LinearSEM` or :class:`ObservationalModel` from a dict."""
    _reject_unknown(doc, _MODEL_KEYS, "model")
    mode = doc.get("mode", "structural")
    if mode not in ("structural", "observational"):
        raise ParseError(f"mode must be 'structural' or 'observational', not {mode!r}")
    variables = doc.get("variables")
    if not isinstance(variables, list) or not all(isinstance(v, str) for v in variables):
        raise ParseError("'variables' must be a list of names")
    structural = mode == "structural"

    edges = []
    for k, e in enumerate(doc.get("edges", [])):
        _reject_unknown(e, _EDGE_KEYS, f"edges[{k}]")
        if "from" not in e or "to" not in e:
            raise ParseError(f"edges[{k}] needs 'from' and 'to'")
        if "coef" in e:
            edges.append((e["from"], e["to"], _finite(e["coef"], f"edges[{k}].coef")))
        elif structural:
            raise ParseError(f"edges[{k}] needs 'coef' in structural mode")
        else:
            edges.append((e["from"], e["to"]))

    bidirected, variances, means = [], {}, {}
    for k, e in enumerate(doc.get("error_cov", [])):
        if isinstance(e, dict) and "var" in e:
            _reject_unknown(e, _VAR_KEYS, f"error_cov[{k}]")
            if "variance" in e:
                variances[e["var"]] = _finite(e["variance"], f"error_cov[{k}].variance")
            if "mean" in e:
                means[e["var"]] = _finite(e["mean"], f"error_cov[{k}].mean")
            continue
        _reject_unknown(e, _COV_KEYS, f"error_cov[{k}]")
        if "u" not in e or "v" not in e:
            raise ParseError(f"error_cov[{k}] needs 'u' and 'v' (or 'var')")
        if "cov" in e:
            bidirected.append((e["u"], e["v"], _finite(e["cov"], f"error_cov[{k}].cov")))
        elif structural:
            raise ParseError(f"error_cov[{k}] needs 'cov' in structural mode")
        else:
            bidirected.append((e["u"], e["v"]))

    G = build_diagram(variables, edges, bidirected)
    if structural:
        for key in ("covariance", "tau"):
            if key in doc:
                raise ParseError(f"'{key}' is only allowed in observational mode")
        return LinearSEM(G, variances, means, doc.get("observed"))

    cov = doc.get("covariance")
    if cov is None:
        raise ParseError("observational mode needs 'covariance'")
    _reject_unknown(cov, _MATRIX_KEYS, "covariance")
    order = cov.get("order")
    if not isinstance(order, list):
        raise ParseError("covariance.order must be a list of names")
    try:
        matrix = np.array([[_finite(c, "covariance.matrix") for c in row] for row in cov["matrix"]])
    except (KeyError, TypeError):
        raise ParseError("covariance.matrix must be a list of rows") from None
    mean = [_finite(m, "covariance.mean") for m in cov.get("mean", [0.0] * len(order))]
    moments = GaussianMoments(tuple(order), mean, matrix.reshape(len(order), -1) if matrix.size else matrix)
    observed = doc.get("observed", order)
    if list(observed) != list(order):
        moments = moments.subset(observed)
    tau = doc.get("tau")
    return ObservationalModel(G, moments, None if tau is None else _finite(tau, "tau"))


def model_to_dict(model) -> dict:
    """Inverse of :func:`parse_model`."""
    G = model.diagram
    doc = {
        "mode": "structural" if isinstance(model, LinearSEM) else "observational",
        "variables": list(G.vertices),
        "edges": [],
        "error_cov": [],
    }
    for u, v, c in G.directed_edges:
        e = {"from": u, "to": v}
        if c is not None:
            e["coef"] = c
        doc["edges"].append(e)
    for u, v, c in G.bidirected_edges:
        e = {"u": u, "v": v}
        if c is not None:
            e["cov"] = c
        doc["error_cov"].append(e)
    if isinstance(model, LinearSEM):
        for i, v in enumerate(G.vertices):
            entry = {"var": v, "variance": float(model.disturbance_cov[i, i])}
            if model.disturbance_mean[i] != 0.0:
                entry["mean"] = float(model.disturbance_mean[i])
            doc["error_cov"].append(entry)
        if model.observed != G.vertices:
            doc["observed"] = list(model.observed)
    else:
        m = model.moments
        doc["covariance"] = {"order": list(m.variables), "matrix": m.cov.tolist(),
                             "mean": m.mean.tolist()}
        if model.tau is not None:
            doc["tau"] = model.tau
    return doc


def load_model(path):
    """Read a model file; ``ParseError`` on unreadable or malformed JSON."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    return parse_model(doc)


def parse_evidence(doc) -> Evidence:
    """``{"point": {"X": 1}, "box": {"Z": [0, "inf"]}}`` to :class:`Evidence`."""
    if doc is None:
        return Evidence()
    _reject_unknown(doc, {"point", "box"}, "evidence")
    point = {k: _finite(v, f"evidence.point.{k}") for k, v in (doc.get("point") or {}).items()}
    box = {}
    for k, bounds in (doc.get("box") or {}).items():
        if not isinstance(bounds, (list, tuple)) or len(bounds) != 2:
            raise ParseError(f"evidence.box.{k} must be [lower, upper]")
        box[k] = (parse_number(bounds[0], f"evidence.box.{k}"),
                  parse_number(bounds[1], f"evidence.box.{k}"))
    return Evidence(point, box)


def evidence_to_dict(ev: Evidence) -> dict:
    def enc(b):
        return b if math.isfinite(b) else ("inf" if b > 0 else "-inf")

    return {"point": dict(ev.point), "box": {k: [enc(lo), enc(hi)] for k, (lo, hi) in ev.box.items()}}


def dumps(obj) -> str:
    """JSON with shortest round-trip float formatting; infinities as strings."""
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
