"""Instance files, flow-rate files and report serialization (human / CSV / JSON)."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from .anarchy import PoaResult, SweepRow
from .conditions import CONDITION_NAMES, EquilibriumReport
from .entropy import EntropyModel, SchemaError
from .network import (
    AggregatorConfig,
    Edge,
    FlowRate,
    Instance,
    Monomial,
    Network,
    SplittingConfig,
)
from .optimum import SolveResult

FORMATS = ("human", "csv", "json")


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------


def _num(x: float) -> int | float:
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def _cost_out(c: Monomial) -> dict:
    return {"a": float(c.a), "k": _num(c.k)}


def _cost_in(d: Any, where: str) -> Monomial:
    if not isinstance(d, dict) or "a" not in d:
        raise SchemaError(f"{where}: cost must be an object with 'a' and optional 'k'")
    try:
        return Monomial(float(d["a"]), float(d.get("k", 1)))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: bad cost {d!r}") from exc


def _exp_out(p: float):
    return "limit" if math.isinf(p) else _num(p)


def _exp_in(v) -> float:
    if v == "limit":
        return math.inf
    try:
        return float(v)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad aggregator exponent {v!r}") from exc


def instance_to_dict(inst: Instance) -> dict:
    net = inst.network
    agg = inst.aggregator
    return {
        "nodes": list(net.nodes),
        "edges": [{"id": e.id, "tail": e.tail, "head": e.head, "cost": _cost_out(c)}
                  for e, c in zip(net.edges, inst.edge_costs)],
        "sources": [{"node": s, "cost": _cost_out(c)} for s, c in zip(net.sources, inst.source_costs)],
        "terminals": list(net.terminals),
        "entropy": inst.entropy.to_pairs(),
        "aggregator": "limit" if math.isinf(agg.n) and math.isinf(agg.m)
        else {"n": _exp_out(agg.n), "m": _exp_out(agg.m)},
        "splitting": {"edge": inst.splitting.edge, "source": inst.splitting.source},
    }


def instance_from_dict(d: dict) -> Instance:
    if not isinstance(d, dict):
        raise SchemaError("instance document must be an object")
    for key in ("nodes", "edges", "sources", "terminals", "entropy"):
        if key not in d:
            raise SchemaError(f"instance is missing field {key!r}")
    try:
        edges = [Edge(str(e["id"]), str(e["tail"]), str(e["head"])) for e in d["edges"]]
        edge_costs = [_cost_in(e.get("cost", {"a": 1.0, "k": 1}), f"edge {e['id']}") for e in d["edges"]]
        sources = [str(s["node"]) if isinstance(s, dict) else str(s) for s in d["sources"]]
        source_costs = [_cost_in(s.get("cost", {"a": 1.0, "k": 1}) if isinstance(s, dict) else {"a": 1.0},
                                 f"source {name}") for s, name in zip(d["sources"], sources)]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed edge or source entry: {exc}") from exc
    net = Network(tuple(str(v) for v in d["nodes"]), tuple(edges), tuple(sources),
                  tuple(str(t) for t in d["terminals"]))
    entropy = EntropyModel.parse(d["entropy"], len(sources))
    agg = d.get("aggregator", {})
    if agg == "limit":
        aggregator = AggregatorConfig.limit()
    elif isinstance(agg, dict):
        aggregator = AggregatorConfig(_exp_in(agg.get("n", 16)), _exp_in(agg.get("m", 16)))
    else:
        raise SchemaError("aggregator must be 'limit' or {n, m}")
    sp = d.get("splitting", {})
    splitting = SplittingConfig(str(sp.get("edge", "power")), str(sp.get("source", "uniform")))
    inst = Instance(net, tuple(edge_costs), tuple(source_costs), entropy, aggregator, splitting)
    inst.validate()
    return inst


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def loads_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"instance file is not valid JSON: {exc}") from exc
    return instance_from_dict(doc)


def load_instance(path: str | os.PathLike) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read instance file: {exc}") from exc
    return loads_instance(text)


def flow_rate_to_dict(inst: Instance, fr: FlowRate) -> dict:
    return {"flows": fr.flow_mapping(inst), "rates": fr.rates.tolist()}


def flow_rate_from_dict(inst: Instance, d: dict) -> FlowRate:
    if "flows" not in d or "rates" not in d:
        raise SchemaError("flow-rate document needs 'flows' and 'rates'")
    fr = FlowRate.from_mapping(inst, d["flows"], d["rates"])
    if fr.rates.shape != (inst.num_sources, inst.num_terminals):
        raise SchemaError("rate matrix shape does not match the instance")
    if not (np.all(np.isfinite(fr.flows)) and np.all(np.isfinite(fr.rates))):
        raise SchemaError("flow-rate contains non-finite values")
    if fr.flows.min(initial=0.0) < 0 or fr.rates.min(initial=0.0) < 0:
        raise SchemaError("flows and rates must be nonnegative")
    return fr


def load_flow_rate(inst: Instance, path: str | os.PathLike) -> FlowRate:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read flow-rate file: {exc}") from exc
    return flow_rate_from_dict(inst, doc)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _jnum(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _unj(x):
    if x is None:
        return None
    return float(x)  # float() parses "inf" and "nan"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, infinities to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _jnum(obj)
    return obj


def solve_to_dict(inst: Instance, res: SolveResult, extra: dict | None = None) -> dict:
    d = {
        "type": "solve",
        "cost": res.cost,
        "gap": res.gap,
        "iterations": res.iterations,
        "converged": res.converged,
        "flow_rate": flow_rate_to_dict(inst, res.flow_rate),
    }
    d.update(extra or {})
    return _clean(d)


def poa_to_dict(res: PoaResult, extra: dict | None = None) -> dict:
    d = {
        "type": "poa",
        "wardrop_cost": res.wardrop_cost,
        "opt_cost": res.opt_cost,
        "ratio": res.ratio,
        "upper_bound": res.upper_bound,
        "descriptor": res.descriptor,
        "flags": res.flags,
        "wardrop_rates": None if res.wardrop is None else res.wardrop.rates.tolist(),
        "opt_rates": None if res.opt is None else res.opt.rates.tolist(),
    }
    d.update(extra or {})
    return _clean(d)


def poa_from_dict(d: dict) -> PoaResult:
    def fr(rates):
        return None if rates is None else FlowRate(np.zeros(0), np.array(rates, dtype=float))

    return PoaResult(_unj(d["wardrop_cost"]), _unj(d["opt_cost"]), _unj(d.get("upper_bound")),
                     dict(d.get("descriptor", {})), dict(d.get("flags", {})),
                     fr(d.get("wardrop_rates")), fr(d.get("opt_rates")))


def report_to_dict(rep: EquilibriumReport) -> dict:
    d = rep.to_dict()
    d["type"] = "conditions"
    return _clean(d)


def report_from_dict(d: dict) -> EquilibriumReport:
    return EquilibriumReport.from_dict(d)


SWEEP_COLUMNS = ("family", "params", "wardrop_cost", "opt_cost", "ratio", "bound", "flags", "error")


def sweep_to_dicts(rows: list[SweepRow]) -> list[dict]:
    return [_clean({"family": r.family, "params": r.params, "wardrop_cost": r.wardrop_cost,
                    "opt_cost": r.opt_cost, "ratio": r.ratio, "bound": r.bound,
                    "flags": r.flags, "error": r.error}) for r in rows]


def sweep_from_dicts(rows: list[dict]) -> list[SweepRow]:
    return [SweepRow(r["family"], dict(r["params"]), _unj(r["wardrop_cost"]), _unj(r["opt_cost"]),
                     _unj(r["ratio"]), _unj(r["bound"]), dict(r["flags"]), r["error"]) for r in rows]


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, (int, float, np.floating, np.integer)):
        return f"{float(x):.6g}"
    return str(x)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _flat_params(params: dict) -> str:
    return ";".join(f"{k}={params[k]}" for k in sorted(params))


def emit_report(doc: dict | list, fmt: str) -> str:
    """Serialize a report document produced by one of the ``*_to_dict`` helpers."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if isinstance(doc, list):  # sweep rows
        if fmt == "csv":
            return _csv(list(SWEEP_COLUMNS), [
                [r["family"], _flat_params(r["params"]), r["wardrop_cost"], r["opt_cost"], r["ratio"],
                 "" if r["bound"] is None else r["bound"], json.dumps(r["flags"], sort_keys=True), r["error"]]
                for r in doc])
        lines = [f"{'family':8} {'params':48} {'wardrop':>10} {'opt':>10} {'ratio':>10} {'bound':>10}  error"]
        for r in doc:
            lines.append(f"{r['family']:8} {_flat_params(r['params']):48} {_fmt(r['wardrop_cost']):>10} "
                         f"{_fmt(r['opt_cost']):>10} {_fmt(r['ratio']):>10} {_fmt(r['bound']):>10}  {r['error']}")
        return "\n".join(lines) + "\n"

    kind = doc.get("type")
    if kind == "conditions":
        if fmt == "csv":
            return _csv(["condition", "name", "residual", "passed", "worst"],
                        [[i + 1, CONDITION_NAMES[i], doc["residuals"][i], doc["passed"][i], doc["worst"][i]]
                         for i in range(4)])
        lines = [f"{doc['kind']} conditions (tol {_fmt(doc['tol'])})"]
        for i in range(4):
            mark = "pass" if doc["passed"][i] else "FAIL"
            res = doc["residuals"][i]
            lines.append(f"  ({i + 1}) {CONDITION_NAMES[i]:32} {mark}  residual {_fmt(res)}"
                         + ("" if doc["passed"][i] else f"  at {doc['worst'][i]}"))
        lines.append(f"  social cost {_fmt(doc['social_cost'])}")
        lines.append("  terminal costs " + " ".join(_fmt(c) for c in doc["terminal_costs"]))
        return "\n".join(lines) + "\n"

    scalars = {k: v for k, v in doc.items() if not isinstance(v, (dict, list)) and k != "type"}
    if fmt == "csv":
        keys = sorted(scalars)
        return _csv(keys, [[scalars[k] for k in keys]])
    lines = [f"{kind}"]
    for k in sorted(scalars):
        lines.append(f"  {k:20} {_fmt(scalars[k])}")
    for k in sorted(doc):
        v = doc[k]
        if isinstance(v, list) and v and isinstance(v[0], list):
            lines.append(f"  {k}")
            for row in v:
                lines.append("    " + " ".join(f"{_fmt(x):>10}" for x in row))
        elif isinstance(v, dict) and k != "flow_rate":
            for kk in sorted(v):
                if not isinstance(v[kk], (dict, list)):
                    lines.append(f"  {k}.{kk:14} {_fmt(v[kk])}")
    if "flow_rate" in doc:
        lines.append("  rates")
        for row in doc["flow_rate"]["rates"]:
            lines.append("    " + " ".join(f"{_fmt(x):>10}" for x in row))
        lines.append("  path flows")
        for pid, f in doc["flow_rate"]["flows"].items():
            if f is not None and float(f) > 1e-12:
                lines.append(f"    {pid:40} {_fmt(f)}")
    return "\n".join(lines) + "\n"


def trace_csv(trace: list[tuple[int, float, float]]) -> str:
    return _csv(["iteration", "cost", "gap"], [[i, c, g] for i, c, g in trace])


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
