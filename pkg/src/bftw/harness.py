"""Experiment configuration, seed sweeps and report emission.

A config is one YAML (or JSON) document::

    params: {n: 240, t: 10, b: 0.041666, gamma: 64, zeta: 240}
    adversary: {strategy: flood, byzantine: random, lateness: 1, options: {}}
    pipeline: [phase_a, phase_b, phase_c, verify]
    seeds: {start: 0, stop: 50}
    mode: sync
    protocol: {sender: 0, message: hello}
    output: report.json

Precedence, lowest first: built-in defaults, the file, ``--override``
flags, ``--seeds``. Anything missing from ``params`` is derived.
"""
from __future__ import annotations

import copy
import datetime as _dt
import json
import logging
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import committees as cm
from . import protocols as pr
from .adversary import STRATEGIES, AdversaryConfig, CoinBias, make_strategy
from .params import ProtocolParams, derive_params, whc_failure_bound, whc_exponent
from .simnet import ASYNC, PSYNC, SYNC, adversarial_policy

log = logging.getLogger(__name__)

STAGES = ("phase_a", "phase_b", "phase_c", "verify", "rbc", "rag", "coin", "consensus", "oracle_ws")
_NEEDS = {
    "phase_b": ("phase_a",),
    "phase_c": ("phase_b",),
    "verify": ("phase_c", "oracle_ws"),
    "rbc": ("phase_c", "oracle_ws"),
    "rag": ("phase_c", "oracle_ws"),
    "coin": ("phase_c", "oracle_ws"),
    "consensus": ("phase_c", "oracle_ws"),
}
_PARAM_KEYS = {"n", "t", "b", "sigma", "lam", "c", "gamma", "zeta", "delta", "alpha"}
WORKERS_ENV = "BFTW_WORKERS"


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass
class ExperimentConfig:
    params: ProtocolParams
    adversary: Dict[str, Any]
    pipeline: List[str]
    seeds: List[int]
    mode: str = SYNC
    protocol: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)


def parse_seeds(spec) -> List[int]:
    """Accepts a list, {start, stop}, an int count, or the string 'a..b' (inclusive)."""
    if isinstance(spec, str):
        if ".." not in spec:
            raise ConfigError("seeds", f"expected 'a..b', got {spec!r}")
        a, b = spec.split("..", 1)
        try:
            return list(range(int(a), int(b) + 1))
        except ValueError:
            raise ConfigError("seeds", f"bad range {spec!r}") from None
    if isinstance(spec, bool):
        raise ConfigError("seeds", "expected a list, a range or a count")
    if isinstance(spec, int):
        return list(range(spec))
    if isinstance(spec, dict):
        try:
            return list(range(int(spec.get("start", 0)), int(spec["stop"])))
        except (KeyError, TypeError, ValueError):
            raise ConfigError("seeds", "range needs integer start/stop") from None
    if isinstance(spec, (list, tuple)):
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in spec):
            raise ConfigError("seeds", "seed list must hold integers")
        return list(spec)
    raise ConfigError("seeds", "expected a list, a range or a count")


def apply_override(doc: dict, item: str) -> dict:
    """Set a dotted key from 'a.b.c=value'; the value is parsed as YAML."""
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    key, val = item.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(item, "empty override key")
    cur = doc
    for p in parts[:-1]:
        nxt = cur.get(p)
        if nxt is None:
            nxt = cur[p] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(".".join(parts), f"{p} is not a mapping")
        cur = nxt
    cur[parts[-1]] = yaml.safe_load(val)
    return doc


def build_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a mapping")
    doc = copy.deepcopy(doc)
    unknown = set(doc) - {"params", "adversary", "pipeline", "seeds", "mode", "protocol", "output"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")

    prm = doc.get("params")
    if not isinstance(prm, dict):
        raise ConfigError("params", "missing or not a mapping")
    for k in prm:
        if k not in _PARAM_KEYS:
            raise ConfigError(f"params.{k}", "unknown parameter")
    for k in ("n", "t"):
        if not isinstance(prm.get(k), int) or isinstance(prm.get(k), bool):
            raise ConfigError(f"params.{k}", "required integer")
    if prm["n"] < 2:
        raise ConfigError("params.n", "need n >= 2")
    if not 0 <= prm["t"] < prm["n"]:
        raise ConfigError("params.t", "need 0 <= t < n")
    b = prm.get("b", 0.0)
    if isinstance(b, str):
        try:
            num, den = b.split("/")
            b = prm["b"] = int(num) / int(den)
        except ValueError:
            raise ConfigError("params.b", f"cannot read {b!r}") from None
    if not 0 <= float(b) < 1:
        raise ConfigError("params.b", "must lie in [0, 1)")
    try:
        params = derive_params(**prm)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise ConfigError("params", str(e)) from None
    bad = [x for x in params.invariant_violations() if "sigma" not in x]
    if bad:
        raise ConfigError("params", "; ".join(bad))

    adv = doc.get("adversary") or {}
    if not isinstance(adv, dict):
        raise ConfigError("adversary", "not a mapping")
    adv = dict({"strategy": "silent", "byzantine": "random", "lateness": 1, "options": {}}, **adv)
    if adv["strategy"] not in STRATEGIES:
        raise ConfigError("adversary.strategy", f"unknown strategy {adv['strategy']!r}")
    byz = adv["byzantine"]
    if isinstance(byz, list):
        if len(set(byz)) != len(byz) or any(not isinstance(x, int) or not 0 <= x < params.n for x in byz):
            raise ConfigError("adversary.byzantine", "ids must be distinct integers in [0, n)")
        if len(byz) > params.t:
            raise ConfigError("adversary.byzantine", "more than t byzantine nodes")
    elif byz not in ("random", "first", "last", "none"):
        raise ConfigError("adversary.byzantine", "use a list or one of random/first/last/none")
    if not isinstance(adv["lateness"], int) or adv["lateness"] < 0:
        raise ConfigError("adversary.lateness", "must be a non-negative integer")
    if not isinstance(adv["options"], dict):
        raise ConfigError("adversary.options", "not a mapping")

    pipe = doc.get("pipeline")
    if not isinstance(pipe, list) or not pipe:
        raise ConfigError("pipeline", "must be a non-empty list of stages")
    for i, s in enumerate(pipe):
        if s not in STAGES:
            raise ConfigError(f"pipeline[{i}]", f"unknown stage {s!r}")
        need = _NEEDS.get(s)
        if need and not any(x in pipe[:i] for x in need):
            raise ConfigError(f"pipeline[{i}]", f"{s} needs one of {list(need)} earlier")
    if "phase_c" in pipe and "oracle_ws" in pipe:
        raise ConfigError("pipeline", "phase_c and oracle_ws both produce the witness system")

    if "seeds" not in doc:
        raise ConfigError("seeds", "missing")
    seeds = parse_seeds(doc["seeds"])
    if not seeds:
        raise ConfigError("seeds", "empty seed list")

    mode = doc.get("mode", SYNC)
    mode = {"sync": SYNC, "psync": PSYNC, "async": ASYNC}.get(mode, mode)
    if mode not in (SYNC, PSYNC, ASYNC):
        raise ConfigError("mode", f"unknown mode {mode!r}")
    proto = doc.get("protocol") or {}
    if not isinstance(proto, dict):
        raise ConfigError("protocol", "not a mapping")
    fn = proto.get("function", "sum")
    if fn not in pr.AggregationSpec.FUNCTIONS:
        raise ConfigError("protocol.function", f"unknown aggregation {fn!r}")
    out = doc.get("output")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output", "must be a path")
    return ExperimentConfig(params=params, adversary=adv, pipeline=list(pipe), seeds=seeds,
                            mode=mode, protocol=proto, output=out, raw=doc)


def load_config(path: str, overrides: Sequence[str] = (), seeds: Optional[str] = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(path, f"cannot read config: {e.strerror}") from None
    except yaml.YAMLError as e:
        raise ConfigError(path, f"not valid YAML/JSON: {e}") from None
    doc = doc or {}
    for item in overrides:
        apply_override(doc, item)
    if seeds is not None:
        doc["seeds"] = seeds
    return build_config(doc)


# -- per-seed execution -----------------------------------------------------------

def pick_byzantine(cfg: ExperimentConfig, seed: int) -> List[int]:
    n, t = cfg.params.n, cfg.params.t
    spec = cfg.adversary["byzantine"]
    if isinstance(spec, list):
        return sorted(spec)
    if spec == "none":
        return []
    if spec == "first":
        return list(range(t))
    if spec == "last":
        return list(range(n - t, n))
    return sorted(random.Random(seed * 7_919 + 17).sample(range(n), t))


@dataclass
class _Check:
    name: str
    ok: bool
    hard: bool = True
    p: Optional[float] = None   # per-seed failure bound for statistical checks
    detail: Any = None


def _oracle_ws(cfg, seed, byz):
    p = cfg.params
    pad = cfg.protocol.get("padding", 0)
    return pr.make_oracle_witness_system(p.n, p.t, cfg.protocol.get("beta", p.beta),
                                         alpha=float(p.alpha), seed=seed, padding=pad,
                                         available=cfg.protocol.get("available"), byzantine=byz)


def run_seed(cfg: ExperimentConfig, seed: int) -> dict:
    p = cfg.params
    byz = pick_byzantine(cfg, seed)
    checks: List[_Check] = []
    metrics: Dict[str, Any] = {}
    outputs: Dict[str, Any] = {}
    state: Dict[str, Any] = {}
    p_whc = whc_failure_bound(whc_exponent(p.n, p.c, p.lam))
    strat_cfg = AdversaryConfig(byz, p.b, cfg.adversary["lateness"], cfg.adversary["strategy"],
                                cfg.adversary["options"])

    for stage in cfg.pipeline:
        if stage == "phase_a":
            strategy = make_strategy(strat_cfg, seed) if strat_cfg.strategy in (
                "silent", "flood", "count-skew") else None
            net = cm.CommitteeNet(p, byz, strategy, seed)
            a = state["a"] = cm.phase_a(net)
            state["net"] = net
            bound = 10 * p.b * p.n ** 2
            checks.append(_Check("invalidated_pairs", a.invalidated_pairs <= bound,
                                 detail={"measured": a.invalidated_pairs, "bound": bound}))
            metrics["invalidated_pairs"] = a.invalidated_pairs
            metrics["forged_messages"] = a.forged_messages
        elif stage == "phase_b":
            b = state["b"] = cm.phase_b(state["net"], state["a"])
            tri = cm.phase_b_trichotomy(b, p)
            checks.append(_Check("phase_b_trichotomy", not tri["exceptions"],
                                 detail={"exceptions": tri["exceptions"][:10]}))
            metrics["trichotomy"] = {k: tri[k] for k in ("high", "low", "mid")}
            metrics["premise_misses"] = len(tri["premise_misses"])
            metrics["consensus_subjects"] = len(b.consensus_subjects)
        elif stage == "phase_c":
            state["ws"] = cm.phase_c(state["net"], state["b"])
            net = state["net"]
            metrics["precompute_rounds"] = net.round
            metrics["precompute_max_node_messages"] = int(max(net.ledger.messages))
            metrics["adversary_bits"] = int(net.ledger.adv_total)
        elif stage == "oracle_ws":
            state["ws"] = _oracle_ws(cfg, seed, byz)
        elif stage == "verify":
            rep = cm.verify_witness_system(state["ws"], None if "oracle_ws" in cfg.pipeline else p)
            checks.append(_Check("agreement", rep.agreement))
            checks.append(_Check("membership", rep.membership))
            checks.append(_Check("availability", rep.availability, hard=False, p=p_whc,
                                 detail={"available": rep.available, "required": rep.required}))
            metrics["available"] = rep.available
            if rep.failures:
                outputs["verify_failures"] = rep.failures[:5]
        else:
            _run_protocol(stage, cfg, seed, state, checks, metrics, outputs)

    return {
        "seed": seed,
        "byzantine": byz,
        "in_asymptotic_regime": p.in_asymptotic_regime,
        "checks": [{"name": c.name, "ok": bool(c.ok), "hard": c.hard, "p": c.p,
                    "detail": c.detail} for c in checks],
        "passed": all(c.ok for c in checks if c.hard),
        "metrics": metrics,
        "outputs": outputs,
    }


def _plain(x):
    return x if isinstance(x, (int, float, str, type(None))) else repr(x)


def _tree(ws, cfg):
    return pr.build_broadcast_tree(ws.valid_subjects(ws.honest[0]), ws.n, cfg.params.delta)


def _record_run(metrics, run, name):
    metrics[f"{name}_rounds"] = int(run.rounds)
    metrics[f"{name}_steps"] = int(run.metrics.steps)
    metrics[f"{name}_max_node_messages"] = int(run.honest_messages())
    metrics[f"{name}_max_node_bits"] = int(max((run.metrics.bits[v] for v in run.nodes), default=0))
    metrics[f"{name}_adversary_bits"] = int(run.metrics.adversary_bits)


def _run_protocol(stage, cfg, seed, state, checks, metrics, outputs):
    ws = state["ws"]
    tree = state.get("tree") or _tree(ws, cfg)
    state["tree"] = tree
    proto = cfg.protocol
    strat = cfg.adversary["strategy"]
    honest = ws.honest
    if stage == "rbc":
        sender = proto.get("sender", honest[0])
        msg = proto.get("message", "m")
        adv = None
        if strat == "equivocate":
            adv = pr.RbcEquivocator(sorted(ws.byzantine), seed, ws=ws, tree=tree, sid=1, origin=sender,
                                    values=tuple(proto.get("values", ("m1", "m2"))))
        policy = adversarial_policy(seed, ws.n) if cfg.mode == ASYNC else None
        run = pr.run_reliable_broadcast(ws, tree, sender, msg, mode=cfg.mode, policy=policy,
                                        adversary=adv, seed=seed)
        got = run.delivered(1)
        values = sorted({_plain(x) for d in got.values() for x in d}, key=repr)
        checks.append(_Check("rbc_agreement", len(values) <= 1 and all(len(d) <= 1 for d in got.values()),
                             detail={"values": values}))
        if sender not in ws.byzantine and cfg.mode == SYNC:
            checks.append(_Check("rbc_validity", all(d == [msg] for d in got.values())))
        outputs["rbc_values"] = values
        _record_run(metrics, run, "rbc")
    elif stage in ("rag", "coin"):
        if stage == "rag":
            fn = proto.get("function", "sum")
            spec = pr.AggregationSpec(fn, k=proto.get("k", 4))
            rng = random.Random(seed)
            inputs = {v: spec.sample_input(rng) for v in honest}
            factory = None
        else:
            k = proto.get("k", 1)
            spec = pr.AggregationSpec("xor-k", k=k)
            inputs = {v: "coin" for v in honest}
            factory = _coin_adversary(ws, tree, seed, k, cfg) if strat == "coin-bias" else None
        run, sess = pr.run_aggregation(ws, tree, spec, inputs, seed=seed, adversary_factory=factory,
                                       lateness=cfg.adversary["lateness"])
        acc = pr.accepted_commits(run, sess, tree, ws)
        outs = run.outputs(sess.sid)
        vals = {repr(o) for o in outs.values()}
        agree = len(vals) == 1 and all(len(o) == 1 for o in outs.values())
        checks.append(_Check(f"{stage}_agreement", agree))
        if agree:
            expect = spec.fold(acc[v] for v in sorted(acc))
            got = next(iter(outs.values()))[0]
            checks.append(_Check(f"{stage}_oracle", got == expect,
                                 detail={"output": repr(got), "recomputed": repr(expect)}))
            checks.append(_Check(f"{stage}_honest_included", all(v in acc for v in honest)))
            outputs[f"{stage}_output"] = _plain(got)
        _record_run(metrics, run, stage)
    elif stage == "consensus":
        mode = proto.get("proposals", "unanimous")
        if mode == "unanimous":
            props = {v: proto.get("value", 1) for v in honest}
        else:
            rng = random.Random(seed)
            props = {v: rng.randint(0, 1) for v in honest}
        byz_vals = [(0, b, (seed + b) % 2) for b in sorted(ws.byzantine)]
        res = pr.consensus(ws, tree, props, byzantine_schedule=byz_vals, seed=seed)
        decs = set(res.decisions.values())
        checks.append(_Check("consensus_agreement", len(decs) == 1 and None not in decs,
                             detail={"decisions": sorted(map(repr, decs))}))
        if len(set(props.values())) == 1:
            checks.append(_Check("consensus_validity", decs == set(props.values())))
        outputs["decision"] = _plain(next(iter(decs))) if len(decs) == 1 else None
        _record_run(metrics, res.run, "consensus")


def _coin_adversary(ws, tree, seed, k, cfg):
    opts = cfg.adversary["options"]

    def factory(sess):
        return CoinBias(sorted(ws.byzantine), seed, k=k, target=opts.get("target", 0),
                        late_round=opts.get("late_round", 1),
                        commit=lambda b, x, r: pr.commit_envelopes(ws, tree, sess, b, x))
    return factory


# -- reports ----------------------------------------------------------------------

@dataclass
class RunReport:
    header: Dict[str, Any]
    config: Dict[str, Any]
    seeds: List[dict]
    aggregate: Dict[str, Any]

    @property
    def passed(self) -> bool:
        return bool(self.aggregate.get("passed", True))

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self) -> dict:
        return {"header": self.header, "config": self.config, "seeds": self.seeds,
                "aggregate": self.aggregate}

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(header=d["header"], config=d["config"], seeds=d["seeds"], aggregate=d["aggregate"])


def allowed_failures(p: float, seeds: int) -> int:
    """A property failing w.p. <= p per seed may fail ceil(3pS) times over S seeds."""
    return math.ceil(3 * p * seeds - 1e-12)


def _percentiles(xs):
    arr = np.asarray(xs, dtype=float)
    return {"p50": float(np.percentile(arr, 50)), "p90": float(np.percentile(arr, 90)),
            "max": float(arr.max())}


def aggregate(records: List[dict]) -> dict:
    S = len(records)
    if not S:
        return {"runs": 0, "passed": True, "checks": {}, "metrics": {}}
    checks: Dict[str, dict] = {}
    for rec in records:
        for c in rec["checks"]:
            row = checks.setdefault(c["name"], {"hard": c["hard"], "p": c["p"], "passes": 0, "runs": 0})
            row["runs"] += 1
            row["passes"] += int(c["ok"])
    ok = True
    for name, row in checks.items():
        row["pass_rate"] = row["passes"] / row["runs"]
        fails = row["runs"] - row["passes"]
        if row["hard"]:
            row["ok"] = fails == 0
        else:
            row["allowed_failures"] = allowed_failures(row["p"] or 0.0, row["runs"])
            row["ok"] = fails <= row["allowed_failures"]
        ok &= row["ok"]
    metrics: Dict[str, dict] = {}
    keys = sorted({k for r in records for k, v in r["metrics"].items()
                   if isinstance(v, (int, float)) and not isinstance(v, bool)})
    for k in keys:
        xs = [r["metrics"][k] for r in records if k in r["metrics"]]
        metrics[k] = _percentiles(xs)
    return {"runs": S, "passed": bool(ok), "checks": checks, "metrics": metrics,
            "seed_pass_rate": sum(r["passed"] for r in records) / S}


def _worker(args):
    doc, seed = args
    return run_seed(build_config(doc), seed)


def workers_from_env() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"expected an integer, got {raw!r}") from None


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> RunReport:
    workers = workers or workers_from_env()
    if workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_worker, [(cfg.raw, s) for s in cfg.seeds]))
    else:
        records = [run_seed(cfg, s) for s in cfg.seeds]
    for rec in records:
        if not rec["passed"]:
            log.warning("seed %d failed: %s", rec["seed"],
                        [c["name"] for c in rec["checks"] if c["hard"] and not c["ok"]])
    header = {"generated": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
              "tool": "bftw"}
    conf = dict(cfg.raw, seeds=list(cfg.seeds), params=cfg.params.to_dict())
    return RunReport(header=header, config=conf, seeds=records, aggregate=aggregate(records))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (frozenset, set)):
        return sorted(_jsonable(v) for v in x)
    return x


def report_json(report: RunReport) -> str:
    return json.dumps(_jsonable(report.to_dict()), sort_keys=True, indent=2) + "\n"


def report_table(report: RunReport) -> str:
    agg = report.aggregate
    lines = [f"runs: {agg.get('runs', 0)}  verdict: {'PASS' if report.passed else 'FAIL'}", ""]
    if agg.get("checks"):
        lines.append(f"{'check':<24}{'kind':<8}{'pass':>10}{'allowed':>9}  ok")
        for name, row in sorted(agg["checks"].items()):
            allowed = "0" if row["hard"] else str(row.get("allowed_failures", 0))
            lines.append(f"{name:<24}{'hard' if row['hard'] else 'stat':<8}"
                         f"{row['passes']:>5}/{row['runs']:<4}{allowed:>9}  {'yes' if row['ok'] else 'NO'}")
        lines.append("")
    if agg.get("metrics"):
        lines.append(f"{'metric':<32}{'p50':>12}{'p90':>12}{'max':>12}")
        for name, row in sorted(agg["metrics"].items()):
            lines.append(f"{name:<32}{row['p50']:>12.1f}{row['p90']:>12.1f}{row['max']:>12.1f}")
    return "\n".join(lines) + "\n"


def emit_report(report: RunReport, fmt: str = "json", path: Optional[str] = None) -> str:
    """Render the report; write it to ``path`` when given. Returns the text."""
    if fmt == "json":
        text = report_json(report)
    elif fmt == "table":
        text = report_table(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is not None:
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as e:
            raise OSError(f"cannot write report to {path}: {e.strerror}") from None
    return text


def load_report(path: str) -> RunReport:
    with open(path) as fh:
        return RunReport.from_dict(json.load(fh))


def empty_report() -> RunReport:
    return RunReport(header={"generated": None, "tool": "bftw"}, config={}, seeds=[],
                     aggregate=aggregate([]))
