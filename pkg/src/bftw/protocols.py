"""Execution-phase protocols on top of a witness-committee system.

One ``StackNode`` per honest node runs every primitive: lazy consensus
inside a committee, node-to-committee, committee-to-node and
committee-to-committee broadcast, plus the tree-based reliable broadcast
and aggregation built from them. Messages carry a key whose first entry is
the session id, so concurrent instances never share thresholds.
"""
from __future__ import annotations

import copy
import itertools
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .adversary import Strategy
from .committees import (EMPTY, WitnessSystem, local_fault_bound, pk_adopt, pk_king,
                         pk_propose)
from .params import TAG_BITS, id_bits
from .simnet import ASYNC, SYNC, Envelope, Network, NetworkConfig, Process, RunMetrics

log = logging.getLogger(__name__)


# -- broadcast tree ---------------------------------------------------------

@dataclass(frozen=True)
class BroadcastTree:
    """Heap-ordered delta-ary tree: positions [0, I) are committees, the rest leaves."""
    n: int
    degree: int
    inner: Tuple[int, ...]

    @property
    def root(self) -> int:
        return self.inner[0]

    @property
    def n_inner(self) -> int:
        return len(self.inner)

    def _pos(self, u: int) -> int:
        return self._index()[u]

    def _index(self) -> Dict[int, int]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {u: i for i, u in enumerate(self.inner)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def is_inner(self, u: int) -> bool:
        return u in self._index()

    def _at(self, pos: int):
        if pos < self.n_inner:
            return ("inner", self.inner[pos])
        return ("leaf", pos - self.n_inner)

    def leaf_parent(self, v: int) -> int:
        return self.inner[(self.n_inner + v - 1) // self.degree]

    def parent(self, u: int) -> Optional[int]:
        p = self._pos(u)
        return None if p == 0 else self.inner[(p - 1) // self.degree]

    def children(self, u: int) -> List[Tuple[str, int]]:
        p = self._pos(u)
        total = self.n_inner + self.n
        lo = self.degree * p + 1
        return [self._at(c) for c in range(lo, min(lo + self.degree, total))]

    def level(self, u: int) -> int:
        """Committee layers below u, counting u itself."""
        lv = self.__dict__.get("_lv")
        if lv is None:
            lv = {}
            for pos in range(self.n_inner - 1, -1, -1):
                sub = [lv[c] for kind, c in self.children(self.inner[pos]) if kind == "inner"]
                lv[self.inner[pos]] = 1 + max(sub, default=0)
            object.__setattr__(self, "_lv", lv)
        return lv[u]

    @property
    def height(self) -> int:
        """Edges from the root to the deepest leaf."""
        pos, h = self.n_inner + self.n - 1, 0
        while pos:
            pos = (pos - 1) // self.degree
            h += 1
        return h


def inner_count(n: int, degree: int) -> int:
    return max(1, -(-(n - 1) // (degree - 1)))


def build_broadcast_tree(valid_subjects: Iterable[int], all_nodes: int, delta: int) -> BroadcastTree:
    if delta < 2:
        raise ValueError("delta must be >= 2")
    subjects = sorted(set(valid_subjects))
    need = inner_count(all_nodes, delta)
    if len(subjects) < need:
        raise ValueError(f"need {need} valid subjects for the inner nodes, have {len(subjects)}")
    return BroadcastTree(n=all_nodes, degree=delta, inner=tuple(subjects[:need]))


# -- aggregation functions ----------------------------------------------------

@dataclass(frozen=True)
class AggregationSpec:
    f: str
    k: int = 1                 # xor-k width; value-count domain size
    value_bits: int = 16

    FUNCTIONS = ("sum", "max", "xor-k", "value-count")

    def __post_init__(self):
        if self.f not in self.FUNCTIONS:
            raise ValueError(f"unknown aggregation {self.f!r}")

    def sample_input(self, rng: random.Random):
        if self.f == "xor-k":
            return rng.getrandbits(self.k)
        if self.f == "value-count":
            return rng.randrange(max(1, self.k))
        return rng.randrange(1 << min(self.value_bits, 12))

    def lift(self, x):
        if self.f == "value-count":
            return ((x, 1),)
        if self.f == "xor-k":
            return int(x) & ((1 << self.k) - 1)
        return x

    def combine(self, a, b):
        if self.f == "sum":
            return a + b
        if self.f == "max":
            return max(a, b)
        if self.f == "xor-k":
            return a ^ b
        c = Counter(dict(a))
        c.update(dict(b))
        return tuple(sorted(c.items()))

    def fold(self, parts: Iterable):
        acc = None
        for p in parts:
            acc = p if acc is None else self.combine(acc, p)
        return acc

    def apply(self, xs: Iterable):
        """f over raw inputs; the oracle side of aggregation tests."""
        return self.fold(self.lift(x) for x in xs)

    def bits(self, value, n: int) -> int:
        if self.f == "xor-k":
            return self.k
        if self.f == "value-count" and isinstance(value, tuple):
            return len(value) * (self.value_bits + id_bits(n))
        return self.value_bits


# -- per-instance state machines ----------------------------------------------

class LazyConsensus:
    """Echo / vote / decide with thresholds counted inside the local view."""

    __slots__ = ("view", "beta", "proposed", "voted", "decided", "echoes", "votes")

    def __init__(self, view: FrozenSet[int], beta: int):
        self.view = view
        self.beta = beta
        self.proposed = None
        self.voted = None
        self.decided = None
        self.echoes: Dict[Any, set] = {}
        self.votes: Dict[Any, set] = {}

    def copy(self) -> "LazyConsensus":
        c = LazyConsensus(self.view, self.beta)
        c.proposed, c.voted, c.decided = self.proposed, self.voted, self.decided
        c.echoes = {x: set(s) for x, s in self.echoes.items()}
        c.votes = {x: set(s) for x, s in self.votes.items()}
        return c

    def propose(self, x):
        if self.proposed is not None:
            return []
        self.proposed = x
        return [("echo", x)]

    def on_echo(self, sender, x):
        if sender not in self.view:
            return []
        s = self.echoes.setdefault(x, set())
        s.add(sender)
        if len(s) >= self.beta and self.voted is None:
            self.voted = x
            return [("vote", x)]
        return []

    def on_vote(self, sender, x):
        if sender not in self.view:
            return []
        s = self.votes.setdefault(x, set())
        s.add(sender)
        out = []
        if 2 * len(s) >= self.beta and self.voted is None:
            self.voted = x
            out.append(("vote", x))
        if len(s) >= self.beta and self.decided is None:
            self.decided = x
            out.append(("decide", x))
        return out

    @property
    def finished(self) -> bool:
        return self.voted is not None and self.decided is not None

    def abstract_key(self, honest: FrozenSet[int]):
        # echoes only matter until the vote, votes only until the decision
        def summ(d):
            return tuple(sorted(((repr(x), len(s & honest), tuple(sorted(s - honest)))
                                 for x, s in d.items()), key=repr))
        return (repr(self.proposed), repr(self.voted), repr(self.decided),
                summ(self.echoes) if self.voted is None else (),
                summ(self.votes) if not self.finished else ())


class C2nCollector:
    """Receiver side of committee-to-node: deliver once beta view members agree."""

    __slots__ = ("view", "beta", "got", "delivered")

    def __init__(self, view: FrozenSet[int], beta: int):
        self.view = view
        self.beta = beta
        self.got: Dict[Any, set] = {}
        self.delivered = None

    def copy(self) -> "C2nCollector":
        c = C2nCollector(self.view, self.beta)
        c.delivered = self.delivered
        c.got = {m: set(s) for m, s in self.got.items()}
        return c

    def on_transmit(self, sender, m):
        if sender not in self.view or self.delivered is not None:
            if sender in self.view:
                self.got.setdefault(m, set()).add(sender)
            return []
        s = self.got.setdefault(m, set())
        s.add(sender)
        if len(s) >= self.beta:
            self.delivered = m
            return [("deliver", m)]
        return []

    def abstract_key(self, honest: FrozenSet[int]):
        if self.delivered is not None:
            return (repr(self.delivered),)
        return (None, tuple(sorted(((repr(m), len(s & honest), tuple(sorted(s - honest)))
                                    for m, s in self.got.items()), key=repr)))


# -- sessions and the node stack ---------------------------------------------

@dataclass
class SessionSpec:
    sid: int
    kind: str                          # rbc | rag | raw
    origin: Optional[int] = None       # rbc sender
    agg: Optional[AggregationSpec] = None
    start: int = 0
    commit_window: int = 1             # rag: commits must arrive by start + window
    hop: int = 6                       # rag: rounds per committee layer
    value_bits: int = 16

    def deadline(self, tree: BroadcastTree, u: int) -> int:
        return self.start + self.commit_window + self.hop * tree.level(u)


def _lc_subject(key) -> int:
    kind = key[1]
    if kind == "n2c":
        return key[3]
    if kind == "c2c":
        return key[4]
    return key[2]


class StackNode(Process):
    """Honest node running every execution-phase primitive."""

    def __init__(self, v: int, n: int, beta: int, views: Mapping[int, FrozenSet[int]],
                 tree: Optional[BroadcastTree], sessions: Dict[int, SessionSpec],
                 inputs: Optional[Dict[int, Any]] = None, seed: int = 0):
        super().__init__(v)
        self.n = n
        self.beta = beta
        self.views = views
        self.tree = tree
        self.sessions = sessions
        self.inputs = dict(inputs or {})
        self.rng = random.Random((seed << 20) ^ v)
        self.coin = None
        self.lc: Dict[tuple, LazyConsensus] = {}
        self.c2n: Dict[tuple, C2nCollector] = {}
        self.up_done: set = set()
        self.down_done: set = set()
        self.rag: Dict[tuple, dict] = {}
        self.decisions: Dict[tuple, list] = {}
        self.delivered: Dict[int, list] = {}
        self.output: Dict[int, list] = {}
        self.sent_keys: set = set()

    def view(self, u: int) -> FrozenSet[int]:
        return self.views.get(u, EMPTY)

    def snapshot(self):
        return {"coin": self.coin}

    def clone(self) -> "StackNode":
        c = copy.copy(self)
        c.lc = {k: i.copy() for k, i in self.lc.items()}
        c.c2n = {k: i.copy() for k, i in self.c2n.items()}
        c.up_done, c.down_done = set(self.up_done), set(self.down_done)
        c.rag = copy.deepcopy(self.rag) if self.rag else {}
        c.decisions = {k: list(x) for k, x in self.decisions.items()}
        c.delivered = {k: list(x) for k, x in self.delivered.items()}
        c.output = {k: list(x) for k, x in self.output.items()}
        c.sent_keys = set(self.sent_keys)
        return c

    def abstract_key(self, honest: FrozenSet[int]):
        return (tuple(sorted((repr(k), i.abstract_key(honest)) for k, i in self.lc.items())),
                tuple(sorted((repr(k), i.abstract_key(honest)) for k, i in self.c2n.items())),
                repr(sorted(self.decisions.items(), key=repr)),
                repr(sorted(self.delivered.items())), repr(sorted(self.up_done, key=repr)),
                repr(sorted(self.down_done, key=repr)))

    def ignores(self, payload, sender=None) -> bool:
        """True when delivering ``payload`` (from ``sender``, if known) can no
        longer change this node."""
        tag, key, x = payload
        if tag in ("echo", "vote"):
            inst = self.lc.get(key)
            if inst is None:
                return False
            if inst.finished or (tag == "echo" and inst.voted is not None):
                return True
            seen = (inst.echoes if tag == "echo" else inst.votes).get(x, ())
            return sender in seen
        if tag == "tn2c":
            inst = self.lc.get(key)
            return inst is not None and inst.proposed is not None
        if tag == "tc2n":
            col = self.c2n.get(key)
            return col is not None and (col.delivered is not None or sender in col.got.get(x, ()))
        return False

    # wire helpers
    def _bits(self, key, value, spec: SessionSpec) -> int:
        ids = sum(1 for x in key if isinstance(x, int))
        if spec.agg is not None:
            vb = spec.agg.bits(value[1] if isinstance(value, tuple) and value and value[0] == "result"
                               else value, self.n)
        else:
            vb = spec.value_bits
        return TAG_BITS + ids * id_bits(self.n) + vb

    def _send(self, net, to: int, tag: str, key: tuple, value):
        spec = self.sessions[key[0]]
        net.send(self.id, to, (key[0], spec.kind), (tag, key, value), self._bits(key, value, spec))

    def _to_view(self, net, view: Iterable[int], tag, key, value):
        for w in sorted(view):
            self._send(net, w, tag, key, value)

    # -- entry points ---------------------------------------------------------
    def broadcast(self, net, sid: int, m):
        """rbc broadcast from this node via its parent committee."""
        u = self.tree.leaf_parent(self.id)
        self.n2c_broadcast(net, (sid, "n2c", self.id, u), m)

    def n2c_broadcast(self, net, key, m):
        u = key[3]
        self._to_view(net, self.view(u), "tn2c", key, m)

    def lc_propose(self, net, key, x):
        u = _lc_subject(key)
        if self.id not in self.view(u):
            return
        inst = self._lc(key, u)
        self._run_lc(net, key, inst, inst.propose(x))

    def c2n_broadcast(self, net, key, receiver, m):
        self._send(net, receiver, "tc2n", key, m)

    def commit(self, net, sid: int, x):
        spec = self.sessions[sid]
        self.n2c_broadcast(net, (sid, "n2c", self.id, self.tree.leaf_parent(self.id)),
                           spec.agg.lift(x))

    # -- engine hooks -----------------------------------------------------------
    def on_round(self, rnd, net):
        for sid, spec in self.sessions.items():
            if spec.kind == "rag" and spec.start == rnd and sid in self.inputs \
                    and ("commit", sid) not in self.sent_keys:
                self.sent_keys.add(("commit", sid))
                x = self.inputs[sid]
                if x == "coin":
                    x = self.coin = self.rng.getrandbits(spec.agg.k)
                self.commit(net, sid, x)
        for key, st in list(self.rag.items()):
            if not st["closed"] and rnd >= st["deadline"]:
                self._close(net, key[0], key[1])

    def on_message(self, env: Envelope, net):
        tag, key, m = env.payload
        spec = self.sessions.get(key[0])
        if spec is None:
            return
        if tag == "tn2c":
            self._on_tn2c(env, key, m, spec, net)
        elif tag in ("echo", "vote"):
            u = _lc_subject(key)
            if self.id not in self.view(u) or not self._lc_key_ok(key, spec):
                return
            inst = self._lc(key, u)
            acts = inst.on_echo(env.sender, m) if tag == "echo" else inst.on_vote(env.sender, m)
            self._run_lc(net, key, inst, acts)
        elif tag == "tc2n":
            self._on_tc2n(env, key, m, spec, net)

    # -- checks ----------------------------------------------------------------
    def _lc_key_ok(self, key, spec) -> bool:
        if spec.kind == "raw" or self.tree is None:
            return True
        if key[1] == "n2c":
            return self.tree.is_inner(key[3]) and self.tree.leaf_parent(key[2]) == key[3]
        if key[1] == "c2c":
            return self._edge_ok(key[2], key[3], key[4])
        return False

    def _edge_ok(self, direction, s, r) -> bool:
        t = self.tree
        if not (t.is_inner(s) and t.is_inner(r)):
            return False
        if direction == "up":
            return t.parent(s) == r
        return t.parent(r) == s

    def _on_tn2c(self, env, key, m, spec, net):
        if key[1] != "n2c" or env.sender != key[2]:
            return
        u = key[3]
        if self.id not in self.view(u):
            return
        if spec.kind == "rbc" and key[2] != spec.origin:
            return
        if spec.kind in ("rbc", "rag") and not self._lc_key_ok(key, spec):
            return
        if spec.kind == "rag" and net.cfg.mode != ASYNC and net.round > spec.start + spec.commit_window:
            return
        self.lc_propose(net, key, m)

    def _on_tc2n(self, env, key, m, spec, net):
        kind = key[1]
        if kind == "c2n":
            s, r = key[3], key[4]
            if spec.kind != "raw" and not self._edge_ok(key[2], s, r):
                return
        elif kind == "leaf":
            s = key[2]
            if spec.kind != "raw" and self.tree.leaf_parent(self.id) != s:
                return
        else:
            s = key[2]
        col = self.c2n.get(key)
        if col is None:
            col = self.c2n[key] = C2nCollector(self.view(s), self.beta)
        for act, val in col.on_transmit(env.sender, m):
            self._c2n_deliver(net, key, val, spec)

    # -- instance plumbing -----------------------------------------------------
    def _lc(self, key, u) -> LazyConsensus:
        inst = self.lc.get(key)
        if inst is None:
            inst = self.lc[key] = LazyConsensus(self.view(u), self.beta)
        return inst

    def _run_lc(self, net, key, inst, acts):
        for act, x in acts:
            if act in ("echo", "vote"):
                self._to_view(net, inst.view, act, key, x)
            else:
                self.decisions.setdefault(key, []).append(x)
                self._lc_decided(net, key, x)

    def _lc_decided(self, net, key, x):
        spec = self.sessions[key[0]]
        sid = key[0]
        if spec.kind == "raw":
            net.emit(self.id, "decide", x, list(key))
            return
        if key[1] == "n2c":
            u = key[3]
            if spec.kind == "rbc":
                self._cast_up(net, sid, x, u)
            else:
                self._aggregate_up(net, sid, u, ("leaf", key[2]), x)
        elif key[1] == "c2c":
            direction, s, r = key[2], key[3], key[4]
            if direction == "down":
                self._cast_down(net, sid, x, r)
            elif spec.kind == "rbc":
                self._cast_up(net, sid, x, r)
            else:
                self._aggregate_up(net, sid, r, ("inner", s), x)

    def _c2n_deliver(self, net, key, m, spec):
        sid = key[0]
        if key[1] == "c2n":
            r = key[4]
            if self.id in self.view(r):
                self.lc_propose(net, (sid, "c2c", key[2], key[3], r), m)
        elif key[1] == "leaf":
            if spec.kind == "rag" and isinstance(m, tuple) and m and m[0] == "result":
                self.output.setdefault(sid, []).append(m[1])
                net.emit(self.id, "output", m[1], sid)
            else:
                self.delivered.setdefault(sid, []).append(m)
                net.emit(self.id, "deliver", m, sid)
        else:
            self.delivered.setdefault(sid, []).append(m)
            net.emit(self.id, "deliver", m, sid)

    # -- tree casting ------------------------------------------------------------
    def _cast_up(self, net, sid, m, u):
        if (sid, u) in self.up_done:
            return
        self.up_done.add((sid, u))
        p = self.tree.parent(u)
        if p is None:
            self._cast_down(net, sid, m, u)
            return
        self._to_view(net, self.view(p), "tc2n", (sid, "c2n", "up", u, p), m)

    def _cast_down(self, net, sid, m, u):
        if (sid, u) in self.down_done:
            return
        self.down_done.add((sid, u))
        for kind, c in self.tree.children(u):
            if kind == "inner":
                self._to_view(net, self.view(c), "tc2n", (sid, "c2n", "down", u, c), m)
            else:
                self._send(net, c, "tc2n", (sid, "leaf", u), m)

    # -- aggregation -------------------------------------------------------------
    def _aggregate_up(self, net, sid, u, source, part):
        key = (sid, u)
        st = self.rag.get(key)
        spec = self.sessions[sid]
        if st is None:
            st = self.rag[key] = {"parts": {}, "deadline": spec.deadline(self.tree, u), "closed": False}
        if st["closed"]:
            return
        st["parts"].setdefault(source, part)
        if net.cfg.mode != ASYNC and net.round >= st["deadline"]:
            self._close(net, sid, u)

    def _close(self, net, sid, u):
        st = self.rag[(sid, u)]
        st["closed"] = True
        spec = self.sessions[sid]
        y = spec.agg.fold(st["parts"][k] for k in sorted(st["parts"]))
        p = self.tree.parent(u)
        if p is None:
            self._cast_down(net, sid, ("result", y), u)
        else:
            self._to_view(net, self.view(p), "tc2n", (sid, "c2n", "up", u, p), y)


# -- byzantine helpers for execution-phase runs -------------------------------

def _views_by_node(ws: WitnessSystem, v: int) -> Dict[int, FrozenSet[int]]:
    return {u: per[v] for u, per in ws.views.items() if v in per}


def committee_union(ws: WitnessSystem, u: int) -> FrozenSet[int]:
    return frozenset().union(*ws.views.get(u, {}).values()) if ws.views.get(u) else EMPTY


def commit_envelopes(ws: WitnessSystem, tree: BroadcastTree, spec: SessionSpec, b: int, value,
                     receivers: Optional[Iterable[int]] = None) -> List[Envelope]:
    """A byzantine leaf's commit of ``value`` to its parent committee."""
    u = tree.leaf_parent(b)
    part = spec.agg.lift(value) if spec.agg else value
    key = (spec.sid, "n2c", b, u)
    bits = TAG_BITS + 3 * id_bits(ws.n) + (spec.agg.bits(part, ws.n) if spec.agg else spec.value_bits)
    to = sorted(receivers) if receivers is not None else sorted(committee_union(ws, u))
    return [Envelope(b, w, (spec.sid, spec.kind), ("tn2c", key, part), bits) for w in to]


class CommitSchedule(Strategy):
    """Byzantine leaves commit given values at given rounds: (round, node, value)."""
    name = "commit-schedule"

    def __init__(self, byzantine, seed=0, schedule=(), builder=None, **options):
        super().__init__(byzantine, seed, **options)
        self.schedule = sorted(schedule)
        self.builder = builder
        self.log: List[Tuple[int, int, Any]] = []

    def act(self, view, budget):
        out = []
        for r, b, x in self.schedule:
            if r == view.round and (r, b) not in {(a, c) for a, c, _ in self.log}:
                self.log.append((r, b, x))
                out.extend(self.builder(b, x))
        return out


class RbcEquivocator(Strategy):
    """Byzantine sender splits two values; byzantine view members echo and vote for both."""
    name = "rbc-equivocate"

    def __init__(self, byzantine, seed=0, ws=None, tree=None, sid=1, origin=None,
                 values=("m1", "m2"), value_bits=16, **options):
        super().__init__(byzantine, seed, **options)
        self.ws, self.tree, self.sid, self.origin = ws, tree, sid, origin
        self.values = values
        self.vb = value_bits
        self.seen = 0
        self.started = False
        self.touched: set = set()

    def _bits(self, key):
        return TAG_BITS + sum(1 for x in key if isinstance(x, int)) * id_bits(self.ws.n) + self.vb

    def act(self, view, budget):
        out = []
        if not self.started:
            self.started = True
            if self.origin in self.byz:
                u = self.tree.leaf_parent(self.origin)
                key = (self.sid, "n2c", self.origin, u)
                members = sorted(committee_union(self.ws, u))
                self.rng.shuffle(members)
                cut = self.rng.randint(0, len(members))
                for i, w in enumerate(members):
                    m = self.values[0] if i < cut else self.values[1]
                    out.append(Envelope(self.origin, w, (self.sid, "rbc"), ("tn2c", key, m),
                                        self._bits(key)))
        for env in view.inbox[self.seen:]:
            tag, key, m = env.payload
            if tag not in ("echo", "vote", "tc2n") or (env.receiver, key) in self.touched:
                continue
            self.touched.add((env.receiver, key))
            if tag == "tc2n":
                continue
            u = _lc_subject(key)
            targets = sorted(x for x in committee_union(self.ws, u) if x not in self.byz)
            for x in self.values:
                for t in ("echo", "vote"):
                    for w in targets:
                        out.append(Envelope(env.receiver, w, (self.sid, "rbc"), (t, key, x),
                                            self._bits(key)))
        self.seen = len(view.inbox)
        return out


# -- runners --------------------------------------------------------------------

@dataclass
class ProtocolRun:
    net: Network
    nodes: Dict[int, StackNode]
    metrics: RunMetrics
    rounds: int

    def delivered(self, sid: int) -> Dict[int, list]:
        return {v: list(p.delivered.get(sid, [])) for v, p in self.nodes.items()}

    def outputs(self, sid: int) -> Dict[int, list]:
        return {v: list(p.output.get(sid, [])) for v, p in self.nodes.items()}

    def honest_messages(self) -> int:
        return max((self.metrics.messages[v] for v in self.nodes), default=0)


def make_nodes(ws: WitnessSystem, tree: Optional[BroadcastTree], sessions: Dict[int, SessionSpec],
               inputs: Optional[Dict[int, Dict[int, Any]]] = None, seed: int = 0) -> Dict[int, StackNode]:
    inputs = inputs or {}
    return {v: StackNode(v, ws.n, ws.beta, _views_by_node(ws, v), tree, sessions,
                         inputs.get(v), seed) for v in ws.honest}


# execution runs default to the largest adversary share the pre-computation tolerates
DEFAULT_B = 1 / 24


def _default_sigma(ws: WitnessSystem) -> int:
    return 1 << 20


def run_reliable_broadcast(ws: WitnessSystem, tree: BroadcastTree, sender: int, message, *,
                           sid: int = 1, mode: str = SYNC, policy=None, adversary: Optional[Strategy] = None,
                           seed: int = 0, sigma: Optional[int] = None, b: float = DEFAULT_B,
                           max_rounds: int = 10_000,
                           fairness_bound: int = 10_000, stabilization: int = 0,
                           max_delay: int = 1) -> ProtocolRun:
    sessions = {sid: SessionSpec(sid, "rbc", origin=sender)}
    nodes = make_nodes(ws, tree, sessions, seed=seed)
    cfg = NetworkConfig(n=ws.n, sigma=sigma or _default_sigma(ws), b=b, seed=seed, mode=mode,
                        byzantine=ws.byzantine, fairness_bound=fairness_bound,
                        stabilization=stabilization, max_delay=max_delay)
    net = Network(cfg, nodes, adversary=adversary)
    net.start()
    if sender in nodes:
        nodes[sender].broadcast(net, sid, message)
    if mode == ASYNC:
        net.run_async(policy)
    else:
        net.run_rounds(max_rounds)
    return ProtocolRun(net, nodes, net.collect_metrics(), net.round)


def run_aggregation(ws: WitnessSystem, tree: BroadcastTree, spec: AggregationSpec,
                    inputs: Mapping[int, Any], *, sid: int = 1, hop: int = 6, commit_window: int = 1,
                    adversary: Optional[Strategy] = None, adversary_factory=None, seed: int = 0,
                    sigma: Optional[int] = None, b: float = DEFAULT_B, lateness: int = 1,
                    max_rounds: int = 10_000) -> Tuple[ProtocolRun, SessionSpec]:
    """Synchronous reliable aggregation; ``inputs`` maps honest contributors to x_v."""
    sess = SessionSpec(sid, "rag", agg=spec, start=0, commit_window=commit_window, hop=hop)
    sessions = {sid: sess}
    nodes = make_nodes(ws, tree, sessions, {v: {sid: x} for v, x in inputs.items()}, seed)
    if adversary is None and adversary_factory is not None:
        adversary = adversary_factory(sess)
    cfg = NetworkConfig(n=ws.n, sigma=sigma or _default_sigma(ws), b=b, seed=seed, mode=SYNC,
                        byzantine=ws.byzantine, lateness=lateness)
    net = Network(cfg, nodes, adversary=adversary)
    net.run_rounds(max_rounds, min_rounds=sess.deadline(tree, tree.root) + 1)
    return ProtocolRun(net, nodes, net.collect_metrics(), net.round), sess


def accepted_commits(run: ProtocolRun, sess: SessionSpec, tree: BroadcastTree,
                     ws: WitnessSystem) -> Dict[int, Any]:
    """Recompute from the trace which leaves committed in time, and with what.

    A commit counts when every honest core member of the leaf's parent
    committee received the same value from the leaf before the window closed.
    Values are the parts as sent on the wire, i.e. ``spec.lift(x)``.
    """
    window = sess.start + sess.commit_window
    got: Dict[int, Dict[int, set]] = {}
    for rec in run.net.trace:
        if rec.get("tag") != "tn2c" or rec["session"][0] != sess.sid:
            continue
        if rec["round"] > window or rec["receiver"] in ws.byzantine:
            continue
        got.setdefault(rec["sender"], {}).setdefault(rec["receiver"], set()).add(_freeze(rec["payload"][2]))
    hset = set(ws.honest)
    out = {}
    for s, per in got.items():
        u = tree.leaf_parent(s)
        core = frozenset.intersection(*ws.views[u].values()) & hset
        vals = [per.get(w, set()) for w in core]
        if vals and all(len(x) == 1 for x in vals) and len(set.union(*vals)) == 1:
            out[s] = next(iter(vals[0]))
    return out


def _freeze(x):
    if isinstance(x, list):
        return tuple(_freeze(y) for y in x)
    return x


@dataclass
class CoinRun:
    outputs: Dict[int, list]
    honest_coins: Dict[int, int]
    accepted: Dict[int, int]
    run: ProtocolRun

    @property
    def value(self):
        vals = {tuple(v) for v in self.outputs.values()}
        return next(iter(vals))[0] if len(vals) == 1 and next(iter(vals)) else None


def common_coin(ws: WitnessSystem, tree: BroadcastTree, k: int = 1, *, seed: int = 0,
                adversary_factory=None, hop: int = 6, lateness: int = 1) -> CoinRun:
    """XOR of k-bit local coins drawn by every honest node at the first round."""
    spec = AggregationSpec("xor-k", k=k)
    run, sess = run_aggregation(ws, tree, spec, {v: "coin" for v in ws.honest}, hop=hop, seed=seed,
                                adversary_factory=adversary_factory, lateness=lateness)
    coins = {v: p.coin for v, p in run.nodes.items()}
    acc = accepted_commits(run, sess, tree, ws)
    return CoinRun(outputs=run.outputs(sess.sid), honest_coins=coins, accepted=acc, run=run)


def decide_from_counts(counts: Mapping[Any, int], n: int, default_index: Optional[int] = None):
    """Majority of at least n/2 wins (smallest on a tie); else max count, smallest value."""
    maj = sorted(x for x, c in counts.items() if 2 * c >= n)
    if maj:
        return maj[0]
    if not counts:
        return None
    if default_index is not None:
        cands = sorted(counts)
        return cands[default_index % len(cands)]
    best = max(counts.values())
    return min(x for x, c in counts.items() if c == best)


@dataclass
class ConsensusRun:
    decisions: Dict[int, Any]
    counts: Dict[int, Any]
    coin: Optional[int]
    run: ProtocolRun


def consensus(ws: WitnessSystem, tree: BroadcastTree, proposals: Mapping[int, Any], *,
              byzantine_schedule: Sequence[Tuple[int, int, Any]] = (), seed: int = 0,
              randomized_default: bool = False, hop: int = 6) -> ConsensusRun:
    """Count proposals with reliable aggregation, then apply the majority rule."""
    spec = AggregationSpec("value-count", k=max(2, len(set(proposals.values()))))

    def factory(sess):
        return CommitSchedule(sorted(ws.byzantine), seed, byzantine_schedule,
                              builder=lambda b, x: commit_envelopes(ws, tree, sess, b, x))

    run, sess = run_aggregation(ws, tree, spec, proposals, seed=seed, hop=hop,
                                adversary_factory=factory if byzantine_schedule else None)
    coin = None
    if randomized_default:
        values = set(proposals.values()) | {x for _, _, x in byzantine_schedule}
        bits = max(1, math.ceil(math.log2(max(2, len(values)))))
        coin = common_coin(ws, tree, bits, seed=seed + 7919, hop=hop).value
    decisions, counts = {}, {}
    for v, outs in run.outputs(sess.sid).items():
        if len(outs) != 1:
            decisions[v] = None
            continue
        c = dict(outs[0])
        counts[v] = outs[0]
        decisions[v] = decide_from_counts(c, ws.n, coin)
    return ConsensusRun(decisions=decisions, counts=counts, coin=coin, run=run)


# -- synthetic witness systems ----------------------------------------------------

def make_oracle_witness_system(n: int, t: int, beta: int, alpha: float = 1 / 6, seed: int = 0,
                               padding: int = 0, available: Optional[int] = None,
                               byzantine: Optional[Iterable[int]] = None) -> WitnessSystem:
    """A system that satisfies the three witness properties by construction.

    ``available`` honest subjects get committees (default ceil(alpha*n));
    cores are dealt round-robin over honest nodes so every node sits in
    about available*beta/(n-t) cores. Each honest view adds ``padding``
    byzantine members, drawn per view.
    """
    if not 0 <= t < n:
        raise ValueError("need 0 <= t < n")
    rng = random.Random(seed)
    byz = sorted(byzantine) if byzantine is not None else sorted(rng.sample(range(n), t))
    if len(byz) != t:
        raise ValueError("byzantine set size must equal t")
    honest = [v for v in range(n) if v not in set(byz)]
    h = len(honest)
    if beta < 1 or beta > h:
        raise ValueError(f"beta={beta} needs 1 <= beta <= {h} honest nodes")
    if 2 * (beta + padding) >= 3 * beta:
        raise ValueError("padding must stay below beta/2")
    if padding > t:
        raise ValueError("padding needs at least that many byzantine nodes")
    m = math.ceil(alpha * n - 1e-9) if available is None else available
    if m > h:
        raise ValueError(f"cannot make {m} honest subjects available with {h} honest nodes")
    if m * beta > 2 * beta * h:
        raise ValueError("membership bound 2*beta cannot hold")
    subjects = sorted(rng.sample(honest, m))
    views: Dict[int, Dict[int, FrozenSet[int]]] = {}
    cores = {}
    for i, u in enumerate(subjects):
        core = frozenset(honest[(i * beta + j) % h] for j in range(beta))
        cores[u] = core
        per = {}
        for v in honest:
            per[v] = core | frozenset(rng.sample(byz, padding)) if padding else core
        views[u] = per
    return WitnessSystem(n=n, beta=beta, alpha=alpha, byzantine=frozenset(byz), views=views,
                         params={"n": n, "t": t, "beta": beta, "alpha": alpha, "oracle": True},
                         cores=cores)


# -- exhaustive exploration -------------------------------------------------------

class _Sink:
    """Network stand-in for exploration: records sends instead of queueing them."""

    def __init__(self):
        self.round = 0
        self.step = 0
        self.out: List[Tuple[int, int, tuple]] = []
        self.cfg = NetworkConfig(n=1, sigma=1, mode=ASYNC)

    def send(self, sender, receiver, session, payload, bits):
        self.out.append((sender, receiver, payload))

    def emit(self, *a, **k):
        pass


@dataclass
class ExploreResult:
    states: int
    terminals: int
    violations: List[str]


def explore(nodes: Dict[int, StackNode], pending: Sequence[Tuple[int, int, tuple]],
            byz_moves: Sequence[Tuple[int, int, tuple]], check_state: Callable, check_final: Callable,
            symmetric: Sequence[Sequence[int]] = (), max_states: int = 5_000_000,
            entry_tags: Tuple[str, ...] = ("tn2c", "tc2n")) -> ExploreResult:
    """Enumerate every delivery order of honest messages and every subset and
    timing of the optional byzantine messages ``byz_moves``.

    A state is one (node, inbox) pair per honest node. Pairs are merged when
    they agree up to renaming honest senders, which is exact because a
    receiver only counts distinct senders and an honest node sends each
    message at most once. A byzantine message may be delivered any number
    of times; repeats are no-ops and are pruned, as are messages a node can
    no longer react to. Each group in ``symmetric`` lists interchangeable
    honest nodes, whose pairs are sorted before comparison.

    Messages tagged in ``entry_tags`` (tn2c, tc2n) must all be present at
    the start; the run fails if a node emits one. Their deliveries then
    depend on nothing else, and they commute with every echo and vote
    delivery (a proposal only sets ``proposed``), so any schedule can be
    reordered to process them first. They are enumerated up front, per
    node: every order of the honest ones, with every subset of the
    byzantine ones interleaved.
    """
    honest = frozenset(nodes)
    order = sorted(nodes)
    pos = {v: i for i, v in enumerate(order)}
    groups = [sorted(pos[v] for v in g) for g in symmetric]
    grouped = {i for g in groups for i in g}
    groups += [[i] for i in range(len(order)) if i not in grouped]

    # Nodes are immutable once stored: equal local states share one object and
    # each (state, message) transition is computed once.
    interned: Dict[Any, StackNode] = {}
    memo: Dict[Tuple[int, int, str], Tuple[StackNode, tuple]] = {}
    akeys: Dict[int, Any] = {}
    comp_ids: Dict[Any, int] = {}

    def intern(node):
        return interned.setdefault((node.id, node.abstract_key(frozenset())), node)

    def deliver(node, s, p, prepr):
        hit = memo.get((id(node), s, prepr))
        if hit is None:
            new = node.clone()
            sink = _Sink()
            new.on_message(Envelope(s, new.id, (p[1][0], "x"), p, 0), sink)
            out = tuple((b, (repr(c), a, c)) for a, b, c in sink.out if b in honest)
            if any(c[0] in entry_tags for _, (_, _, c) in out):
                raise RuntimeError("entry message emitted during exploration")
            hit = memo[(id(node), s, prepr)] = (intern(new), out)
        return hit

    inboxes: Dict[int, list] = {v: [] for v in order}
    entry_hon: Dict[int, list] = {v: [] for v in order}
    entry_byz: Dict[int, list] = {v: [] for v in order}
    for s, r, p in pending:
        if r in honest:
            (entry_hon if p[0] in entry_tags else inboxes)[r].append((repr(p), s, p))
    moves = [[] for _ in order]
    for s, r, p in byz_moves:
        if r in honest:
            if p[0] in entry_tags:
                entry_byz[r].append((repr(p), s, p))
            else:
                moves[pos[r]].append((repr(p), s, p))

    def entry_outcomes(v):
        """(node, sends) for every way node v can consume its entry messages."""
        found = {}
        todo = [(intern(nodes[v]), (), tuple(entry_hon[v]), tuple(entry_byz[v]))]
        while todo:
            node, sent, hon, byz = todo.pop()
            if not hon:
                found.setdefault((id(node), sent), (node, sent))
            for src, opt in ((hon, False), (byz, True)):
                for k, e in enumerate(src):
                    nd, out = deliver(node, e[1], e[2], e[0])
                    rest = src[:k] + src[k + 1:]
                    todo.append((nd, tuple(sorted(sent + out, key=repr)),
                                 hon if opt else rest, rest if opt else byz))
        return list(found.values())

    # A component is one (node, inbox) pair, stored once and named by an int;
    # a state is a tuple of component ids, one per honest node.
    comps: List[Tuple[StackNode, tuple]] = []
    comp_ids: Dict[Tuple[int, tuple], int] = {}
    canon: List[int] = []
    canon_ids: Dict[Any, int] = {}
    succ_memo: Dict[int, list] = {}
    add_memo: Dict[Tuple[int, tuple], int] = {}

    def comp(node, inbox):
        inbox = tuple(sorted((e for e in inbox if not node.ignores(e[2])), key=lambda x: x[0]))
        k = (id(node), inbox)
        c = comp_ids.get(k)
        if c is None:
            c = comp_ids[k] = len(comps)
            comps.append((node, inbox))
            ak = akeys.get(id(node))
            if ak is None:
                ak = akeys[id(node)] = node.abstract_key(honest)
            canon.append(canon_ids.setdefault((ak, tuple(e[0] for e in inbox)), len(canon_ids)))
        return c

    def add(c, e):
        k = (c, e)
        r = add_memo.get(k)
        if r is None:
            node, inbox = comps[c]
            r = add_memo[k] = comp(node, inbox + (e,))
        return r

    def successors(c):
        out = succ_memo.get(c)
        if out is None:
            node, inbox = comps[c]
            out = []
            last = None
            for k, e in enumerate(inbox):
                if e[0] != last:
                    last = e[0]
                    nd, sends = deliver(node, e[1], e[2], e[0])
                    out.append((comp(nd, inbox[:k] + inbox[k + 1:]), sends))
            for e in moves[pos[node.id]]:
                if not node.ignores(e[2], e[1]):
                    nd, sends = deliver(node, e[1], e[2], e[0])
                    out.append((comp(nd, inbox), sends))
            succ_memo[c] = out
        return out

    starts = []
    for combo in itertools.product(*(entry_outcomes(v) for v in order)):
        ibs = [list(inboxes[v]) for v in order]
        for nd, sent in combo:
            for r, e in sent:
                ibs[pos[r]].append(e)
        starts.append(tuple(comp(nd, tuple(ib)) for (nd, _), ib in zip(combo, ibs)))

    checked: Dict[tuple, Optional[str]] = {}

    def check(st, final):
        k = (final,) + tuple(id(comps[c][0]) for c in st)
        if k not in checked:
            ns = {v: comps[c][0] for v, c in zip(order, st)}
            err = check_state(ns)
            if err is None and final:
                err = check_final(ns)
            checked[k] = err
        return checked[k]

    seen = set()
    violations: List[str] = []
    terminals = 0
    stack = starts
    while stack:
        st = stack.pop()
        k = tuple(tuple(sorted(canon[st[i]] for i in g)) for g in groups)
        if k in seen:
            continue
        seen.add(k)
        if len(seen) > max_states:
            violations.append("state budget exhausted")
            break
        final = not any(comps[c][1] for c in st)
        terminals += final
        err = check(st, final)
        if err:
            violations.append(err)
            continue
        for i, c in enumerate(st):
            for c2, sends in successors(c):
                new = list(st)
                new[i] = c2
                for r, e in sends:
                    j = pos[r]
                    new[j] = add(new[j], e)
                stack.append(tuple(new))
    return ExploreResult(states=len(seen), terminals=terminals, violations=violations)


def phase_king_exhaustive(n_loc: int, byzantine: Sequence[int], inputs: Mapping[int, int],
                          kings: Optional[Sequence[int]] = None) -> dict:
    """All outcomes of phase-king over every byzantine message choice.

    Each honest receiver's reaction in a round depends only on what it
    receives, so per round the set of successor states is the product of
    each receiver's own outcome set; states are deduplicated between rounds.
    """
    ids = list(range(n_loc))
    byz = set(byzantine)
    hon = [v for v in ids if v not in byz]
    f = len(byz)
    t_loc = local_fault_bound(n_loc)
    if kings is None:
        kings = ids[: t_loc + 1]
    branches = 1
    states = {tuple(int(inputs[v]) for v in hon)}
    for phase, king in enumerate(kings):
        nxt = set()
        for vals in states:
            c_h = Counter(vals)
            r1 = []
            for _ in hon:
                opts = set()
                for ones in range(f + 1):
                    for zeros in range(f + 1 - ones):
                        c = Counter(c_h)
                        c[1] += ones
                        c[0] += zeros
                        opts.add(pk_propose(c, n_loc, t_loc))
                r1.append(sorted(opts, key=repr))
            for props in itertools.product(*r1):
                branches += 1
                p_h = Counter(x for x in props if x is not None)
                r2 = []
                for i, _ in enumerate(hon):
                    opts = set()
                    for ones in range(f + 1):
                        for zeros in range(f + 1 - ones):
                            c = Counter(p_h)
                            c[1] += ones
                            c[0] += zeros
                            opts.add(pk_adopt(c, n_loc, t_loc, vals[i]))
                    r2.append(sorted(opts))
                for mid in itertools.product(*r2):
                    branches += 1
                    r3 = []
                    for i, v in enumerate(hon):
                        val, strong = mid[i]
                        if king in byz:
                            kv = {pk_king(val, strong, x) for x in (0, 1, None)}
                        else:
                            kv = {pk_king(val, strong, mid[hon.index(king)][0])}
                        r3.append(sorted(kv))
                    for out in itertools.product(*r3):
                        branches += 1
                        nxt.add(out)
        states = nxt
    same = len(set(inputs[v] for v in hon)) == 1
    agree = all(len(set(s)) == 1 for s in states)
    valid = (not same) or all(s[0] == inputs[hon[0]] for s in states)
    return {"finals": states, "agreement": agree, "validity": valid, "branches": branches}


# -- exhaustive scenarios at beta = 3 ---------------------------------------------
# Committee 0 has view {0, 1, 2, 3} and committee 4 has view {4, 5, 6, 7} at
# every honest node; 3 and 7 are byzantine padding.

def _tiny_system(byz=(3, 7), extra_byz=()) -> WitnessSystem:
    c0, c4 = frozenset({0, 1, 2, 3}), frozenset({4, 5, 6, 7})
    bz = frozenset(byz) | frozenset(extra_byz)
    hon = [v for v in range(8) if v not in bz]
    return WitnessSystem(n=8, beta=3, alpha=0.25, byzantine=bz,
                         views={0: {v: c0 for v in hon}, 4: {v: c4 for v in hon}})


def _nodes(ws, who):
    sess = {1: SessionSpec(1, "raw")}
    return {v: StackNode(v, ws.n, ws.beta, _views_by_node(ws, v), None, sess) for v in who}


def _kick(nodes, fn):
    pend = []
    for v in sorted(nodes):
        sink = _Sink()
        fn(v, nodes[v], sink)
        pend.extend(sink.out)
    return pend


def _byz_lc(sender, receivers, key, values):
    return [(sender, r, (tag, key, x)) for r in receivers for tag in ("echo", "vote") for x in values]


def _decided(nodes, key):
    return {v: p.decisions.get(key, []) for v, p in nodes.items()}


def _lc_checks(key, members, proposed):
    def state(ns):
        for v in members:
            d = ns[v].decisions.get(key, [])
            if len(d) > 1:
                return f"node {v} decided twice: {d}"
            if d and d[0] not in proposed.values():
                return f"node {v} decided {d[0]!r}, not an honest proposal"
        return None

    def final(ns):
        ds = [tuple(ns[v].decisions.get(key, [])) for v in members]
        if any(ds) and len(set(ds)) != 1:
            return f"agreement broken: {ds}"
        if len(set(proposed.values())) == 1 and ds[0] != (next(iter(proposed.values())),):
            return f"validity broken: {ds}"
        return None

    return state, final


def explore_lazy_consensus(proposals: Mapping[int, Any], values=("x", "y")) -> ExploreResult:
    """lc on committee 0 with honest proposals for 0, 1, 2 and byzantine member 3."""
    ws = _tiny_system()
    key = (1, "lc", 0)
    nodes = _nodes(ws, [0, 1, 2])
    pend = _kick(nodes, lambda v, p, s: p.lc_propose(s, key, proposals[v]))
    st, fin = _lc_checks(key, [0, 1, 2], dict(proposals))
    groups = {}
    for v in (0, 1, 2):
        groups.setdefault(proposals[v], []).append(v)
    return explore(nodes, pend, _byz_lc(3, [0, 1, 2], key, values), st, fin,
                   symmetric=list(groups.values()))


def explore_n2c(honest_sender: bool, values=("m1", "m2")) -> ExploreResult:
    """rbc-n2c from node 5 to committee 0; a byzantine sender may split its message."""
    ws = _tiny_system(extra_byz=() if honest_sender else (5,))
    key = (1, "n2c", 5, 0)
    nodes = _nodes(ws, [0, 1, 2] + ([5] if honest_sender else []))
    if honest_sender:
        pend = _kick({5: nodes[5]}, lambda v, p, s: p.n2c_broadcast(s, key, values[0]))
        moves = []
        proposed = {5: values[0]}
    else:
        pend = []
        moves = [(5, r, ("tn2c", key, m)) for r in (0, 1, 2) for m in values]
        proposed = {5: values[0], 6: values[1]}
    moves += _byz_lc(3, [0, 1, 2], key, values)
    st, fin = _lc_checks(key, [0, 1, 2], proposed)
    if not honest_sender:
        # any single value may win; only integrity and agreement apply
        def fin(ns, _k=key):
            ds = [tuple(ns[v].decisions.get(_k, [])) for v in (0, 1, 2)]
            return None if not any(ds) or len(set(ds)) == 1 else f"agreement broken: {ds}"
    return explore(nodes, pend, moves, st, fin, symmetric=[[0, 1, 2]])


def explore_c2n(senders=(0, 1, 2), values=("m", "m'")) -> ExploreResult:
    """rbc-c2n from committee 0 to node 4; honest members in ``senders`` send m."""
    ws = _tiny_system()
    key = (1, "raw-c2n", 0)
    nodes = _nodes(ws, [4])
    pend = [(s, 4, ("tc2n", key, values[0])) for s in senders]
    moves = [(3, 4, ("tc2n", key, m)) for m in values]

    def state(ns):
        d = ns[4].delivered.get(1, [])
        if len(d) > 1:
            return f"delivered twice: {d}"
        if d and (d[0] != values[0] or not senders):
            return f"delivered {d[0]!r} which no honest member sent"
        return None

    def final(ns):
        d = ns[4].delivered.get(1, [])
        if len(senders) >= ws.beta and d != [values[0]]:
            return f"validity broken: {d}"
        return None

    return explore(nodes, pend, moves, state, final)


def explore_c2c(values=("m", "m'")) -> ExploreResult:
    """rbc-c2c from committee 0 (honest 0, 1, 2 hold m) to committee 4 (honest 4, 5, 6)."""
    ws = _tiny_system()
    ckey = (1, "c2n", "up", 0, 4)
    lkey = (1, "c2c", "up", 0, 4)
    nodes = _nodes(ws, [4, 5, 6])
    pend = [(s, r, ("tc2n", ckey, values[0])) for s in (0, 1, 2) for r in (4, 5, 6)]
    moves = [(3, r, ("tc2n", ckey, m)) for r in (4, 5, 6) for m in values]
    moves += _byz_lc(7, [4, 5, 6], lkey, values)
    st, fin = _lc_checks(lkey, [4, 5, 6], {0: values[0]})
    return explore(nodes, pend, moves, st, fin, symmetric=[[4, 5, 6]])
