"""Deterministic message-passing engine.

Three timing models share one engine:

* synchronous: a message sent in round r arrives in round r+1,
* partially synchronous: before the stabilization round a scheduler picks a
  delay in [1, max_delay]; afterwards delivery is next-round,
* asynchronous: a policy picks which pending envelope is delivered next,
  subject to a hard fairness bound measured in steps.

Honest nodes may push at most ``sigma`` bits per round; excess traffic waits
in a per-node FIFO. Byzantine nodes share a pooled budget of floor(b*n*sigma)
bits per round that does not carry over.
"""
from __future__ import annotations

import json
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .params import TAG_BITS, id_bits

log = logging.getLogger(__name__)

SYNC = "synchronous"
PSYNC = "partially-synchronous"
ASYNC = "asynchronous"


class SendStatus(Enum):
    ACCEPTED = "accepted"
    DEFERRED = "deferred"
    REJECTED = "rejected"


class BudgetError(RuntimeError):
    pass


class SchedulerError(RuntimeError):
    pass


def set_bits(n: int, k: int) -> int:
    return k * id_bits(n)


def message_bits(n: int, ids: int = 0, sets: Sequence[int] = (), value_bits: int = 0) -> int:
    """Accounted size: a tag, some node ids, some node sets, raw value bits."""
    return TAG_BITS + ids * id_bits(n) + sum(set_bits(n, k) for k in sets) + value_bits


@dataclass(frozen=True)
class Envelope:
    sender: int
    receiver: int
    session: tuple
    payload: tuple
    bit_size: int
    eid: int = -1

    @property
    def tag(self) -> str:
        return self.payload[0] if self.payload else ""


@dataclass
class NetworkConfig:
    n: int
    sigma: int
    b: float = 0.0
    seed: int = 0
    mode: str = SYNC
    stabilization: int = 0
    max_delay: int = 1
    byzantine: frozenset = frozenset()
    strict: bool = True
    fairness_bound: int = 1000
    lateness: int = 1

    def __post_init__(self):
        self.byzantine = frozenset(self.byzantine)
        if any(not 0 <= x < self.n for x in self.byzantine):
            raise ValueError("byzantine ids must lie in [0, n)")
        if self.mode not in (SYNC, PSYNC, ASYNC):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def honest(self) -> List[int]:
        return [v for v in range(self.n) if v not in self.byzantine]


@dataclass
class RunMetrics:
    rounds: int = 0
    steps: int = 0
    messages: List[int] = field(default_factory=list)
    bits: List[int] = field(default_factory=list)
    max_round_bits: int = 0
    max_round_received_bits: int = 0
    adversary_bits: int = 0
    adversary_max_round_bits: int = 0

    @property
    def max_messages(self) -> int:
        return max(self.messages, default=0)

    @property
    def max_bits(self) -> int:
        return max(self.bits, default=0)

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "steps": self.steps,
            "max_node_messages": self.max_messages,
            "max_node_bits": self.max_bits,
            "total_messages": sum(self.messages),
            "max_round_bits": self.max_round_bits,
            "max_round_received_bits": self.max_round_received_bits,
            "adversary_bits": self.adversary_bits,
            "adversary_max_round_bits": self.adversary_max_round_bits,
        }


class BandwidthLedger:
    """Per-node sent counters plus the pooled adversary counter."""

    def __init__(self, n: int, sigma: int, adv_budget: int):
        self.n = n
        self.sigma = sigma
        self.adv_budget = adv_budget
        self.messages = [0] * n
        self.bits = [0] * n
        self.round_bits = [0] * n
        self.round_recv = [0] * n
        self.max_round_bits = 0
        self.max_round_recv = 0
        self.adv_round = 0
        self.adv_total = 0
        self.adv_max_round = 0
        self.history: List[Tuple[int, int]] = []  # (honest max, adversary) per round

    def remaining(self, node: int) -> int:
        return self.sigma - self.round_bits[node]

    def charge(self, node: int, bits: int, adversary: bool = False) -> None:
        self.messages[node] += 1
        self.bits[node] += bits
        if adversary:
            self.adv_round += bits
            self.adv_total += bits
        else:
            self.round_bits[node] += bits

    def receive(self, node: int, bits: int) -> None:
        self.round_recv[node] += bits

    def charge_bulk(self, node: int, messages: int, bits: int) -> int:
        """Account a batch sent at full rate; returns the rounds it occupies."""
        self.messages[node] += messages
        self.bits[node] += bits
        if bits:
            self.max_round_bits = max(self.max_round_bits, min(bits, self.sigma))
        return -(-bits // self.sigma)

    def charge_adversary_bulk(self, bits_per_round: Iterable[int]) -> None:
        for b in bits_per_round:
            if b > self.adv_budget:
                raise BudgetError(f"adversary used {b} > {self.adv_budget} bits in a round")
            self.adv_total += b
            self.adv_max_round = max(self.adv_max_round, b)

    def close_round(self) -> None:
        hmax = max(self.round_bits, default=0)
        self.max_round_bits = max(self.max_round_bits, hmax)
        self.max_round_recv = max(self.max_round_recv, max(self.round_recv, default=0))
        self.adv_max_round = max(self.adv_max_round, self.adv_round)
        self.history.append((hmax, self.adv_round))
        self.round_bits = [0] * self.n
        self.round_recv = [0] * self.n
        self.adv_round = 0


class Process:
    """Base class for honest node state machines driven by the engine."""

    def __init__(self, node_id: int):
        self.id = node_id

    def on_start(self, net: "Network") -> None:
        pass

    def on_message(self, env: Envelope, net: "Network") -> None:
        pass

    def on_round(self, rnd: int, net: "Network") -> None:
        pass

    def snapshot(self) -> Any:
        return None


class Network:
    def __init__(self, config: NetworkConfig, processes: Optional[Dict[int, Process]] = None,
                 adversary=None, delay_fn: Optional[Callable[[Envelope, random.Random], int]] = None,
                 record_trace: bool = True):
        from .adversary import budget_for_round  # local import keeps modules acyclic

        self.cfg = config
        self.n = config.n
        self.rng = random.Random(config.seed)
        self.procs: Dict[int, Process] = dict(processes or {})
        for v in self.procs:
            if v in config.byzantine:
                raise ValueError(f"process given for byzantine node {v}")
        self.adversary = adversary
        self.delay_fn = delay_fn
        self.ledger = BandwidthLedger(self.n, config.sigma,
                                      budget_for_round(config.b, self.n, config.sigma))
        self.round = 0
        self.step = 0
        self._eid = 0
        self._backlog: Dict[int, deque] = {}
        self._due: Dict[int, List[Envelope]] = {}
        self._pending: Dict[int, Tuple[Envelope, int]] = {}
        self.trace: List[dict] = []
        self.events: List[dict] = []
        self.record_trace = record_trace
        self.snapshots: Dict[int, Dict[int, Any]] = {}
        self.byz_history: List[Envelope] = []
        self.byz_inbox: List[Envelope] = []
        self.rejected = 0
        self._started = False

    # -- sending -----------------------------------------------------------
    def _next_eid(self) -> int:
        self._eid += 1
        return self._eid

    def send(self, sender: int, receiver: int, session: tuple, payload: tuple, bits: int) -> SendStatus:
        env = Envelope(sender, receiver, session, payload, bits, self._next_eid())
        return self.schedule_send(env)

    def schedule_send(self, env: Envelope) -> SendStatus:
        if env.eid < 0:
            env = Envelope(env.sender, env.receiver, env.session, env.payload,
                           env.bit_size, self._next_eid())
        if not 0 <= env.receiver < self.n:
            raise ValueError(f"receiver {env.receiver} outside network")
        byz = env.sender in self.cfg.byzantine
        if self.cfg.mode == ASYNC:
            self.ledger.charge(env.sender, env.bit_size, adversary=byz)
            self._pending[env.eid] = (env, self.step)
            if byz:
                self.byz_history.append(env)
            return SendStatus.ACCEPTED
        if byz:
            if self.ledger.adv_round + env.bit_size > self.ledger.adv_budget:
                self.rejected += 1
                return SendStatus.REJECTED
            self.ledger.charge(env.sender, env.bit_size, adversary=True)
            self.byz_history.append(env)
            self._enqueue(env)
            return SendStatus.ACCEPTED
        q = self._backlog.get(env.sender)
        if not q and env.bit_size <= self.ledger.remaining(env.sender):
            self.ledger.charge(env.sender, env.bit_size)
            self._enqueue(env)
            return SendStatus.ACCEPTED
        if q is None:
            q = self._backlog[env.sender] = deque()
        q.append([env, env.bit_size])
        return SendStatus.DEFERRED

    def _enqueue(self, env: Envelope) -> None:
        delay = 1
        if self.cfg.mode == PSYNC and self.round < self.cfg.stabilization:
            if self.delay_fn is not None:
                delay = self.delay_fn(env, self.rng)
            else:
                delay = self.rng.randint(1, max(1, self.cfg.max_delay))
            delay = max(1, min(delay, max(1, self.cfg.max_delay)))
        self._due.setdefault(self.round + delay, []).append(env)

    def _drain_backlogs(self) -> None:
        for v in sorted(self._backlog):
            q = self._backlog[v]
            while q:
                item = q[0]
                room = self.ledger.remaining(v)
                if room <= 0:
                    break
                take = min(room, item[1])
                item[1] -= take
                self.ledger.round_bits[v] += take
                if item[1] > 0:
                    break
                q.popleft()
                env = item[0]
                self.ledger.messages[v] += 1
                self.ledger.bits[v] += env.bit_size
                self._enqueue(env)
        for v in [v for v, q in self._backlog.items() if not q]:
            del self._backlog[v]

    # -- protocol event log ------------------------------------------------
    def emit(self, node: int, event: str, value: Any, session: Any = None) -> None:
        rec = {"node": node, "event": event, "value": value, "session": session}
        if self.cfg.mode == ASYNC:
            rec["step"] = self.step
        else:
            rec["round"] = self.round
        self.events.append(rec)

    # -- views ---------------------------------------------------------------
    def _snapshot(self) -> None:
        if self.adversary is None:
            return
        key = self.step if self.cfg.mode == ASYNC else self.round
        self.snapshots[key] = {v: p.snapshot() for v, p in self.procs.items()}

    def adversary_view(self):
        from .adversary import AdversaryView

        now = self.step if self.cfg.mode == ASYNC else self.round
        cutoff = now - self.cfg.lateness
        snaps = {r: s for r, s in self.snapshots.items() if r <= cutoff}
        return AdversaryView(round=now, lateness=self.cfg.lateness, honest_snapshots=snaps,
                             history=tuple(self.byz_history), n=self.n,
                             byzantine=self.cfg.byzantine, inbox=tuple(self.byz_inbox))

    def _adversary_act(self) -> None:
        if self.adversary is None:
            return
        budget = self.ledger.adv_budget - self.ledger.adv_round
        envs = self.adversary.act(self.adversary_view(), budget) or []
        for env in envs:
            if env.sender not in self.cfg.byzantine:
                raise ValueError(f"adversary forged sender {env.sender}")
            status = self.schedule_send(env)
            if status is SendStatus.REJECTED and self.cfg.strict:
                raise BudgetError("adversary exceeded its per-round budget")

    # -- synchronous driving ----------------------------------------------
    def start(self) -> None:
        if self._started:
            return
        self._started = True
        for v in sorted(self.procs):
            self.procs[v].on_start(self)
        if self.cfg.mode != ASYNC:
            for v in sorted(self.procs):
                self.procs[v].on_round(self.round, self)

    def advance_round(self) -> List[Envelope]:
        if self.cfg.mode == ASYNC:
            raise SchedulerError("advance_round needs a round-based mode")
        self.start()
        self._adversary_act()
        self._snapshot()
        self.ledger.close_round()
        self.round += 1
        self._drain_backlogs()
        due = self._due.pop(self.round, [])
        due.sort(key=lambda e: (e.receiver, e.eid))
        for env in due:
            self._deliver(env, self.round)
        for v in sorted(self.procs):
            self.procs[v].on_round(self.round, self)
        return due

    def _deliver(self, env: Envelope, when: int) -> None:
        self.ledger.receive(env.receiver, env.bit_size)
        if self.record_trace:
            key = "step" if self.cfg.mode == ASYNC else "round"
            self.trace.append({key: when, "sender": env.sender, "receiver": env.receiver,
                               "session": list(env.session), "tag": env.tag,
                               "payload": env.payload, "bits": env.bit_size})
        if env.receiver in self.cfg.byzantine:
            self.byz_history.append(env)
            self.byz_inbox.append(env)
            return
        proc = self.procs.get(env.receiver)
        if proc is not None:
            proc.on_message(env, self)

    def idle(self) -> bool:
        return not self._due and not self._backlog and not self._pending

    def run_rounds(self, max_rounds: int, until_idle: bool = True, min_rounds: int = 0) -> int:
        """Advance until quiescent (after ``min_rounds``) or ``max_rounds``."""
        self.start()
        for _ in range(max_rounds):
            if until_idle and self.round >= min_rounds and self.idle():
                break
            self.advance_round()
        return self.round

    # -- asynchronous driving ---------------------------------------------
    def run_async(self, policy: Callable[[List[Envelope], random.Random], int],
                  max_steps: int = 10 ** 7) -> List[dict]:
        if self.cfg.mode != ASYNC:
            raise SchedulerError("run_async needs asynchronous mode")
        self.start()
        bound = self.cfg.fairness_bound
        while self.step < max_steps:
            self._adversary_act()
            if not self._pending:
                break
            self.step += 1
            overdue = min(self._pending.items(), key=lambda kv: kv[1][1])
            if self.step - overdue[1][1] >= bound:
                eid = overdue[0]
            else:
                pend = [e for e, _ in self._pending.values()]
                eid = policy(pend, self.rng)
                if eid not in self._pending:
                    raise SchedulerError(f"policy chose unknown envelope {eid}")
            env, _ = self._pending.pop(eid)
            self._deliver(env, self.step)
            self._snapshot()
        return self.trace

    # -- reporting -----------------------------------------------------------
    def collect_metrics(self) -> RunMetrics:
        led = self.ledger
        hmax = max(led.max_round_bits, max(led.round_bits, default=0))
        rmax = max(led.max_round_recv, max(led.round_recv, default=0))
        return RunMetrics(rounds=self.round, steps=self.step,
                          messages=list(led.messages), bits=list(led.bits),
                          max_round_bits=hmax, max_round_received_bits=rmax,
                          adversary_bits=led.adv_total,
                          adversary_max_round_bits=max(led.adv_max_round, led.adv_round))

    def trace_jsonl(self) -> str:
        lines = [json.dumps(r, sort_keys=True, default=str) for r in self.trace]
        lines += [json.dumps(r, sort_keys=True, default=str) for r in self.events]
        return "\n".join(lines) + ("\n" if lines else "")


# -- scheduler policies ------------------------------------------------------

def fifo_policy(pending: List[Envelope], rng: random.Random) -> int:
    return min(e.eid for e in pending)


def random_policy(pending: List[Envelope], rng: random.Random) -> int:
    return pending[rng.randrange(len(pending))].eid


def starve_policy(victim: Callable[[Envelope], bool]):
    """Deliver anything except envelopes matching ``victim`` while possible."""

    def pick(pending: List[Envelope], rng: random.Random) -> int:
        others = [e for e in pending if not victim(e)]
        pool = others or pending
        return pool[rng.randrange(len(pool))].eid

    return pick


def adversarial_policy(seed: int, n: int):
    """Seeded policy family: random per-node and per-tag priorities, LIFO bias."""
    r = random.Random(seed)
    node_prio = [r.random() for _ in range(n)]
    tag_prio = {}
    lifo = r.random() < 0.5

    def pick(pending: List[Envelope], rng: random.Random) -> int:
        def score(e: Envelope):
            tp = tag_prio.setdefault(e.tag, r.random())
            return (node_prio[e.receiver] + tp + 0.1 * rng.random(), -e.eid if lifo else e.eid)

        return min(pending, key=score).eid

    return pick
