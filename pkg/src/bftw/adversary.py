"""Byzantine strategies under the bandwidth and lateness constraints.

A strategy sees an ``AdversaryView`` that only contains honest state from
rounds <= r - lateness. Inside the engine it is driven through ``act``; the
vectorized pre-computation phases call the ``phase_*`` hooks instead, which
receive a context carrying exactly the 1-late information.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .simnet import Envelope

STRATEGIES = ("silent", "flood", "equivocate", "count-skew", "coin-bias", "honest-replay")


def budget_for_round(b: float, n: int, sigma: int) -> int:
    """floor(b * n * sigma), computed exactly for rational-looking b."""
    fb = Fraction(b).limit_denominator(10 ** 9) if not isinstance(b, Fraction) else b
    return math.floor(fb * n * sigma)


@dataclass
class AdversaryConfig:
    byzantine: frozenset
    b: float = 0.0
    lateness: int = 1
    strategy: str = "silent"
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.byzantine = frozenset(self.byzantine)
        if not 0 <= self.b < 1:
            raise ValueError("b must lie in [0, 1)")
        if self.lateness < 0:
            raise ValueError("lateness must be >= 0")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass(frozen=True)
class AdversaryView:
    round: int
    lateness: int
    honest_snapshots: Dict[int, Dict[int, Any]]
    history: Tuple[Envelope, ...]
    n: int
    byzantine: frozenset
    inbox: Tuple[Envelope, ...] = ()

    def __post_init__(self):
        if self.honest_snapshots and max(self.honest_snapshots) > self.round - self.lateness:
            raise ValueError("view leaks honest state newer than round - lateness")

    def latest(self) -> Dict[int, Any]:
        if not self.honest_snapshots:
            return {}
        return self.honest_snapshots[max(self.honest_snapshots)]


class Strategy:
    name = "silent"

    def __init__(self, byzantine: Sequence[int], seed: int = 0, **options):
        self.byz = sorted(byzantine)
        self.seed = seed
        self.options = options
        self.rng = random.Random(seed)

    # engine-driven protocols
    def act(self, view: AdversaryView, budget: int) -> List[Envelope]:
        return []

    # vectorized pre-computation hooks; all default to silence
    def phase_a(self, ctx) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        return []

    def phase_b_support(self, ctx) -> List[Tuple[int, int, int, frozenset]]:
        return []

    def phase_b_valid(self, ctx) -> List[Tuple[int, int, int, int]]:
        return []

    def king_value(self, u: int, phase: int, step: int, sender: int, receiver: int) -> Optional[int]:
        return None

    def phase_c_requests(self, ctx) -> List[Tuple[int, int, int]]:
        return []

    def phase_c_responses(self, ctx) -> List[Tuple[int, int, int, frozenset]]:
        return []


class Silent(Strategy):
    name = "silent"


def _forge_round(byz, pairs, k, per_round, start):
    """Lay out k forged announcements per (u, v) pair, per_round at a time."""
    t = len(byz)
    us = np.repeat(pairs[:, 0], k)
    vs = np.repeat(pairs[:, 1], k)
    idx = np.arange(len(pairs) * k)
    senders = np.asarray(byz)[idx % t] if t else np.zeros(0, dtype=int)
    rounds = start + idx // max(1, per_round)
    return rounds, senders, vs, us


class FloodInvalidate(Strategy):
    """Push forged <member,u> announcements until A_uv reaches 5*beta/4.

    Pairs are taken in lexicographic (u, v) order. With ``feasible_only`` the
    strategy skips pairs it cannot break, using the honest samples it learns
    one round after they were drawn.
    """
    name = "flood"

    def phase_a(self, ctx):
        if not self.byz or ctx.budget_bits < ctx.msg_bits:
            return []
        per_round = ctx.budget_bits // ctx.msg_bits
        total = per_round * ctx.rounds
        k = math.ceil(ctx.beta / 8)
        cap = ctx.invalid_threshold
        distinct = min(k, len(self.byz))
        honest = np.asarray(ctx.honest)
        targets = self.options.get("targets")
        if targets is not None:
            pairs = np.asarray(sorted(targets), dtype=int).reshape(-1, 2)
        else:
            us = np.repeat(np.arange(ctx.n), len(honest))
            vs = np.tile(honest, ctx.n)
            pairs = np.stack([us, vs], axis=1)
            if self.options.get("feasible_only", True) and ctx.rounds > 1:
                # round tau is spent blind; later rounds see the samples
                blind = min(len(pairs), per_round // k)
                core = ctx.view_core_sizes()
                ok = (core[pairs[:, 0]] + distinct >= cap) & (core[pairs[:, 0]] < cap)
                ok[:blind] = True
                pairs = pairs[ok]
        pairs = pairs[: total // k]
        if len(pairs) == 0:
            return []
        return [_forge_round(self.byz, pairs, k, per_round, 0)]


class CountSkew(Strategy):
    """Drive ground-truth support into the consensus window and split s[u].

    Phase A removes u's committee from chosen honest views so that |S_u|
    lands on values around n/3, n/3+t and n/3+2t. Phase B then sends extra
    support to half of u's core, votes inconsistently as a king and as a
    forged member, and casts split validity votes.
    """
    name = "count-skew"

    def _plan(self, ctx):
        if hasattr(self, "_targets"):
            return self._targets
        n, t = ctx.n, len(self.byz)
        core = ctx.view_core_sizes()
        k = math.ceil(ctx.beta / 8)
        distinct = min(k, t)
        cap = ctx.invalid_threshold
        per_round = ctx.budget_bits // ctx.msg_bits if ctx.msg_bits else 0
        budget_msgs = per_round * ctx.rounds
        third = math.ceil(n / 3)
        levels = [third - 1, third, third + t - 1, third + t, third + 2 * t - 1, third + 2 * t]
        honest = list(ctx.honest)
        h = len(honest)
        rng = random.Random(self.seed)
        plan = {}
        used = 0
        li = 0
        for u in range(n):
            if not (core[u] + distinct >= cap and core[u] < cap):
                continue
            want = max(0, min(h, levels[li % len(levels)]))
            cost = (h - want) * k
            if used + cost > budget_msgs:
                break
            kill = rng.sample(honest, h - want)
            plan[u] = sorted(kill)
            used += cost
            li += 1
        self._targets = plan
        return plan

    def phase_a(self, ctx):
        if not self.byz or ctx.msg_bits > ctx.budget_bits:
            return []
        plan = self._plan(ctx)
        pairs = [(u, v) for u in sorted(plan) for v in plan[u]]
        if not pairs:
            return []
        k = math.ceil(ctx.beta / 8)
        per_round = ctx.budget_bits // ctx.msg_bits
        return [_forge_round(self.byz, np.asarray(pairs, dtype=int), k, per_round, 0)]

    def phase_b_support(self, ctx):
        out = []
        for u in sorted(self._targets if hasattr(self, "_targets") else ()):
            core = sorted(ctx.core(u))
            half = core[: len(core) // 2]
            claimed = frozenset(core) | frozenset(self.byz)
            for w in half:
                for b in self.byz:
                    out.append((b, w, u, claimed))
        return out

    def phase_b_valid(self, ctx):
        out = []
        honest = list(ctx.honest)
        for u in sorted(self._targets if hasattr(self, "_targets") else ()):
            for i, w in enumerate(honest):
                if i % 2 == 0:
                    for b in self.byz:
                        out.append((b, w, u, 1))
        return out

    def king_value(self, u, phase, step, sender, receiver):
        return (receiver + phase + step + sender) % 2


class Equivocate(Strategy):
    """Send one payload to the first half of a receiver list and another to the rest.

    ``splits`` is a list of (sender, receivers, session, payload_a, payload_b, bits).
    Each split is sent once, at the first opportunity.
    """
    name = "equivocate"

    def __init__(self, byzantine, seed=0, splits=(), **options):
        super().__init__(byzantine, seed, **options)
        self.splits = list(splits)
        self.done = False

    def act(self, view, budget):
        if self.done:
            return []
        self.done = True
        out = []
        for sender, receivers, session, pa, pb, bits in self.splits:
            rs = list(receivers)
            half = len(rs) // 2
            for i, r in enumerate(rs):
                out.append(Envelope(sender, r, session, pa if i < half else pb, bits))
        return out


class CoinBias(Strategy):
    """Try to force the XOR coin to ``target`` using whatever the view shows.

    ``commit`` builds the envelopes for one Byzantine commit; it is supplied
    by the protocol layer. The strategy commits once at round 0 (blind under
    lateness >= 1) and again later with the honest coins it has learned.
    """
    name = "coin-bias"

    def __init__(self, byzantine, seed=0, commit=None, k=1, target=0, late_round=1, **options):
        super().__init__(byzantine, seed, **options)
        self.commit = commit
        self.k = k
        self.target = target
        self.late_round = late_round
        self.sent_at = set()
        self.log: List[Tuple[int, int, int]] = []  # (round, node, value)

    def _guess(self, view):
        acc = 0
        for snap in view.latest().values():
            if snap and snap.get("coin") is not None:
                acc ^= snap["coin"]
        return acc

    def act(self, view, budget):
        if self.commit is None or not self.byz:
            return []
        r = view.round
        if r in self.sent_at or r not in (0, self.late_round):
            return []
        self.sent_at.add(r)
        seen = self._guess(view)
        out = []
        # first byzantine cancels what it sees; the rest commit zeros
        for i, b in enumerate(self.byz):
            val = (seen ^ self.target) if i == 0 else 0
            val &= (1 << self.k) - 1
            self.log.append((r, b, val))
            out.extend(self.commit(b, val, r))
        return out


class HonestReplay(Strategy):
    """Byzantine nodes run the honest state machine unchanged."""
    name = "honest-replay"

    def __init__(self, byzantine, seed=0, factory=None, **options):
        super().__init__(byzantine, seed, **options)
        self.factory = factory
        self.procs = {}
        self.seen = 0
        self.started = False

    def act(self, view, budget):
        if self.factory is None:
            return []
        cap = _Capture(view)
        if not self.started:
            self.started = True
            self.procs = {b: self.factory(b) for b in self.byz}
            for b in self.byz:
                self.procs[b].on_start(cap)
        for env in view.inbox[self.seen:]:
            proc = self.procs.get(env.receiver)
            if proc is not None:
                proc.on_message(env, cap)
        self.seen = len(view.inbox)
        return cap.out


class _Capture:
    """Minimal network stand-in that records sends."""

    def __init__(self, view):
        self.round = view.round
        self.step = view.round
        self.n = view.n
        self.out: List[Envelope] = []

    def send(self, sender, receiver, session, payload, bits):
        self.out.append(Envelope(sender, receiver, session, payload, bits))

    def emit(self, *a, **k):
        pass


def make_strategy(cfg: AdversaryConfig, seed: int = 0, **extra) -> Strategy:
    cls = {
        "silent": Silent,
        "flood": FloodInvalidate,
        "count-skew": CountSkew,
        "equivocate": Equivocate,
        "coin-bias": CoinBias,
        "honest-replay": HonestReplay,
    }[cfg.strategy]
    opts = dict(cfg.options)
    opts.update(extra)
    return cls(sorted(cfg.byzantine), seed=seed, **opts)
