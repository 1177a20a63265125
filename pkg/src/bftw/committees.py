"""Witness-committee pre-computation.

Phase A: every node joins gamma random committees and announces it.
Phase B: committee cores agree on whether a committee has enough support.
Phase C: every node samples peers and assembles its final local view.

Honest behaviour is simulated in matrix form: honest announcements are
broadcast to everybody, so the honest part of A_uv is the same at every
receiver and only Byzantine additions differ per view. Bandwidth is charged
per node through the engine's ledger at sigma bits per round.
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .adversary import Silent, Strategy, budget_for_round
from .params import ProtocolParams, TAG_BITS, id_bits
from .simnet import BandwidthLedger

log = logging.getLogger(__name__)

EMPTY: FrozenSet[int] = frozenset()


@dataclass(frozen=True)
class MembershipSample:
    owner: int
    sampled: FrozenSet[int]


@dataclass(frozen=True)
class CommitteeView:
    phase: str
    owner_of_view: int
    subject: int
    members: FrozenSet[int]


# -- phase-king -----------------------------------------------------------------
# Three rounds per phase; thresholds are local to each participant's view, so
# views that differ only in Byzantine members still agree once an honest king
# speaks.

def local_fault_bound(n_loc: int) -> int:
    return max(0, (n_loc - 1) // 3)


def pk_propose(counts: Mapping[int, int], n_loc: int, t_loc: int) -> Optional[int]:
    for x in (0, 1):
        if counts.get(x, 0) >= n_loc - t_loc:
            return x
    return None


def pk_adopt(counts: Mapping[int, int], n_loc: int, t_loc: int, val: int) -> Tuple[int, bool]:
    best = max((0, 1), key=lambda x: (counts.get(x, 0), -x))
    c = counts.get(best, 0)
    if c > t_loc:
        val = best
    return val, c >= n_loc - t_loc


def pk_king(val: int, strong: bool, king_val: Optional[int]) -> int:
    if strong or king_val is None:
        return val
    return king_val


@dataclass
class PhaseKingResult:
    outputs: Dict[int, int]
    messages: Dict[int, int]
    phases: int


def phase_king(views: Mapping[int, FrozenSet[int]], inputs: Mapping[int, int],
               kings: Sequence[int], byz_msg: Optional[Callable] = None,
               byzantine: Iterable[int] = ()) -> PhaseKingResult:
    """Run phase-king among the honest participants in ``views``.

    ``byz_msg(phase, step, sender, receiver)`` gives a Byzantine sender's
    message (0, 1, or None for no message / no proposal).
    """
    byz = set(byzantine)
    parts = sorted(views)
    vals = {v: int(inputs[v]) for v in parts}
    sent = {v: 0 for v in parts}
    byz_in = {w: sorted(x for x in views[w] if x in byz) for w in parts}
    hon_in = {w: [x for x in parts if x in views[w]] for w in parts}
    full = {w: len(hon_in[w]) == len(parts) for w in parts}
    nloc = {w: len(views[w]) for w in parts}
    tloc = {w: local_fault_bound(nloc[w]) for w in parts}

    def tally(msgs, w, phase, step):
        if full[w]:
            c = Counter(msgs.values())
        else:
            c = Counter(msgs[x] for x in hon_in[w])
        c.pop(None, None)
        if byz_msg is not None:
            for b in byz_in[w]:
                m = byz_msg(phase, step, b, w)
                if m is not None:
                    c[m] += 1
        return c

    for phase, king in enumerate(kings):
        for v in parts:
            sent[v] += 2 * nloc[v]
        props = {}
        for w in parts:
            props[w] = pk_propose(tally(vals, w, phase, 1), nloc[w], tloc[w])
        strong = {}
        for w in parts:
            vals[w], strong[w] = pk_adopt(tally(props, w, phase, 2), nloc[w], tloc[w], vals[w])
        if king in vals:
            sent[king] += nloc[king]
        new = {}
        for w in parts:
            kv = None
            if king in views[w]:
                if king in vals:
                    kv = vals[king]
                elif king in byz and byz_msg is not None:
                    kv = byz_msg(phase, 3, king, w)
            new[w] = pk_king(vals[w], strong[w], kv)
        vals = new
    return PhaseKingResult(outputs=vals, messages=sent, phases=len(kings))


def core_consensus(participants_view: Mapping[int, FrozenSet[int]], input_bits: Mapping[int, int],
                   byzantine: Iterable[int] = (), byz_msg=None, kings=None) -> Dict[int, int]:
    """Deterministic consensus among committee members; returns each honest output."""
    byzantine = set(byzantine)
    if kings is None:
        everyone = sorted(set().union(*participants_view.values())) if participants_view else []
        f = max((local_fault_bound(len(v)) for v in participants_view.values()), default=0)
        kings = everyone[: f + 1]
    return phase_king(participants_view, input_bits, kings, byz_msg, byzantine).outputs


# -- engine for the vectorized phases ----------------------------------------

class CommitteeNet:
    """Shared state for one pre-computation run."""

    def __init__(self, params: ProtocolParams, byzantine: Iterable[int] = (),
                 strategy: Optional[Strategy] = None, seed: int = 0):
        self.params = params
        self.n = params.n
        self.byz = frozenset(byzantine)
        if len(self.byz) > params.t:
            raise ValueError(f"{len(self.byz)} byzantine nodes exceed t={params.t}")
        self.honest = np.array([v for v in range(self.n) if v not in self.byz], dtype=int)
        self.is_honest = np.ones(self.n, dtype=bool)
        self.is_honest[list(self.byz)] = False
        self.strategy = strategy or Silent(sorted(self.byz), seed)
        self.replay = self.strategy.name == "honest-replay"
        self.actors = np.arange(self.n) if self.replay else self.honest
        self.is_actor = np.ones(self.n, dtype=bool) if self.replay else self.is_honest.copy()
        self.seed = seed
        ss = np.random.SeedSequence(seed)
        self.rng_a, self.rng_b, self.rng_c = [np.random.default_rng(s) for s in ss.spawn(3)]
        self.ledger = BandwidthLedger(self.n, params.sigma,
                                      budget_for_round(params.b, self.n, params.sigma))
        self.round = 0
        self.phase_rounds: Dict[str, int] = {}
        self.idb = id_bits(self.n)

    def charge_phase(self, name: str, msgs: np.ndarray, bits: np.ndarray, extra_rounds: int = 0) -> int:
        rounds = 0
        for v in self.actors:
            rounds = max(rounds, self.ledger.charge_bulk(int(v), int(msgs[v]), int(bits[v])))
        rounds += extra_rounds
        self.phase_rounds[name] = rounds
        self.round += rounds
        return rounds


@dataclass
class PhaseContext:
    """What a strategy may see: honest samples become visible one round late."""
    n: int
    t: int
    beta: int
    gamma: int
    rounds: int
    budget_bits: int
    msg_bits: int
    honest: Sequence[int]
    byzantine: FrozenSet[int]
    member: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def invalid_threshold(self) -> float:
        return 5 * self.beta / 4

    def view_core_sizes(self) -> np.ndarray:
        return self.member[np.asarray(self.honest)].sum(axis=0)

    def core(self, u: int) -> FrozenSet[int]:
        col = self.member[:, u]
        return frozenset(int(w) for w in np.asarray(self.honest) if col[w])


# -- phase A ----------------------------------------------------------------------

@dataclass
class PhaseAResult:
    n: int
    beta: int
    member: np.ndarray           # member[w, u]: w announced joining u's committee
    base: List[FrozenSet[int]]   # announcers of u heard by everybody
    extras: Dict[Tuple[int, int], FrozenSet[int]]  # forged members per (u, v)
    nonempty: np.ndarray         # nonempty[u, v]
    size: np.ndarray             # size[u, v] before the cut
    honest: np.ndarray
    samples: Dict[int, FrozenSet[int]]
    rounds: int
    forged_messages: int
    invalidated_pairs: int

    def members(self, u: int, v: int) -> FrozenSet[int]:
        if not self.nonempty[u, v]:
            return EMPTY
        ex = self.extras.get((u, v))
        return self.base[u] | ex if ex else self.base[u]

    def view(self, u: int, v: int) -> CommitteeView:
        return CommitteeView("A", v, u, self.members(u, v))

    def views(self) -> Dict[Tuple[int, int], CommitteeView]:
        return {(u, int(v)): self.view(u, int(v)) for u in range(self.n) for v in self.honest}

    def support(self, u: int) -> FrozenSet[int]:
        row = self.nonempty[u]
        return frozenset(int(v) for v in self.honest if row[v])


def _member_matrix(net: CommitteeNet) -> Tuple[np.ndarray, Dict[int, FrozenSet[int]]]:
    n, g = net.n, net.params.gamma
    member = np.zeros((n, n), dtype=bool)
    samples = {}
    for v in net.actors:
        pick = net.rng_a.choice(n, size=g, replace=False)
        member[v, pick] = True
        samples[int(v)] = frozenset(int(x) for x in pick)
    return member, samples


def phase_a(net: CommitteeNet) -> PhaseAResult:
    p = net.params
    n, beta = p.n, p.beta
    member, samples = _member_matrix(net)
    w = TAG_BITS + net.idb
    rounds = -(-p.gamma * n * w // p.sigma)
    ctx = PhaseContext(n=n, t=p.t, beta=beta, gamma=p.gamma, rounds=rounds,
                       budget_bits=net.ledger.adv_budget, msg_bits=w,
                       honest=[int(x) for x in net.honest], byzantine=net.byz, member=member)
    base = [frozenset(np.flatnonzero(member[:, u]).tolist()) for u in range(n)]
    base_size = member.sum(axis=0)
    size = np.repeat(base_size[:, None], n, axis=1)
    extras: Dict[Tuple[int, int], FrozenSet[int]] = {}
    forged = 0
    per_round = np.zeros(rounds, dtype=np.int64)
    for rnds, senders, vs, us in net.strategy.phase_a(ctx):
        rnds, senders, vs, us = (np.asarray(a, dtype=np.int64) for a in (rnds, senders, vs, us))
        if np.any(~np.isin(senders, list(net.byz))):
            raise ValueError("forged announcement from a non-byzantine sender")
        late = rnds >= rounds
        keep = ~late
        np.add.at(per_round, rnds[keep], w)
        forged += int(keep.sum())
        rnds, senders, vs, us = rnds[keep], senders[keep], vs[keep], us[keep]
        key = np.unique((us * n + vs) * n + senders)
        uu, rem = np.divmod(key, n * n)
        vv, ss = np.divmod(rem, n)
        grouped: Dict[Tuple[int, int], set] = {}
        for a, b, c in zip(uu.tolist(), vv.tolist(), ss.tolist()):
            if member[c, a]:
                continue
            grouped.setdefault((a, b), set()).add(c)
        for k, s in grouped.items():
            merged = extras.get(k, EMPTY) | s
            extras[k] = frozenset(merged)
    net.ledger.charge_adversary_bulk(per_round.tolist())
    for (u, v), s in extras.items():
        size[u, v] = base_size[u] + len(s)
    nonempty = (size > 0) & (4 * size < 5 * beta)
    nonempty[:, ~net.is_actor] = False
    honest_cut = 4 * base_size >= 5 * beta
    inval = 0
    for (u, v), s in extras.items():
        if net.is_honest[v] and base_size[u] > 0 and not honest_cut[u] and not nonempty[u, v]:
            inval += 1
    msgs = np.zeros(n, dtype=np.int64)
    msgs[net.actors] = p.gamma * n
    net.charge_phase("A", msgs, msgs * w)
    return PhaseAResult(n=n, beta=beta, member=member, base=base, extras=extras,
                        nonempty=nonempty, size=size, honest=net.honest, samples=samples,
                        rounds=rounds, forged_messages=forged, invalidated_pairs=inval)


def common_core(a: PhaseAResult) -> Dict[int, FrozenSet[int]]:
    """Honest core of each committee, computed as a union and as an intersection."""
    n = a.n
    honest = a.honest
    hmask = np.zeros(n, dtype=bool)
    hmask[honest] = True
    cores = {}
    nz_count = a.nonempty[:, honest].sum(axis=1)
    for u in range(n):
        k = int(nz_count[u])
        if k == 0:
            cores[u] = EMPTY
            continue
        hits = Counter()
        for v in honest[a.nonempty[u, honest]]:
            hits.update(x for x in a.members(u, int(v)) if hmask[x])
        union = frozenset(x for x, c in hits.items())
        inter = frozenset(x for x, c in hits.items() if c == k)
        if union != inter:
            raise AssertionError(f"core mismatch for u={u}: union and intersection differ")
        cores[u] = union
    return cores


# -- phase B ----------------------------------------------------------------------

def _threshold_select(counts: Mapping[int, int], s_u: int, t: int) -> FrozenSet[int]:
    if s_u <= 4 * t:
        return EMPTY
    return frozenset(x for x, c in counts.items() if c >= s_u - t)


def compute_b_prime(supported_views: Iterable[Iterable[int]], s_u: int, t: int) -> FrozenSet[int]:
    """Members listed by at least s_u - t received views; empty when s_u <= 4t."""
    counts = Counter()
    for view in supported_views:
        counts.update(set(view))
    return _threshold_select(counts, s_u, t)


@dataclass
class PhaseBResult:
    a: PhaseAResult
    s: Dict[Tuple[int, int], int]              # s[u] at honest member w
    bits: Dict[Tuple[int, int], int]           # b_uw after consensus
    bits_before: Dict[Tuple[int, int], int]
    b_prime: Dict[Tuple[int, int], FrozenSet[int]]
    valid: np.ndarray                          # valid[u, v]: B_uv = A_uv
    consensus_subjects: List[int]
    consensus_messages: int
    rounds: int

    def members(self, u: int, v: int) -> FrozenSet[int]:
        return self.a.members(u, v) if self.valid[u, v] else EMPTY

    def view(self, u: int, v: int) -> CommitteeView:
        return CommitteeView("B", v, u, self.members(u, v))

    def views(self) -> Dict[Tuple[int, int], CommitteeView]:
        return {(u, int(v)): self.view(u, int(v)) for u in range(self.a.n) for v in self.a.honest}


def phase_b(net: CommitteeNet, a: PhaseAResult) -> PhaseBResult:
    p = net.params
    n, t, beta = p.n, p.t, p.beta
    strat = net.strategy
    ctx = PhaseContext(n=n, t=t, beta=beta, gamma=p.gamma, rounds=0,
                       budget_bits=net.ledger.adv_budget, msg_bits=TAG_BITS + 2 * net.idb,
                       honest=[int(x) for x in net.honest], byzantine=net.byz, member=a.member,
                       extra={"phase_a": a})
    byz_support: Dict[Tuple[int, int], List[Tuple[int, FrozenSet[int]]]] = {}
    seen = set()
    for b, w, u, claimed in strat.phase_b_support(ctx):
        if b not in net.byz:
            raise ValueError("support forged from a non-byzantine sender")
        if (b, w, u) in seen:
            continue
        seen.add((b, w, u))
        byz_support.setdefault((u, w), []).append((b, frozenset(claimed)))
    supporters = a.nonempty  # supporters[u, v]
    n_sup = supporters[:, net.actors].sum(axis=1)

    s: Dict[Tuple[int, int], int] = {}
    bits: Dict[Tuple[int, int], int] = {}
    bprime: Dict[Tuple[int, int], FrozenSet[int]] = {}
    window: Dict[int, List[int]] = {}
    honest_counts: Dict[int, Counter] = {}

    def counts_for(u):
        if u not in honest_counts:
            c = Counter({x: int(n_sup[u]) for x in a.base[u]})
            for v in net.actors[supporters[u, net.actors]]:
                for x in a.extras.get((u, int(v)), ()):
                    c[x] += 1
            honest_counts[u] = c
        return honest_counts[u]

    for w in net.actors:
        w = int(w)
        for u in np.flatnonzero(a.member[w]).tolist():
            extra = byz_support.get((u, w), [])
            su = int(n_sup[u]) + len(extra)
            s[(u, w)] = su
            bits[(u, w)] = 1 if 3 * su >= n + 3 * t else 0
            if 3 * su >= n and 3 * su < n + 6 * t:
                window.setdefault(u, []).append(w)
    bits_before = dict(bits)

    def b_prime_for(u, w):
        su = s[(u, w)]
        c = counts_for(u)
        extra = byz_support.get((u, w), [])
        if extra:
            c = c.copy()
            for _, claimed in extra:
                c.update(claimed)
        return _threshold_select(c, su, t)

    cons_msgs = 0
    cons_rounds = 0
    for u in sorted(window):
        # every member holding u in its sample joins; only window members adopt the output
        parts = [int(w) for w in net.actors if a.member[w, u] and s[(u, int(w))] > 4 * t]
        views = {}
        for w in parts:
            bp = b_prime_for(u, w)
            bprime[(u, w)] = bp
            if bp:
                views[w] = bp
        if not views:
            continue
        res = phase_king(views, {w: bits[(u, w)] for w in views}, kings=range(n),
                         byz_msg=lambda ph, st, snd, rcv, _u=u: strat.king_value(_u, ph, st, snd, rcv),
                         byzantine=net.byz)
        for w in window[u]:
            if w in res.outputs:
                bits[(u, w)] = res.outputs[w]
        cons_msgs += sum(res.messages.values())
        cons_rounds = max(cons_rounds, 3 * res.phases)

    # validity votes: honest w sends <valid, u, b_uw> to everybody for u in M_w
    yes = np.zeros((n, n), dtype=bool)  # yes[u, x]: x voted 1 for u (to all)
    for (u, w), bit in bits.items():
        if bit:
            yes[u, w] = True
    byz_yes: Dict[Tuple[int, int], set] = {}
    for b, v, u, bit in strat.phase_b_valid(ctx):
        if b not in net.byz:
            raise ValueError("validity vote from a non-byzantine sender")
        if bit:
            byz_yes.setdefault((u, v), set()).add(b)
    valid = np.zeros((n, n), dtype=bool)
    for u in range(n):
        base_yes = sum(1 for x in a.base[u] if yes[u, x])
        for v in net.actors[a.nonempty[u, net.actors]]:
            v = int(v)
            cnt = base_yes
            ex = a.extras.get((u, v))
            by = byz_yes.get((u, v))
            if ex and by:
                cnt += len(ex & by)
            if by:
                cnt += sum(1 for x in a.base[u] if x in by and not yes[u, x])
            valid[u, v] = cnt >= beta

    # bandwidth: supports, consensus (super-rounds of gamma engine rounds), votes
    msgs = np.zeros(n, dtype=np.int64)
    bitsum = np.zeros(n, dtype=np.int64)
    for v in net.actors:
        row = a.nonempty[:, v]
        sz = a.size[row, v]
        msgs[v] += int(sz.sum()) + p.gamma * n
        bitsum[v] += int((sz * (TAG_BITS + net.idb + sz * net.idb)).sum())
        bitsum[v] += p.gamma * n * (TAG_BITS + net.idb + 1)
    rounds = net.charge_phase("B", msgs, bitsum, extra_rounds=cons_rounds * p.gamma)
    return PhaseBResult(a=a, s=s, bits=bits, bits_before=bits_before, b_prime=bprime, valid=valid,
                        consensus_subjects=sorted(window), consensus_messages=cons_msgs,
                        rounds=rounds)


# -- phase C ----------------------------------------------------------------------

@dataclass
class PhaseCStats:
    r: np.ndarray          # r[u, v] for actors v
    filtered: int          # (requester, responder) pairs dropped by the 2*zeta rule
    rounds: int


def phase_c(net: CommitteeNet, b: PhaseBResult) -> "WitnessSystem":
    p = net.params
    n, beta, zeta = p.n, p.beta, p.zeta
    a = b.a
    prob = min(1.0, zeta / n)
    actors = net.actors
    byz = sorted(net.byz)
    bidx = {x: j for j, x in enumerate(byz)}
    # honest responder content: B_uw, accepted iff beta <= |B| < 5 beta / 4
    bsize = np.where(b.valid, a.size, 0)
    ok = b.valid & (bsize >= beta) & (4 * bsize < 5 * beta)
    ext = np.zeros((n, n, max(1, len(byz))), dtype=bool)  # ext[u, w, j]
    for (u, w), s in a.extras.items():
        if ok[u, w]:
            for x in s:
                ext[u, w, bidx[x]] = True

    ctx = PhaseContext(n=n, t=p.t, beta=beta, gamma=p.gamma, rounds=0,
                       budget_bits=net.ledger.adv_budget, msg_bits=TAG_BITS + net.idb,
                       honest=[int(x) for x in net.honest], byzantine=net.byz, member=a.member,
                       extra={"phase_b": b})
    byz_req = Counter()
    for snd, rcv, u in net.strategy.phase_c_requests(ctx):
        byz_req[(snd, rcv)] += 1
    byz_resp: Dict[Tuple[int, int], List[Tuple[int, FrozenSet[int]]]] = {}
    for snd, rcv, u, members in net.strategy.phase_c_responses(ctx):
        if snd not in net.byz:
            raise ValueError("response forged from a non-byzantine sender")
        byz_resp.setdefault((u, rcv), []).append((snd, frozenset(members)))

    okf = ok.astype(np.int32)
    extf = ext.astype(np.int32)
    r = np.zeros((n, n), dtype=np.int64)       # r[v, u] from honest-acting responders
    cnt = np.zeros((n, n, ext.shape[2]), dtype=np.int64)
    req_msgs = np.zeros(n, dtype=np.int64)
    resp_msgs = np.zeros(n, dtype=np.int64)
    resp_bits = np.zeros(n, dtype=np.int64)
    filtered = 0
    asked: Dict[int, np.ndarray] = {}
    full = prob >= 1.0
    for v in actors:
        v = int(v)
        if full:
            N = np.ones((n, n), dtype=bool)
        else:
            N = net.rng_c.random((n, n)) < prob   # N[u, w]
        per_w = N.sum(axis=0)
        drop = per_w >= 2 * zeta
        filtered += int(drop.sum())
        req_msgs[v] = int(N.sum())
        Nf = N & ~drop[None, :]
        Nf[:, ~net.is_actor] = False
        resp_msgs += Nf.sum(axis=0)
        resp_bits += (Nf * (TAG_BITS + net.idb + bsize * net.idb)).sum(axis=0)
        Ni = Nf.astype(np.int32)
        r[v] = (Ni * okf).sum(axis=1)
        if byz:
            cnt[v] = np.einsum("uw,uwj->uj", Ni, extf)
        asked[v] = N

    cores = common_core(a)
    views: Dict[int, Dict[int, FrozenSet[int]]] = {}
    r_total = np.zeros((n, n), dtype=np.int64)
    for u in range(n):
        cache: Dict[bytes, FrozenSet[int]] = {}
        for v in actors:
            v = int(v)
            rv = int(r[v, u])
            inc = cnt[v, u] if byz else None
            resp = byz_resp.get((u, v))
            extra_counts = Counter()
            if resp:
                N = asked[v]
                for snd, members in resp:
                    if not N[u, snd]:
                        continue
                    if beta <= len(members) < 5 * beta / 4:
                        rv += 1
                        extra_counts.update(members)
            r_total[u, v] = rv
            if 4 * rv <= zeta:
                continue
            thr16 = 16 * rv - zeta
            if not extra_counts:
                key = inc.tobytes() if byz else b""
                got = cache.get(key)
                if got is None:
                    hon = int(r[v, u])
                    mem = set(a.base[u]) if 16 * hon >= thr16 and a.base[u] else set()
                    if byz:
                        mem.update(byz[j] for j in np.flatnonzero(16 * inc >= thr16))
                    got = cache[key] = frozenset(mem) if mem != a.base[u] else a.base[u]
            else:
                c = Counter()
                hon = int(r[v, u])
                for x in a.base[u]:
                    c[x] += hon
                if byz:
                    for j in np.flatnonzero(inc):
                        c[byz[j]] += int(inc[j])
                c.update(extra_counts)
                got = frozenset(x for x, k in c.items() if 16 * k >= thr16)
            if got:
                views.setdefault(u, {})[v] = got

    msgs = req_msgs + resp_msgs
    bits = req_msgs * (TAG_BITS + net.idb) + resp_bits
    net.charge_phase("C", msgs, bits)
    supports = {u: a.support(u) for u in range(n)}
    ws = WitnessSystem(n=n, beta=beta, alpha=float(p.alpha), byzantine=net.byz, views=views,
                       params=p.to_dict(), cores=cores, supports=supports)
    ws.stats = {"r": r_total, "filtered": filtered}
    return ws


# -- witness systems ----------------------------------------------------------------

@dataclass
class WitnessSystem:
    n: int
    beta: int
    alpha: float
    byzantine: FrozenSet[int]
    views: Dict[int, Dict[int, FrozenSet[int]]]   # views[u][v], non-empty honest views only
    params: dict = field(default_factory=dict)
    cores: Optional[Dict[int, FrozenSet[int]]] = None
    supports: Optional[Dict[int, FrozenSet[int]]] = None
    stats: dict = field(default_factory=dict, repr=False)

    @property
    def honest(self) -> List[int]:
        return [v for v in range(self.n) if v not in self.byzantine]

    def view(self, u: int, v: int) -> FrozenSet[int]:
        return self.views.get(u, {}).get(v, EMPTY)

    def valid_subjects(self, v: int) -> List[int]:
        return sorted(u for u, per in self.views.items() if per.get(v))

    def to_json(self) -> str:
        views = []
        for u in sorted(self.views):
            for v in sorted(self.views[u]):
                views.append({"u": u, "v": v, "members": sorted(self.views[u][v])})
        doc = {"params": dict(self.params, n=self.n, beta=self.beta, alpha=self.alpha),
               "views": views, "byzantine_set": sorted(self.byzantine)}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WitnessSystem":
        doc = json.loads(text)
        prm = doc["params"]
        views: Dict[int, Dict[int, FrozenSet[int]]] = {}
        for rec in doc["views"]:
            if rec["members"]:
                views.setdefault(int(rec["u"]), {})[int(rec["v"])] = frozenset(rec["members"])
        return cls(n=int(prm["n"]), beta=int(prm["beta"]), alpha=float(prm.get("alpha", 1 / 6)),
                   byzantine=frozenset(doc.get("byzantine_set", [])), views=views, params=prm)


@dataclass
class VerificationReport:
    agreement: bool
    membership: bool
    availability: bool
    available: int
    required: float
    failures: List[dict]

    @property
    def ok(self) -> bool:
        return self.agreement and self.membership and self.availability

    def to_dict(self) -> dict:
        return {"agreement": self.agreement, "membership": self.membership,
                "availability": self.availability, "available": self.available,
                "required": self.required, "failures": self.failures[:20]}


def verify_witness_system(ws: WitnessSystem, params: Optional[ProtocolParams] = None,
                          max_failures: int = 50) -> VerificationReport:
    beta = params.beta if params else ws.beta
    alpha = float(params.alpha) if params else ws.alpha
    honest = ws.honest
    hset = set(honest)
    fails: List[dict] = []
    agree = member_ok = True
    load = Counter()
    available = 0
    for u in range(ws.n):
        per = ws.views.get(u, {})
        nz = [v for v in honest if per.get(v)]
        for v in nz:
            if 2 * len(per[v]) >= 3 * beta:
                member_ok = False
                if len(fails) < max_failures:
                    fails.append({"property": "membership", "u": u, "v": v,
                                  "detail": f"view size {len(per[v])} >= 3*beta/2"})
        if not nz:
            continue
        if u in hset:
            available += 1
        seen = set()
        for v in nz:
            seen.update(x for x in per[v] if x in hset)
        load.update(seen)
        if len(nz) < len(honest):
            agree = False
            miss = next(v for v in honest if not per.get(v))
            if len(fails) < max_failures:
                fails.append({"property": "agreement", "u": u, "v": miss,
                              "detail": "empty view while other honest views are not"})
            continue
        core = set.intersection(*(set(per[v]) for v in nz)) & hset
        if len(core) < beta:
            agree = False
            smallest = min(nz, key=lambda v: len(set(per[v]) & hset))
            if len(fails) < max_failures:
                fails.append({"property": "agreement", "u": u, "v": smallest,
                              "detail": f"shared honest core {len(core)} < beta"})
    for x, c in load.items():
        if c > 2 * beta:
            member_ok = False
            if len(fails) < max_failures:
                fails.append({"property": "membership", "u": None, "v": x,
                              "detail": f"member of {c} > 2*beta committees"})
    need = alpha * ws.n
    return VerificationReport(agreement=agree, membership=member_ok,
                              availability=available >= need - 1e-9, available=available,
                              required=need, failures=fails)


# -- ground-truth checks ----------------------------------------------------------

def phase_b_trichotomy(b: PhaseBResult, params: ProtocolParams) -> dict:
    """Classify each subject by |S_u| and check the Phase-B outcome.

    The claims hold on the event that u's honest core has at least beta
    members; subjects outside that event are counted separately.
    """
    a = b.a
    n, t, beta = params.n, params.t, params.beta
    honest = a.honest
    out = {"high": 0, "low": 0, "mid": 0, "exceptions": [], "premise_misses": []}
    cores = common_core(a)
    for u in range(n):
        S = a.support(u)
        k = len(S)
        B_eq_A = all(b.valid[u, v] or not a.nonempty[u, v] for v in honest)
        B_empty = not any(b.valid[u, v] for v in honest)
        if 3 * k >= n + 3 * t:
            branch, ok = "high", B_eq_A
        elif 3 * k < n:
            branch, ok = "low", B_empty
        else:
            branch, ok = "mid", B_eq_A or B_empty
        out[branch] += 1
        if not ok:
            rec = {"u": u, "support": k, "branch": branch, "core": len(cores[u])}
            if cores[u] and len(cores[u]) < beta:
                out["premise_misses"].append(rec)
            else:
                out["exceptions"].append(rec)
    return out


def core_bits_consistent(b: PhaseBResult, params: ProtocolParams) -> List[int]:
    """Subjects whose core members ended Phase B with different bits."""
    bad = []
    groups: Dict[int, set] = {}
    for (u, w), bit in b.bits.items():
        if w in set(b.a.honest.tolist()):
            groups.setdefault(u, set()).add(bit)
    for u, vals in groups.items():
        if len(vals) > 1:
            bad.append(u)
    return sorted(bad)


@dataclass
class PipelineResult:
    a: PhaseAResult
    b: PhaseBResult
    ws: WitnessSystem
    report: VerificationReport
    net: CommitteeNet

    def summary(self) -> dict:
        p = self.net.params
        a = self.a
        sup = [len(a.support(u)) for u in range(p.n)]
        return {
            "verdict": self.report.to_dict(),
            "invalidated_pairs": a.invalidated_pairs,
            "invalidated_bound": 10 * p.b * p.n ** 2,
            "forged_messages": a.forged_messages,
            "support_ge_half": sum(1 for s in sup if 2 * s >= p.n),
            "consensus_subjects": len(self.b.consensus_subjects),
            "rounds": dict(self.net.phase_rounds, total=self.net.round),
            "max_node_messages": max(self.net.ledger.messages),
            "adversary_bits": self.net.ledger.adv_total,
            "in_asymptotic_regime": p.in_asymptotic_regime,
        }


def run_pipeline(params: ProtocolParams, byzantine: Iterable[int], strategy: Optional[Strategy] = None,
                 seed: int = 0) -> PipelineResult:
    net = CommitteeNet(params, byzantine, strategy, seed)
    a = phase_a(net)
    b = phase_b(net, a)
    ws = phase_c(net, b)
    return PipelineResult(a=a, b=b, ws=ws, report=verify_witness_system(ws, params), net=net)
