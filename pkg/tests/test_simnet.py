import random

import pytest
from hypothesis import given, settings, strategies as st

from bftw.simnet import (ASYNC, PSYNC, BudgetError, Envelope, Network, NetworkConfig, Process,
                         SchedulerError, SendStatus, fifo_policy, message_bits, random_policy,
                         starve_policy)

SIGMA = 64


class Recorder(Process):
    def __init__(self, v):
        super().__init__(v)
        self.got = []

    def on_message(self, env, net):
        self.got.append((net.step if net.cfg.mode == ASYNC else net.round, env.sender, env.payload))


class Echo(Recorder):
    """Replies once to every message from node 0."""

    def on_message(self, env, net):
        super().on_message(env, net)
        if env.sender == 0 and env.payload[0] == "ping":
            net.send(self.id, 0, ("s", 1), ("pong", self.id), 16)


def make(n=4, **kw):
    procs = {v: Recorder(v) for v in range(n) if v not in kw.get("byzantine", ())}
    cfg = NetworkConfig(n=n, sigma=SIGMA, **kw)
    return Network(cfg, procs), procs


def test_single_message_next_round():
    net, procs = make()
    assert net.send(0, 1, ("s", 1), ("m",), SIGMA) is SendStatus.ACCEPTED
    net.advance_round()
    assert procs[1].got == [(1, 0, ("m",))]
    m = net.collect_metrics()
    assert m.bits[0] == SIGMA and m.rounds == 1


def test_fifo_spillover():
    net, procs = make()
    st_ = [net.send(0, 1, ("s", 1), ("m", i), SIGMA) for i in range(3)]
    assert st_ == [SendStatus.ACCEPTED, SendStatus.DEFERRED, SendStatus.DEFERRED]
    net.run_rounds(10)
    assert procs[1].got == [(1, 0, ("m", 0)), (2, 0, ("m", 1)), (3, 0, ("m", 2))]
    assert all(h <= SIGMA for h, _ in net.ledger.history)


def test_adversary_pool_strict():
    # pool = floor(0.25 * 4 * 64) = 64 bits
    net, _ = make(b=0.25, byzantine={3})
    assert net.send(3, 0, ("s", 1), ("x",), 64) is SendStatus.ACCEPTED
    assert net.send(3, 1, ("s", 1), ("x",), 1) is SendStatus.REJECTED


def test_strict_adversary_raises():
    class Greedy:
        def act(self, view, budget):
            return [Envelope(3, 0, ("s", 1), ("x",), budget + 1)]

    net = Network(NetworkConfig(n=4, sigma=SIGMA, b=0.25, byzantine={3}), {}, adversary=Greedy())
    with pytest.raises(BudgetError):
        net.advance_round()


def test_forged_sender_rejected():
    class Forger:
        def act(self, view, budget):
            return [Envelope(0, 1, ("s", 1), ("x",), 1)]

    net = Network(NetworkConfig(n=4, sigma=SIGMA, b=0.25, byzantine={3}), {}, adversary=Forger())
    with pytest.raises(ValueError):
        net.advance_round()


def test_empty_round():
    net, _ = make()
    assert net.advance_round() == []
    assert net.round == 1


def test_receiver_order():
    net, _ = make()
    net.send(0, 3, ("s", 1), ("a",), 8)
    net.send(1, 2, ("s", 1), ("b",), 8)
    due = net.advance_round()
    assert [e.receiver for e in due] == [2, 3]


def test_psync_delay_replay():
    log = []

    def delay(env, rng):
        log.append(5)
        return 5

    procs = {v: Recorder(v) for v in range(2)}
    cfg = NetworkConfig(n=2, sigma=SIGMA, mode=PSYNC, stabilization=10, max_delay=8)
    net = Network(cfg, procs, delay_fn=delay)
    for _ in range(3):
        net.advance_round()
    net.send(0, 1, ("s", 1), ("m",), 8)
    net.run_rounds(20)
    assert procs[1].got == [(3 + log[0], 0, ("m",))]


def test_psync_after_stabilization_is_next_round():
    procs = {v: Recorder(v) for v in range(2)}
    cfg = NetworkConfig(n=2, sigma=SIGMA, mode=PSYNC, stabilization=2, max_delay=8)
    net = Network(cfg, procs)
    for _ in range(2):
        net.advance_round()
    net.send(0, 1, ("s", 1), ("m",), 8)
    net.advance_round()
    assert procs[1].got == [(3, 0, ("m",))]


def test_async_single_message():
    procs = {v: Recorder(v) for v in range(2)}
    net = Network(NetworkConfig(n=2, sigma=SIGMA, mode=ASYNC), procs)
    net.send(0, 1, ("s", 1), ("m",), 8)
    net.run_async(starve_policy(lambda e: True))
    assert procs[1].got == [(1, 0, ("m",))]


def test_async_fairness_bound():
    procs = {v: Echo(v) for v in range(3)}
    cfg = NetworkConfig(n=3, sigma=SIGMA, mode=ASYNC, fairness_bound=5)
    net = Network(cfg, procs)
    net.send(0, 1, ("s", 1), ("victim",), 8)
    for i in range(20):
        net.send(2, 1, ("s", 1), ("noise", i), 8)
    net.run_async(starve_policy(lambda e: e.payload[0] == "victim"))
    step = next(s for s, _, p in procs[1].got if p[0] == "victim")
    assert step == 5


def test_async_unknown_envelope():
    net = Network(NetworkConfig(n=2, sigma=SIGMA, mode=ASYNC), {v: Recorder(v) for v in range(2)})
    net.send(0, 1, ("s", 1), ("m",), 8)
    with pytest.raises(SchedulerError):
        net.run_async(lambda pend, rng: 10 ** 9)


def test_mode_guards():
    net, _ = make()
    with pytest.raises(SchedulerError):
        net.run_async(fifo_policy)
    anet = Network(NetworkConfig(n=2, sigma=SIGMA, mode=ASYNC), {})
    with pytest.raises(SchedulerError):
        anet.advance_round()


def _async_trace(seed):
    procs = {v: Echo(v) for v in range(5)}
    net = Network(NetworkConfig(n=5, sigma=SIGMA, mode=ASYNC, seed=seed), procs)
    for r in range(1, 5):
        net.send(0, r, ("s", 1), ("ping",), 8)
    net.run_async(random_policy)
    return net.trace_jsonl()


def test_async_random_policy_reproducible():
    assert _async_trace(7) == _async_trace(7)
    assert _async_trace(7) != _async_trace(8)


def test_zero_activity_metrics():
    net, _ = make()
    net.run_rounds(5)
    m = net.collect_metrics()
    assert m.max_messages == 0 and m.max_bits == 0 and m.adversary_bits == 0


def test_message_bits_rule():
    # 8-bit tag, ids of ceil(log2 16) = 4 bits
    assert message_bits(16) == 8
    assert message_bits(16, ids=2) == 16
    assert message_bits(16, sets=[3]) == 20
    assert message_bits(16, ids=1, value_bits=5) == 17


def test_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(n=3, sigma=1, byzantine={3})
    with pytest.raises(ValueError):
        NetworkConfig(n=3, sigma=1, mode="eventually")


sends = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(1, 3 * SIGMA),
                           st.integers(0, 4)), max_size=40)


@settings(max_examples=60, deadline=None)
@given(sends)
def test_budget_and_exactly_once(items):
    net, procs = make()
    by_round = {}
    for s, r, bits, rnd in items:
        by_round.setdefault(rnd, []).append((s, r, bits))
    uid = 0
    for rnd in range(5):
        for s, r, bits in by_round.get(rnd, []):
            net.send(s, r, ("s", 1), ("m", uid), bits)
            uid += 1
        net.advance_round()
    net.run_rounds(10 * len(items) + 5)
    got = sorted(p[1] for v in procs for _, _, p in procs[v].got)
    assert got == list(range(uid))
    assert all(h <= SIGMA for h, _ in net.ledger.history)
    m = net.collect_metrics()
    assert m.max_round_bits <= SIGMA


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 8))
def test_async_exactly_once_within_bound(seed, bound):
    procs = {v: Echo(v) for v in range(4)}
    cfg = NetworkConfig(n=4, sigma=SIGMA, mode=ASYNC, seed=seed, fairness_bound=bound)
    net = Network(cfg, procs)
    for r in range(1, 4):
        net.send(0, r, ("s", 1), ("ping",), 8)
    net.run_async(random_policy)
    assert len(net.trace) == 6
    assert sorted(x[2][1] for x in procs[0].got) == [1, 2, 3]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 20))
def test_adversary_pool_never_exceeded(seed, per_round):
    rng = random.Random(seed)

    class Spammer:
        def act(self, view, budget):
            return [Envelope(3, rng.randrange(3), ("s", 1), ("x",), rng.randint(1, 40))
                    for _ in range(per_round)]

    cfg = NetworkConfig(n=4, sigma=SIGMA, b=0.25, byzantine={3}, strict=False, seed=seed)
    net = Network(cfg, {v: Recorder(v) for v in range(3)}, adversary=Spammer())
    for _ in range(6):
        net.advance_round()
    assert all(a <= 64 for _, a in net.ledger.history)
