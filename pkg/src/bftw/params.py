"""Parameter derivation and the tail-bound machinery used to size it.

Every count parameter of the pre-computation (gamma, beta, zeta) comes from
a closed formula in (n, t, c, lambda). Probabilities are handled in
log-space so that large security parameters do not underflow.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import List, Optional

TAG_BITS = 8

# Chernoff exponent constants. A bound of the form exp(-d * mu) with
# mu >= (1/d)(c ln n + lambda) fails with probability <= e^-(c ln n + lambda).
#
# Committee sizing uses an upper-tail deviation of 1/80 (exponent delta^2/3)
# and a lower-tail deviation of 1/10 (exponent delta^2/2):
#   min((1/80)^2 / 3, (1/10)^2 / 2) = min(1/19200, 1/200) = 1/19200
D_GAMMA = min(Fraction(1, 80) ** 2 / 3, Fraction(1, 10) ** 2 / 2)

# Response sampling bounds two counts whose means are zeta/24 and zeta/3:
#   Y >= (1 + 1/2) zeta/24  with exponent (1/2)^2 / 3 on mean zeta/24 -> 1/288
#   Z <= (1 - 1/4) zeta/3   with exponent (1/4)^2 / 2 on mean zeta/3  -> 1/96
D_ZETA = min(Fraction(1, 2) ** 2 / 3 * Fraction(1, 24),
             Fraction(1, 4) ** 2 / 2 * Fraction(1, 3))

DEFAULT_C = 1.0
DEFAULT_ALPHA = Fraction(1, 6)


def id_bits(n: int) -> int:
    """Bits needed to name one of n nodes."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def derive_sigma(n: int) -> int:
    """Polylog per-round budget: room for log^2 n member announcements."""
    w = TAG_BITS + id_bits(n)
    return w * id_bits(n) ** 2


def whc_exponent(n: float, c: float, lam: float) -> float:
    return c * math.log(n) + lam


def log_whc_failure_bound(mu: float) -> float:
    if mu < 0:
        raise ValueError("mu must be non-negative")
    return -mu


def whc_failure_bound(mu: float) -> float:
    """Failure probability e^-mu of an event whose exponent is mu."""
    return math.exp(log_whc_failure_bound(mu))


def log_chernoff_tail(mu: float, dev: float, tail: str) -> float:
    if mu < 0 or dev < 0:
        raise ValueError("mu and dev must be non-negative")
    if tail == "upper":
        return -min(dev, dev * dev) * mu / 3.0
    if tail == "lower":
        if dev > 1:
            raise ValueError("lower tail needs dev <= 1")
        return -dev * dev * mu / 2.0
    raise ValueError(f"unknown tail {tail!r}")


def chernoff_tail(mu: float, dev: float, tail: str) -> float:
    """Bound on P(X >= (1+dev)mu) or P(X <= (1-dev)mu) for i.i.d. sums."""
    return math.exp(log_chernoff_tail(mu, dev, tail))


def derive_beta(gamma: int, n: int, t: int) -> int:
    if not 0 <= t < n:
        raise ValueError(f"need 0 <= t < n, got t={t}, n={n}")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    # integer ceiling of 9*gamma*(n-t) / (10n)
    return -(-9 * gamma * (n - t) // (10 * n))


def _ceil(x: float) -> int:
    # guard against 10.000000000001 style noise from log
    r = round(x)
    if abs(x - r) < 1e-9 * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def derive_gamma(n: float, t: int, c: float = DEFAULT_C, lam: float = 0.0,
                 d: Fraction | float = D_GAMMA, sigma: Optional[int] = None) -> int:
    """Smallest gamma meeting the sampling lower bound.

    With ``sigma`` given, gamma is rounded up to a multiple of
    sigma/gcd(sigma, n) so that sigma divides n*gamma.
    """
    if 3 * t >= n:
        raise ValueError(f"need t < n/3, got t={t}, n={n}")
    raw = whc_exponent(n, c, lam) * n / ((n - t) * float(d))
    gamma = max(1, _ceil(raw))
    if sigma is not None:
        if not float(n).is_integer():
            raise ValueError("divisibility rounding needs integer n")
        step = sigma // math.gcd(int(sigma), int(n))
        gamma = -(-gamma // step) * step
    return gamma


def derive_zeta(n: float, t: int, c: float = DEFAULT_C, lam: float = 0.0,
                d: Fraction | float = D_ZETA) -> int:
    if 24 * t >= n:
        raise ValueError(f"need t < n/24, got t={t}, n={n}")
    mu = whc_exponent(n, c, lam)
    return max(1, _ceil(max(3.0 * mu, mu / float(d))))


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    t: int
    b: float
    sigma: int
    lam: float
    c: float
    gamma: int
    beta: int
    zeta: int
    delta: int
    alpha: float
    notes: tuple = field(default=(), compare=False)

    @property
    def honest_bandwidth(self) -> int:
        return self.n * self.sigma

    @property
    def in_asymptotic_regime(self) -> bool:
        return self.n >= 24 * max(1, self.t) and self.b <= 1 / 24

    def invariant_violations(self) -> List[str]:
        bad = []
        if self.beta != derive_beta(self.gamma, self.n, self.t):
            bad.append("beta does not match its formula")
        if 3 * self.t < self.n and not (self.gamma / 2 <= self.beta <= self.gamma):
            bad.append("beta outside [gamma/2, gamma]")
        if (self.n * self.gamma) % self.sigma:
            bad.append("sigma does not divide n*gamma")
        if self.delta < 1 / self.alpha + 1 - 1e-12:
            bad.append("delta below 1/alpha + 1")
        if self.delta > self.n:
            bad.append("delta above n")
        if not 0 <= self.b < 1:
            bad.append("b outside [0, 1)")
        return bad

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        d["honest_bandwidth"] = self.honest_bandwidth
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolParams":
        keys = {f for f in cls.__dataclass_fields__}
        kw = {k: v for k, v in d.items() if k in keys}
        kw["notes"] = tuple(kw.get("notes", ()))
        return cls(**kw)


def derive_params(n: int, t: int, b: float = 0.0, sigma: Optional[int] = None,
                  lam: float = 0.0, c: float = DEFAULT_C,
                  alpha: float = float(DEFAULT_ALPHA), gamma: Optional[int] = None,
                  zeta: Optional[int] = None, delta: Optional[int] = None) -> ProtocolParams:
    """Build a ProtocolParams, deriving whatever is not given explicitly.

    Formula values above n cannot be realized (a node samples at most n
    committees; a sampling probability cannot exceed 1), so derived gamma and
    zeta are capped at n and the cap is recorded in ``notes``.
    """
    notes = []
    if sigma is None:
        sigma = derive_sigma(n)
    if gamma is None:
        if 3 * t < n:
            gamma = derive_gamma(n, t, c, lam, sigma=sigma)
        else:
            gamma = n
            notes.append("gamma: t >= n/3, formula undefined; using n")
        if gamma > n:
            notes.append(f"gamma: formula gives {gamma} > n; capped at n")
            gamma = n
    if zeta is None:
        if 24 * t < n:
            zeta = derive_zeta(n, t, c, lam)
        else:
            zeta = n
            notes.append("zeta: t >= n/24, formula undefined; using n")
        if zeta > n:
            notes.append(f"zeta: formula gives {zeta} > n; capped at n")
            zeta = n
    if delta is None:
        delta = max(2, math.ceil(1 / alpha - 1e-12) + 1)
        if delta > n:
            notes.append(f"delta: {delta} > n; capped at n")
            delta = max(1, n)
    beta = derive_beta(gamma, n, t)
    return ProtocolParams(n=n, t=t, b=b, sigma=sigma, lam=lam, c=c, gamma=gamma,
                          beta=beta, zeta=zeta, delta=delta, alpha=alpha,
                          notes=tuple(notes))
