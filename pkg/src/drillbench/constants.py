"""Cascade of construction constants in exact arithmetic, with a runnable surrogate profile."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping

from mpmath import mp

from .boundary import _pair, adapted_params, section6_constants
from .graph import GraphError
from .report import Report

Number = int | Fraction
Phi = Callable[[Number], Number]

# values with at most this many bits are materialized as plain integers
MATERIALIZE_BITS = 1 << 20


@dataclass(frozen=True)
class ScaledPow2:
    """The exact integer ``factor * 2**exponent``, kept factored when too large to write out."""

    exponent: int
    factor: Fraction

    def __post_init__(self) -> None:
        if self.exponent < 0:
            raise ValueError("negative exponent")

    def bit_length_bound(self) -> int:
        return self.exponent + math.ceil(math.log2(max(self.factor, 1))) + 1

    @property
    def materializable(self) -> bool:
        return self.bit_length_bound() <= MATERIALIZE_BITS

    def value(self) -> Fraction:
        if not self.materializable:
            raise OverflowError(f"2^{self.exponent} * factor exceeds {MATERIALIZE_BITS} bits")
        return self.factor * (1 << self.exponent)

    def __truediv__(self, other: Number) -> "ScaledPow2":
        return ScaledPow2(self.exponent, self.factor / Fraction(other))

    def equals(self, exponent: int, factor: Number) -> bool:
        """Exact equality with ``factor * 2**exponent`` without expanding either side."""
        a, b = self._normal(), ScaledPow2(exponent, Fraction(factor))._normal()
        return a == b

    def _normal(self) -> tuple[int, Fraction]:
        e, f = self.exponent, self.factor
        if f == 0:
            return 0, Fraction(0)
        # move powers of two out of the factor
        while f.numerator % 2 == 0:
            f /= 2
            e += 1
        while f.denominator % 2 == 0:
            f *= 2
            e -= 1
        return e, f

    def to_dict(self) -> dict:
        out = {"exponent": self.exponent, "factor": self.factor}
        if self.materializable:
            out["value"] = self.value()
        return out


@dataclass(frozen=True)
class ConstantProfile:
    """Coefficients of the cascade; the exact profile uses the construction's own values."""

    name: str
    delta1_floor: int = 100
    delta2_factor: int = 1500
    sigma_delta: int = 10 ** 7
    sigma_D: int = 10 ** 5
    sys_exponent: int = 25
    R_sigma: int = 6
    Sigma0_factor: int = 10 ** 9


EXACT = ConstantProfile("exact")
SURROGATE = ConstantProfile("surrogate", delta1_floor=1, delta2_factor=2, sigma_delta=1,
                            sigma_D=1, sys_exponent=1, R_sigma=1, Sigma0_factor=1)
PROFILES = {"exact": EXACT, "surrogate": SURROGATE}


def profile(name: str, overrides: Mapping[str, int] | None = None) -> ConstantProfile:
    if name not in PROFILES:
        raise GraphError(f"unknown constant profile {name!r}")
    p = PROFILES[name]
    if overrides:
        bad = set(overrides) - set(ConstantProfile.__dataclass_fields__) - {"name"}
        if bad:
            raise GraphError(f"unknown profile override(s): {sorted(bad)}")
        p = replace(p, **{k: int(v) for k, v in overrides.items()})
    return p


@dataclass
class ConstantsLedger:
    profile: str
    delta0: Fraction
    lambda0: Fraction
    L0: Fraction
    A0: Fraction
    s0: Fraction
    delta1: Fraction
    delta2: Fraction
    Q0: Fraction
    Delta0: tuple[str, str]
    C0: tuple[str, str]
    C0_ceiling: int
    D0: Fraction
    D1: Fraction
    sigma0: Fraction
    sys0: ScaledPow2
    R_pi: Fraction
    R0: Fraction
    Sigma0: Fraction
    Sigma1: Fraction
    Sigma: Fraction
    phi_evaluations: dict = field(default_factory=dict)
    coefficients: ConstantProfile = EXACT

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "profile", "delta0", "lambda0", "L0", "A0", "s0", "delta1", "delta2", "Q0",
            "C0_ceiling", "D0", "D1", "sigma0", "R_pi", "R0", "Sigma0", "Sigma1", "Sigma")}
        out["Delta0"] = list(self.Delta0)
        out["C0"] = list(self.C0)
        out["sys0"] = self.sys0.to_dict()
        out["phi_evaluations"] = [[k, v] for k, v in sorted(self.phi_evaluations.items())]
        return out


def _ceil_upper(x) -> int:
    with mp.workdps(60):
        return int(mp.ceil(mp.mpf(x.b)))


def constants_ledger(delta0: Number, lambda0: Number, L0: Number, A0: Number, phi: Phi,
                     prof: ConstantProfile = EXACT, delta1: Number | None = None,
                     R_pi: Number = 0, Sigma0: Number | None = None) -> ConstantsLedger:
    """Evaluate the cascade exactly.

    ``delta1`` defaults to its floor ``max(delta0, floor)``; ``R_pi`` is the
    radius supplied by the shell-isomorphism theorem (caller-provided, 0 if
    unknown) and ``Sigma0`` defaults to its floor.  ``phi`` is evaluated at
    integer or rational arguments only; the irrational ``C0`` is replaced by
    the ceiling of its certified upper bound, which is sound for a
    non-decreasing ``phi``.
    """
    d0, lam, L, A = (Fraction(x) for x in (delta0, lambda0, L0, A0))
    if d0 <= 0 or L <= 0:
        raise GraphError("delta0 and L0 must be positive")
    p = prof
    evals: dict = {}

    def Phi(x: Number) -> Fraction:
        v = Fraction(phi(x))
        evals[Fraction(x)] = v
        return v

    floor1 = max(d0, Fraction(p.delta1_floor))
    d1 = floor1 if delta1 is None else Fraction(delta1)
    if d1 < floor1:
        raise GraphError(f"delta1 must be at least {floor1}")
    d2 = p.delta2_factor * d1
    Q0 = max(2 * Phi(2 * d2 + 1), d2)
    eps, kap = adapted_params(d0)
    sec = section6_constants(d0, L, kap, eps)
    C0c = _ceil_upper(sec["C0"])
    D0 = 3 * Phi(C0c) + 108 * d0
    D1 = max(D0, 2 * Q0 + 2, 16 * d0 + 16 * d0 * Phi(16 * d0))
    sigma0 = max(p.sigma_delta * d1, p.sigma_D * D1)
    e = p.sys_exponent * sigma0
    if e.denominator != 1:
        raise GraphError("sys0 exponent is not an integer")
    sys0 = ScaledPow2(int(e), Q0)
    Rpi = Fraction(R_pi)
    R0 = max(Rpi, lam + 2 * d2, p.R_sigma * sigma0)
    S0floor = p.Sigma0_factor * d1
    S0 = S0floor if Sigma0 is None else Fraction(Sigma0)
    if S0 < S0floor:
        raise GraphError(f"Sigma0 must be at least {S0floor}")
    S1 = 20 * S0 + 60 * sigma0 + 10 * R0 + 50 * d2
    S = S1 + 2 * R0
    return ConstantsLedger(p.name, d0, lam, L, A, 8 * d0, d1, d2, Q0,
                           tuple(_pair(sec["Delta0"])), tuple(_pair(sec["C0"])), C0c,
                           D0, D1, sigma0, sys0, Rpi, R0, S0, S1, S, evals, p)


def ledger_identities(led: ConstantsLedger) -> Report:
    """Re-check every identity of the cascade from the stored values."""
    p = led.coefficients
    phi = led.phi_evaluations
    checks = {
        "delta2": led.delta2 == p.delta2_factor * led.delta1,
        "delta1_floor": led.delta1 >= max(led.delta0, p.delta1_floor),
        "s0": led.s0 == 8 * led.delta0,
        "sigma0": led.sigma0 == max(p.sigma_delta * led.delta1, p.sigma_D * led.D1),
        "sys0": led.sys0.equals(int(p.sys_exponent * led.sigma0), led.Q0),
        "D1": led.D1 >= max(led.D0, 2 * led.Q0 + 2,
                            16 * led.delta0 + 16 * led.delta0 * phi[16 * led.delta0]),
        "Q0": led.Q0 == max(2 * phi[2 * led.delta2 + 1], led.delta2),
        "D0": led.D0 == 3 * phi[Fraction(led.C0_ceiling)] + 108 * led.delta0,
        "R0": led.R0 == max(led.R_pi, led.lambda0 + 2 * led.delta2, p.R_sigma * led.sigma0),
        "Sigma0": led.Sigma0 >= p.Sigma0_factor * led.delta1,
        "Sigma1": led.Sigma1 == 20 * led.Sigma0 + 60 * led.sigma0 + 10 * led.R0 + 50 * led.delta2,
        "Sigma": led.Sigma == led.Sigma1 + 2 * led.R0,
    }
    bad = [k for k, ok in checks.items() if not ok]
    rep = Report("constants-ledger", "fail" if bad else "pass",
                 {"identities": checks, "ledger": led.to_dict()},
                 witness={"failed": bad} if bad else None)
    rep.profile = led.profile
    return rep


def phi_from_json(spec: Mapping | None) -> Phi:
    """Build a caller-supplied proper function from a JSON description.

    Kinds: ``identity``; ``affine`` with ``slope`` and ``intercept``;
    ``table`` with ``values`` mapping argument strings to values (looked up
    exactly, missing arguments are an error).
    """
    spec = spec or {"kind": "identity"}
    kind = spec.get("kind")
    if kind == "identity":
        return lambda x: Fraction(x)
    if kind == "affine":
        a, b = Fraction(spec["slope"]), Fraction(spec.get("intercept", 0))
        return lambda x: a * Fraction(x) + b
    if kind == "table":
        table = {Fraction(k): Fraction(v) for k, v in spec["values"].items()}

        def look(x: Number) -> Fraction:
            try:
                return table[Fraction(x)]
            except KeyError:
                raise GraphError(f"phi table has no value at {Fraction(x)}") from None
        return look
    raise GraphError(f"unknown phi kind {kind!r}")
