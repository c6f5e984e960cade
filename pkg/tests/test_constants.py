from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from drillbench.constants import (EXACT, SURROGATE, ScaledPow2, constants_ledger, ledger_identities,
                                  phi_from_json, profile)
from drillbench.graph import GraphError

IDENT = phi_from_json(None)


def test_exact_cascade_values():
    led = constants_ledger(1, 0, 5, 0, IDENT)
    assert led.delta1 == 100 and led.delta2 == 150_000
    assert led.Q0 == 600_002
    assert led.C0_ceiling == 135 and led.D0 == 3 * 135 + 108
    assert led.D1 == 1_200_006
    assert led.sigma0 == 120_000_600_000
    assert led.R0 == 720_003_600_000
    assert led.Sigma0 == 10 ** 11
    assert led.Sigma1 == 16_400_079_500_000 and led.Sigma == 17_840_086_700_000
    assert led.sys0.exponent == 25 * led.sigma0 and led.sys0.factor == 600_002
    assert not led.sys0.materializable


def test_identities_hold():
    rep = ledger_identities(constants_ledger(1, 0, 5, 0, IDENT))
    assert rep.passed and all(rep.details["identities"].values())


def test_identities_detect_tampering():
    led = constants_ledger(1, 0, 5, 0, IDENT)
    led.Sigma += 1
    rep = ledger_identities(led)
    assert rep.verdict == "fail" and rep.witness["failed"] == ["Sigma"]


def test_surrogate_materializes_sys0():
    led = constants_ledger(Fraction(5, 2), 0, 2, 0, IDENT, SURROGATE)
    assert led.sys0.materializable
    assert led.sys0.value() == led.Q0 * 2 ** int(led.sigma0)
    assert ledger_identities(led).passed


def test_scaled_power_equality_normalizes():
    assert ScaledPow2(10, Fraction(3)).equals(9, 6)
    assert not ScaledPow2(10, Fraction(3)).equals(10, 6)
    with pytest.raises(OverflowError):
        ScaledPow2(1 << 21, Fraction(1)).value()


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 20), st.integers(0, 5), st.integers(1, 5))
def test_identities_hold_for_affine_phi(d0_half, L0, intercept, slope):
    phi = phi_from_json({"kind": "affine", "slope": slope, "intercept": intercept})
    led = constants_ledger(Fraction(d0_half, 2), 0, L0, 0, phi)
    assert ledger_identities(led).passed
    assert led.delta2 == 1500 * led.delta1
    assert led.Sigma == led.Sigma1 + 2 * led.R0
    assert led.sigma0 == max(10 ** 7 * led.delta1, 10 ** 5 * led.D1)


def test_table_phi_missing_value():
    phi = phi_from_json({"kind": "table", "values": {"1": 1}})
    with pytest.raises(GraphError):
        constants_ledger(1, 0, 5, 0, phi)


def test_profile_overrides():
    p = profile("exact", {"delta2_factor": 2})
    assert p.delta2_factor == 2 and EXACT.delta2_factor == 1500
    with pytest.raises(GraphError):
        profile("exact", {"nope": 1})
    with pytest.raises(GraphError):
        profile("other")


def test_invalid_inputs():
    with pytest.raises(GraphError):
        constants_ledger(0, 0, 5, 0, IDENT)
    with pytest.raises(GraphError):
        constants_ledger(1, 0, 5, 0, IDENT, delta1=50)
