from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evoset import harness
from evoset.dyn_graph import (
    DynEnv, laziness_coefficient, monotonicity_report, transition_matrix, transition_prob, vertex_conductance,
)
from evoset.errors import HorizonError, InvalidStateError, NonMonotoneError, UnknownVertexError
from evoset.graphs import e2, e3, from_document, to_document, zd_box


def test_e2_basic_quantities(env_e2):
    assert vertex_conductance(env_e2, 0, "a") == 2
    assert transition_prob(env_e2, 0, "a", "b") == 0.5
    assert transition_prob(env_e2, 0, "a", "a") == 0.5
    assert laziness_coefficient(env_e2) == 0.5


def test_self_loop_counted_once():
    env = DynEnv.from_edges(["x", "y"], [("x", "x", 3.0), ("x", "y", 1.0)], 0)
    assert vertex_conductance(env, 0, "x") == 4.0
    assert vertex_conductance(env, 0, "y") == 1.0


def test_doubling_gives_beta_half():
    rep = monotonicity_report(e2(scale_at_1=2, horizon=1))
    assert rep.beta == (1.0, 0.5)
    assert rep.is_nondecreasing
    assert rep.eta_star == 0.5


def test_halving_breaks_monotonicity_but_stays_effective():
    rep = monotonicity_report(e2(scale_at_1=0.5, horizon=1))
    assert rep.beta == (1.0, 2.0)
    assert not rep.is_nondecreasing
    assert rep.eta_star == 2.0
    assert rep.is_effectively_nondecreasing


def test_horizon_zero_eta_is_one():
    assert monotonicity_report(e2(horizon=0)).eta_star == 1.0


def test_vertex_leaving_support_raises():
    env = DynEnv.from_edges(["a", "b"], [("a", "b", 1.0, [(1, 0.0)]), ("a", "a", 1.0)], 2)
    with pytest.raises(NonMonotoneError):
        monotonicity_report(env)


def test_errors():
    env = e2()
    with pytest.raises(UnknownVertexError):
        vertex_conductance(env, 0, "zzz")
    with pytest.raises(HorizonError):
        env.pi(5)
    iso = DynEnv.from_edges(["a", "b", "c"], [("a", "b", 1.0)], 1)
    with pytest.raises(InvalidStateError):
        transition_prob(iso, 0, "c", "a")
    with pytest.raises(ValueError):
        DynEnv.from_edges(["a", "b"], [("a", "b", -1.0)], 0)
    with pytest.raises(ValueError):
        DynEnv.from_edges(["a", "b"], [("a", "b", 1.0), ("b", "a", 2.0)], 0)


def test_piecewise_constant_schedule_right_continuous():
    env = DynEnv.from_edges(["a", "b"], [("a", "b", 1.0, [(2.5, 4.0)]), ("a", "a", 1.0)], 5.0)
    assert env.pi(2.4999)[0] == 2.0
    assert env.pi(2.5)[0] == 5.0
    assert env.pi(5.0)[0] == 5.0


def test_exact_mode_keeps_fractions():
    env = e3(exact=True)
    p = transition_prob(env, 0, "b", "a")
    assert p == Fraction(1, 4)
    assert isinstance(p, Fraction)


def test_document_round_trip_preserves_digest():
    for env in (e2(), e3(exact=True), zd_box(2, 3, boundary="wired")):
        back = from_document(to_document(env))
        assert back.digest() == env.digest()


def test_wired_box_pi_matches_degree():
    env = zd_box(2, 3, boundary="wired", loops=None)
    pi = env.pi(0)
    # every box site has 4 lattice bonds (missing ones go to the exterior)
    assert np.all(pi[:9] == 4)
    assert pi[9] == 12  # 4 sides of 3 sites


def test_lazy_box_is_half_lazy(rng):
    env = zd_box(3, 3, horizon=5, elliptic=(0.5, 2.0), rng=rng)
    assert laziness_coefficient(env) == pytest.approx(0.5, abs=1e-12)
    assert monotonicity_report(env).is_nondecreasing


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), h=st.integers(0, 4))
def test_fuzzer_contract(seed, n, h):
    env = harness.random_env_fuzzer(n, h, np.random.default_rng(seed))
    rep = monotonicity_report(env)
    assert rep.is_nondecreasing
    assert laziness_coefficient(env) >= Fraction(1, 4)
    for t in range(h + 1):
        rows = transition_matrix(env, t).sum(axis=1)
        assert all(r == 1 for r in rows)
