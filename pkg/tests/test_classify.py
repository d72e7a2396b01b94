import numpy as np
import pytest

from opmeasure.classify import (
    commutant_residual,
    conditional_posteriors,
    disturbed_set,
    is_minimum_disturbing,
    satisfies_projection_postulate,
    satisfies_repeatability,
)
from opmeasure.errors import DimensionError, NotCompatibleError
from opmeasure.instruments import identity_instrument, luders_instrument, von_neumann_instrument
from opmeasure.linalg import ket, projector
from opmeasure.models import (
    instrument_from_model,
    number_observable,
    photon_counter_model,
    random_measuring_model,
    repeatable_model,
)
from opmeasure.observables import DiscreteObservable, observable_from_hermitian
from opmeasure.sampling import random_commuting_observable, random_density, random_observable

from conftest import MINUS, PLUS, rotated_z

IDENT2 = DiscreteObservable((1.0,), (np.eye(2),))
PLUS_MINUS = np.column_stack([PLUS, MINUS])


@pytest.mark.parametrize("d", [2, 3, 4])
def test_luders_is_repeatable_and_projective(rng, d):
    obs = random_observable(d, rng)
    instr = luders_instrument(obs)
    assert satisfies_repeatability(instr, obs)
    assert satisfies_projection_postulate(instr, obs)


def test_photon_counter_not_repeatable():
    n_obs = number_observable(3)
    verdict = satisfies_repeatability(instrument_from_model(photon_counter_model(3)), n_obs)
    assert not verdict
    # after a count of n >= 1 the probe has absorbed the photons; a repeat reads 0
    assert verdict.witness["outcome"] >= 1
    assert verdict.witness["repeat_outcome"] == 0
    assert verdict.residual == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(5))
def test_repeatable_model_any_phases(seed):
    rng = np.random.default_rng(seed)
    obs = random_observable(3, rng)
    model = repeatable_model(obs, rng.uniform(0, 2 * np.pi, len(obs)))
    instr = instrument_from_model(model)
    assert satisfies_repeatability(instr, obs)
    assert satisfies_projection_postulate(instr, obs)


def test_von_neumann_identity_not_projective():
    instr = von_neumann_instrument(IDENT2, PLUS_MINUS)
    assert satisfies_repeatability(instr, IDENT2)
    verdict = satisfies_projection_postulate(instr, IDENT2)
    assert not verdict and verdict.residual == pytest.approx(0.5)


def test_photon_counter_not_projective():
    assert not satisfies_projection_postulate(instrument_from_model(photon_counter_model(2)),
                                              number_observable(2))


def test_incompatible_raises(Z, X):
    with pytest.raises(NotCompatibleError):
        satisfies_repeatability(luders_instrument(Z), X)
    with pytest.raises(NotCompatibleError):
        satisfies_projection_postulate(luders_instrument(Z), X)


def test_disturbed_set_luders_z(Z, X, Y):
    assert disturbed_set(luders_instrument(Z), [Z, X, Y]) == [X, Y]
    assert disturbed_set(luders_instrument(Z), {"Z": Z, "X": X}) == {"X": X}


def test_disturbed_set_photon_counter():
    n_obs = number_observable(3)
    assert disturbed_set(instrument_from_model(photon_counter_model(3)), [n_obs]) == [n_obs]


def test_disturbed_set_identity_instrument(rng):
    cands = [random_observable(3, rng) for _ in range(4)]
    assert disturbed_set(identity_instrument(3), cands) == []


def test_disturbed_set_monotone_in_tolerance(Z, X):
    instr = von_neumann_instrument(IDENT2, PLUS_MINUS)
    cands = [Z, X, rotated_z(0.3)]
    loose = disturbed_set(instr, cands, tol=0.4)
    tight = disturbed_set(instr, cands, tol=1e-9)
    assert all(any(c is t for t in tight) for c in loose)
    assert len(loose) <= len(tight)


def test_disturbed_set_dimension_error(Z):
    with pytest.raises(DimensionError):
        disturbed_set(luders_instrument(Z), [number_observable(3)])


def test_luders_minimum_disturbing(Z, X):
    cands = {"Z": Z, "X": X, "tilt_0.4": rotated_z(0.4), "tilt_1.1": rotated_z(1.1)}
    rep = is_minimum_disturbing(luders_instrument(Z), Z, cands)
    assert rep.minimum_disturbing and rep.projective and rep.repeatable
    assert rep.disturbed == ["X", "tilt_0.4", "tilt_1.1"]
    assert rep.consistent


def test_von_neumann_not_minimum_disturbing(Z, X):
    rep = is_minimum_disturbing(von_neumann_instrument(IDENT2, PLUS_MINUS), IDENT2, {"Z": Z, "X": X})
    assert not rep.minimum_disturbing and rep.repeatable
    assert rep.witnesses["commuting_disturbed"]["candidate"] == "Z"
    assert rep.consistent


def test_photon_counter_not_minimum_disturbing():
    n_obs = number_observable(3)
    rep = is_minimum_disturbing(instrument_from_model(photon_counter_model(3)), n_obs, [n_obs])
    assert not rep.minimum_disturbing
    assert rep.witnesses["commuting_disturbed"]["candidate"] == "0"
    assert rep.consistent


def test_commutant_witness_without_candidates():
    rep = is_minimum_disturbing(von_neumann_instrument(IDENT2, PLUS_MINUS), IDENT2)
    assert "commutant_moved" in rep.witnesses


@pytest.mark.parametrize("seed", range(6))
def test_classification_agrees_with_commutant(seed):
    rng = np.random.default_rng(seed)
    obs = random_observable(3, rng)
    instr = instrument_from_model(random_measuring_model(obs, rng, env_dim=2))
    cands = [random_commuting_observable(obs, rng), random_observable(3, rng), obs]
    rep = is_minimum_disturbing(instr, obs, cands)
    res, _ = commutant_residual(instr, obs)
    assert rep.minimum_disturbing == (res <= 1e-9)
    assert rep.consistent, rep.theorem_violations


def test_projective_implies_simultaneous_with_commuting_candidates(rng):
    obs = random_observable(4, rng, outcomes=2)
    cands = [random_commuting_observable(obs, rng) for _ in range(4)]
    rep = is_minimum_disturbing(luders_instrument(obs), obs, cands)
    assert rep.minimum_disturbing and rep.disturbed == []
    assert rep.consistent


@pytest.mark.parametrize("d", [2, 3])
def test_nondegenerate_repeatable_posteriors_are_eigenprojections(rng, d):
    obs = random_observable(d, rng, outcomes=d)
    rho = random_density(d, rng)
    for post, p in zip(conditional_posteriors(luders_instrument(obs), obs, rho), obs.projections):
        np.testing.assert_allclose(post, p, atol=1e-9)


def test_degenerate_repeatable_but_not_projective():
    a = observable_from_hermitian(np.diag([1.0, 1.0, 2.0]))
    basis = np.zeros((3, 3))
    basis[:2, :2] = PLUS_MINUS
    basis[2, 2] = 1.0
    rep = is_minimum_disturbing(von_neumann_instrument(a, basis), a)
    assert rep.repeatable and not rep.projective


def test_posterior_undefined_for_null_outcome(Z):
    posts = conditional_posteriors(luders_instrument(Z), Z, projector(ket(2, 0)))
    assert posts[1] is None
