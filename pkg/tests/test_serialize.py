import json

import numpy as np
import pytest

from opmeasure.instruments import luders_instrument, von_neumann_instrument
from opmeasure.models import instrument_from_model, photon_counter_model, random_model
from opmeasure.observables import DiscreteObservable
from opmeasure.sampling import ginibre, random_density, random_observable
from opmeasure.serialize import (
    FormatError,
    decode_instrument,
    decode_matrix,
    decode_model,
    decode_observable,
    dumps,
    encode_instrument,
    encode_matrix,
    encode_model,
    encode_observable,
)

from conftest import MINUS, PLUS


def through_text(record):
    return json.loads(dumps(record))


def test_matrix_literal_layout():
    lit = encode_matrix(np.array([[1, 2j], [3, 4]]))
    assert lit == [[[1.0, 0.0], [0.0, 2.0]], [[3.0, 0.0], [4.0, 0.0]]]


def test_matrix_round_trip_is_bit_exact(rng):
    m = ginibre(4, 3, rng) / 7
    back = decode_matrix(through_text({"m": encode_matrix(m)})["m"])
    np.testing.assert_array_equal(back, m)


def test_decode_accepts_bare_reals():
    np.testing.assert_array_equal(decode_matrix([[1, 0], [0, -1]]), np.diag([1, -1]))


@pytest.mark.parametrize("bad", [[], [[1, 2], [3]], [[[1, 2, 3]]], [[True]], "x", [["a"]]])
def test_decode_rejects_malformed(bad):
    with pytest.raises(FormatError):
        decode_matrix(bad)


def test_observable_round_trip(rng):
    obs = random_observable(3, rng)
    back = decode_observable(through_text(encode_observable(obs)))
    assert back.values == obs.values
    for p, q in zip(obs.projections, back.projections):
        np.testing.assert_array_equal(p, q)


@pytest.mark.parametrize("factory", [
    lambda rng: luders_instrument(random_observable(3, rng)),
    lambda rng: instrument_from_model(photon_counter_model(3)),
    lambda rng: instrument_from_model(random_model(2, 3, rng)),
    lambda rng: von_neumann_instrument(DiscreteObservable((1.0,), (np.eye(2),)),
                                       np.column_stack([PLUS, MINUS])),
])
def test_instrument_round_trip(rng, factory):
    instr = factory(rng)
    back = decode_instrument(through_text(encode_instrument(instr)))
    assert back.values == instr.values
    for _ in range(3):
        rho = random_density(instr.dim, rng)
        for a, b in zip(instr.branches, back.branches):
            assert np.abs(a(rho) - b(rho)).max() <= 1e-9


def test_instrument_record_errors():
    with pytest.raises(FormatError):
        decode_instrument({"outcomes": [0, 1], "branches": [[[[1]]]]})
    with pytest.raises(FormatError):
        decode_instrument({"branches": []})


def test_model_round_trip(rng):
    model = random_model(2, 2, rng)
    back = decode_model(through_text(encode_model(model)))
    np.testing.assert_array_equal(back.U, model.U)
    a, b = instrument_from_model(model), instrument_from_model(back)
    for x, y in zip(a.branches, b.branches):
        assert x.distance(y) <= 1e-12


def test_dumps_is_deterministic(rng):
    rec = encode_instrument(luders_instrument(random_observable(2, rng)))
    assert dumps(rec) == dumps(json.loads(dumps(rec)))
