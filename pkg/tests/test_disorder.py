import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from copolypin import disorder as dis
from copolypin._errors import DegenerateLaw, InputError


def test_pm1_is_standard():
    assert dis.PM1.is_finite
    assert float(dis.PM1.atoms @ dis.PM1.weights) == 0.0
    assert float(dis.PM1.atoms**2 @ dis.PM1.weights) == 1.0


@given(st.floats(-5, 5))
def test_log_mgf_closed_forms(t):
    assert math.isclose(dis.log_mgf(dis.PM1, t), math.log(math.cosh(t)), rel_tol=1e-12, abs_tol=1e-15)
    assert dis.log_mgf(dis.GAUSSIAN, t) == t * t / 2


def test_log_mgf_no_overflow():
    assert math.isclose(dis.log_mgf(dis.PM1, 2000.0), 2000.0 - math.log(2), rel_tol=1e-15)


@given(st.lists(st.tuples(st.sampled_from(np.linspace(-10, 10, 41).tolist()), st.floats(0.01, 1)),
                min_size=2, max_size=6))
def test_standardize_gives_mean_zero_variance_one(pairs):
    xs, ws = zip(*pairs)
    if len(set(xs)) == 1:
        with pytest.raises(DegenerateLaw):
            dis.standardize(xs, ws)
        return
    law = dis.standardize(xs, ws)
    assert abs(float(law.atoms @ law.weights)) < 1e-9
    assert abs(float(law.atoms**2 @ law.weights) - 1) < 1e-9
    assert math.isclose(law.weights.sum(), 1.0, rel_tol=1e-12)


def test_degenerate_and_bad_inputs():
    with pytest.raises(DegenerateLaw):
        dis.standardize([1.0, 1.0], [0.5, 0.5])
    with pytest.raises(DegenerateLaw):
        dis.standardize([1.0, 3.0], [1.0, 0.0])
    with pytest.raises(InputError):
        dis.standardize([1.0, 2.0], [-1.0, 2.0])
    with pytest.raises(InputError):
        dis.from_config("cauchy")


def test_from_config_variants():
    assert dis.from_config("pm1") == dis.PM1
    assert dis.from_config({"kind": "gaussian"}) == dis.GAUSSIAN
    law = dis.from_config({"kind": "discrete", "atoms": [0, 1], "weights": [0.5, 0.5]})
    assert np.allclose(sorted(law.support), [-1, 1])
    with pytest.raises(InputError):
        dis.from_config({"kind": "discrete", "atoms": [0, 1]})


def test_sampling_is_reproducible_and_streams_differ():
    a = dis.sample(dis.PM1, dis.GAUSSIAN, 1000, seed=3, stream=0)
    b = dis.sample(dis.PM1, dis.GAUSSIAN, 1000, seed=3, stream=0)
    c = dis.sample(dis.PM1, dis.GAUSSIAN, 1000, seed=3, stream=1)
    assert np.array_equal(a.hat, b.hat) and np.array_equal(a.bar, b.bar)
    assert not np.array_equal(a.hat, c.hat)
    assert set(np.unique(a.hat)) <= {-1.0, 1.0}
    with pytest.raises(ValueError):
        a.hat[0] = 5.0


def test_sample_moments():
    law = dis.standardize([-2.0, 0.0, 1.0], [0.2, 0.3, 0.5])
    s = dis.sample(law, law, 200000, seed=9)
    assert abs(s.hat.mean()) < 0.01 and abs(s.hat.var() - 1) < 0.02
    assert set(np.round(np.unique(s.bar), 12)) <= set(np.round(law.support, 12))


def test_fixed_sample_validation():
    s = dis.fixed_sample([1, -1, 1], [0, 0, 0])
    assert s.n == 3
    with pytest.raises(InputError):
        dis.fixed_sample([1, -1], [0])
    with pytest.raises(InputError):
        dis.sample(dis.PM1, dis.PM1, 0, 1)


@settings(max_examples=20)
@given(st.integers(0, 2**63), st.integers(0, 50))
def test_sample_deterministic_for_any_seed(seed, stream):
    a = dis.sample(dis.PM1, dis.PM1, 17, seed, stream)
    b = dis.sample(dis.PM1, dis.PM1, 17, seed, stream)
    assert np.array_equal(a.hat, b.hat)


def test_log_mgf_jensen_and_convexity():
    law = dis.standardize([-3.0, 0.2, 1.0, 4.0], [0.1, 0.4, 0.3, 0.2])
    ts = np.linspace(-5, 5, 101)
    vals = np.array([dis.log_mgf(law, t) for t in ts])
    assert np.all(vals[ts != 0] > 0) and vals[ts == 0][0] == 0
    assert np.all(np.diff(vals, 2) >= -1e-10)
