"""Hypothesis strategies shared by the property tests."""
import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from riskdesign.risk_measures import AbsSemiDeviation, AverageValueAtRisk, Expectation

finite = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False)


@st.composite
def simplex(draw, n=None, min_n=2, max_n=6):
    n = n or draw(st.integers(min_n, max_n))
    raw = draw(arrays(float, n, elements=st.floats(0.0, 1.0)))
    raw = raw + 1e-3
    return raw / raw.sum()


@st.composite
def cost_pair(draw, min_n=2, max_n=6):
    """Probability row plus a random cost vector on the same support."""
    p = draw(simplex(min_n=min_n, max_n=max_n))
    z = draw(arrays(float, p.size, elements=finite))
    return z, p


measures = st.one_of(
    st.just(Expectation()),
    st.floats(0.01, 1.0).map(AbsSemiDeviation),
    st.floats(0.01, 1.0).map(AverageValueAtRisk),
)


def random_measure(rng, kind):
    if kind == "expectation":
        return Expectation()
    if kind == "semideviation":
        return AbsSemiDeviation(rng.uniform(0.01, 1.0))
    return AverageValueAtRisk(rng.uniform(0.01, 1.0))


def random_instance(rng, n_max=6):
    n = int(rng.integers(2, n_max + 1))
    p = rng.dirichlet(np.ones(n))
    return rng.normal(0.0, 5.0, n), p
