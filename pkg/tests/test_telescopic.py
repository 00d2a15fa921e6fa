import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from conftest import GOLDEN_Y, LN2
from multiergodic import validate_spec
from multiergodic.pressure import pressure_gradient
from multiergodic.telescopic import (
    chain_layout,
    cylinder_measure,
    expected_lyapunov,
    expected_phi,
    local_dimension_estimate,
    multiple_average,
    sample_word,
    sample_words,
)
from multiergodic.transfer import solve_transfer, transition_kernel


def kernel_at(spec, s, r):
    return transition_kernel(spec, solve_transfer(spec, s, r))


def as_sets(layout):
    return [list(map(int, c)) for c in layout.chains]


def test_layout_examples():
    assert as_sets(chain_layout(6, 2)) == [[1, 2, 4], [3, 6], [5]]
    assert as_sets(chain_layout(9, 3)) == [[1, 3, 9], [2, 6], [4], [5], [7], [8]]
    assert as_sets(chain_layout(1, 4)) == [[1]]


@given(st.integers(1, 3000), st.integers(2, 7))
def test_layout_partitions(n, q):
    lay = chain_layout(n, q)
    flat = np.concatenate(lay.chains)
    assert np.array_equal(np.sort(flat), np.arange(1, n + 1))
    assert len(lay.chains) == n - n // q
    assert all(int(c[0]) % q for c in lay.chains)


def test_sampling_deterministic(tri):
    k = kernel_at(tri, 0.4, -1.0)
    lay = chain_layout(5000, 3)
    a, b = sample_word(k, lay, 11, 3), sample_word(k, lay, 11, 3)
    assert np.array_equal(a.symbols, b.symbols)
    assert not np.array_equal(a.symbols, sample_word(k, lay, 11, 4).symbols)
    batch = sample_words(k, lay, 11, 5)
    assert np.array_equal(batch[3].symbols, a.symbols)


def test_uniform_frequency(sym):
    k = kernel_at(sym, 0.0, -2.0)
    w = sample_word(k, chain_layout(100_000, 2), 2024)
    assert abs(w.symbols.mean() - 0.5) < 0.01


def test_transition_frequencies_chi_square(tri):
    k = kernel_at(tri, 0.8, -1.1)
    n = 300_000
    w = sample_word(k, chain_layout(n, 3), 7).symbols
    idx = np.arange(3, n + 1, 3)
    parent, child = w[idx // 3 - 1], w[idx - 1]
    for a in range(3):
        obs = np.bincount(child[parent == a], minlength=3)
        exp = k.transitions[a] * obs.sum()
        assert chisquare(obs, exp).pvalue > 0.001


def test_initial_frequencies(golden):
    k = kernel_at(golden, 1.0, -1.0)
    n = 200_000
    w = sample_word(k, chain_layout(n, 2), 3).symbols
    starts = w[np.arange(1, n + 1, 2) - 1]
    obs = np.bincount(starts, minlength=2)
    assert chisquare(obs, k.initial * obs.sum()).pvalue > 0.001


@pytest.mark.parametrize(
    "word, expected",
    [("110100", 2 / 3), ("1" * 10, 1.0), ("0" * 9, 0.0)],
)
def test_multiple_average_examples(sym, word, expected):
    assert multiple_average(word, sym) == pytest.approx(expected, abs=1e-15)


def test_multiple_average_too_short(tri):
    with pytest.raises(ValueError):
        multiple_average("12", tri)


def test_expected_phi_examples(sym, tri):
    assert expected_phi(kernel_at(sym, 0.0, -2.0), sym) == pytest.approx(0.25, abs=1e-14)
    c = validate_spec({"q": 3, "intervals": [[0, 0.2], [0.5, 1]], "phi": [[-1.5] * 2] * 2})
    assert expected_phi(kernel_at(c, 2.0, 0.3), c) == pytest.approx(-1.5, abs=1e-13)


def test_expected_lyapunov_examples(sym, golden, tri):
    assert expected_lyapunov(kernel_at(sym, 1.3, -0.2), sym) == pytest.approx(LN2, abs=1e-14)
    from multiergodic.spectrum import alpha_star

    _, r0, _ = alpha_star(golden)
    lam = expected_lyapunov(kernel_at(golden, 0.0, r0), golden)
    assert lam == pytest.approx(LN2 * (2 - GOLDEN_Y), abs=1e-12)
    k = kernel_at(tri, 0.5, -0.5)
    assert tri.lambdas.min() <= expected_lyapunov(k, tri) <= tri.lambdas.max()
    j = 40
    a = expected_lyapunov(k, tri, max_depth=j)
    b = expected_lyapunov(k, tri, max_depth=j + 5)
    assert abs(a - b) < 1e-12


@pytest.mark.parametrize("name", ["sym", "golden", "golden_q3", "tri", "first"])
def test_phi_series_equals_pressure_slope(name):
    from conftest import ALL_SPECS

    spec = validate_spec(ALL_SPECS[name])
    for s, r in [(-1.7, -0.6), (0.3, 1.1), (2.2, -2.4)]:
        phi = expected_phi(kernel_at(spec, s, r), spec)
        assert abs(phi - pressure_gradient(spec, s, r)[0]) < 1e-10


def test_cylinder_examples(sym):
    k = kernel_at(sym, 0.0, -2.0)
    assert cylinder_measure(k, chain_layout(2, 2), "11") == pytest.approx(math.log(0.25), abs=1e-15)
    assert cylinder_measure(k, chain_layout(0, 2), []) == 0.0
    assert local_dimension_estimate(sym, k, "11") == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("name, n", [("golden", 12), ("tri", 7), ("golden_q3", 10)])
def test_exact_mass(name, n):
    from conftest import ALL_SPECS

    spec = validate_spec(ALL_SPECS[name])
    k = kernel_at(spec, 0.9, -1.3)
    lay = chain_layout(n, spec.q)
    logs = [cylinder_measure(k, lay, np.array(w)) for w in itertools.product(range(spec.m), repeat=n)]
    assert abs(math.fsum(np.exp(logs)) - 1) < 1e-12


def test_cylinder_length_mismatch(sym):
    with pytest.raises(ValueError):
        cylinder_measure(kernel_at(sym, 0, -2), chain_layout(3, 2), "11")


def test_local_dimension_constant_phi(const):
    from multiergodic.spectrum import solve_critical
    from multiergodic.system import bowen_dimension

    p = solve_critical(const, 0.7)
    k = kernel_at(const, p.s, p.r)
    ws = sample_words(k, chain_layout(100_000, 2), 5, 30)
    med = np.median([local_dimension_estimate(const, k, w) for w in ws])
    assert abs(med - bowen_dimension(const.lambdas)) < 0.02
