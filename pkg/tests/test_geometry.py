import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misopt.geometry import (InvalidLayoutError, bare_pattern, build_layout,
                             effective_phase, enumerate_patterns)
from misopt.oracles import pattern_count_bruteforce


def test_degenerate_single_element_layout():
    lay = build_layout(1, 1, 1, 1, 0.05, 0.1)
    assert lay.num_ms1 == 1 and lay.num_ms2 == 1
    assert np.allclose(lay.ms1_positions, [[0, 0, 0]])
    assert np.allclose(lay.ms2_rel_positions, [[0, 0, 0]])


def test_grid_positions_row_major():
    lay = build_layout(2, 2, 1, 1, 0.05, 0.1)
    expect = np.array([[0, 0, 0], [0, 0.05, 0], [0.05, 0, 0], [0.05, 0.05, 0]])
    assert np.allclose(lay.ms1_positions, expect)


def test_default_experiment_dimensions():
    lay = build_layout(6, 6, 4, 4, 0.025, 0.1)
    assert lay.num_ms1 == 36 and lay.num_ms2 == 16
    assert lay.num_patterns == 9


@pytest.mark.parametrize("field,kwargs", [
    ("m_rows", dict(m_rows=0)),
    ("n_rows", dict(n_rows=7)),
    ("n_cols", dict(n_cols=9)),
    ("spacing", dict(spacing=-1.0)),
    ("wavelength", dict(wavelength=0.0)),
])
def test_layout_validation_names_field(field, kwargs):
    base = dict(m_rows=6, m_cols=6, n_rows=4, n_cols=4, spacing=0.05, wavelength=0.1)
    base.update(kwargs)
    with pytest.raises(InvalidLayoutError, match=field):
        build_layout(**base)


def test_full_overlap_single_pattern():
    lay = build_layout(2, 2, 2, 2, 0.05, 0.1)
    pats = enumerate_patterns(lay)
    assert len(pats) == 1
    p = pats[0]
    assert np.array_equal(p.ms1_index, np.arange(4))
    assert np.all(p.padding_vector() == 0)


def test_corner_placement_and_padding():
    lay = build_layout(2, 2, 1, 1, 0.05, 0.1)
    pats = enumerate_patterns(lay)
    assert len(pats) == 4
    first = pats[0]
    assert first.ms1_index[0] == 0
    assert np.array_equal(first.padding_vector(), [0, 1, 1, 1])


def test_pattern_count_5x5_3x3():
    lay = build_layout(5, 5, 3, 3, 0.05, 0.1)
    assert len(enumerate_patterns(lay)) == 9


def test_pattern_ordering_column_fastest():
    lay = build_layout(3, 4, 2, 2, 0.05, 0.1)
    pats = enumerate_patterns(lay)
    for p in pats:
        assert p.u == (p.u_row - 1) * lay.shift_cols + p.u_col
    assert [p.u for p in pats] == list(range(1, len(pats) + 1))


@settings(max_examples=60, deadline=None)
@given(m_r=st.integers(1, 6), m_c=st.integers(1, 6),
       n_r=st.integers(1, 6), n_c=st.integers(1, 6))
def test_pattern_count_matches_bruteforce(m_r, m_c, n_r, n_c):
    if n_r > m_r or n_c > m_c:
        return
    lay = build_layout(m_r, m_c, n_r, n_c, 0.05, 0.1)
    pats = enumerate_patterns(lay)
    assert len(pats) == pattern_count_bruteforce(m_r, m_c, n_r, n_c)
    for p in pats:
        s = p.selection_matrix()
        assert np.array_equal(s.T @ s, np.eye(lay.num_ms2))
        assert np.array_equal(np.diag(s @ s.T) + p.padding_vector(),
                              np.ones(lay.num_ms1))


def test_sliding_one_column_step_shifts_block():
    lay = build_layout(4, 4, 2, 2, 0.05, 0.1)
    pats = enumerate_patterns(lay)
    # neighbors along the column axis differ by exactly one column of the grid
    a, b = pats[0], pats[1]
    assert b.u_row == a.u_row and b.u_col == a.u_col + 1
    assert np.array_equal(b.ms1_index, a.ms1_index + 1)


def test_effective_phase_all_ones():
    lay = build_layout(3, 3, 2, 2, 0.05, 0.1)
    p = enumerate_patterns(lay)[0]
    v = effective_phase(p, np.ones(4, complex), np.ones(9, complex))
    assert np.allclose(v, np.ones(9))


def test_effective_phase_full_overlap_is_product():
    lay = build_layout(2, 2, 2, 2, 0.05, 0.1)
    p = enumerate_patterns(lay)[0]
    rng = np.random.default_rng(0)
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    assert np.allclose(effective_phase(p, theta, phi), theta * phi)


def test_effective_phase_single_overlap():
    lay = build_layout(2, 2, 1, 1, 0.05, 0.1)
    p = enumerate_patterns(lay)[0]
    theta = np.array([np.exp(1j * np.pi / 2)])
    v = effective_phase(p, theta, np.ones(4, complex))
    assert np.allclose(v, [np.exp(1j * np.pi / 2), 1, 1, 1])


def test_effective_phase_unit_modulus_output():
    lay = build_layout(4, 5, 2, 3, 0.05, 0.1)
    rng = np.random.default_rng(3)
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, 6))
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 20))
    for p in enumerate_patterns(lay):
        v = effective_phase(p, theta, phi)
        assert np.max(np.abs(np.abs(v) - 1.0)) < 1e-12
        assert np.allclose(v[p.padding_vector() == 1],
                           phi[p.padding_vector() == 1])


def test_effective_phase_rejects_non_unit_inputs():
    lay = build_layout(2, 2, 1, 1, 0.05, 0.1)
    p = enumerate_patterns(lay)[0]
    with pytest.raises(ValueError, match="unit-modulus"):
        effective_phase(p, np.array([0.5 + 0j]), np.ones(4, complex))
    with pytest.raises(ValueError, match="shape"):
        effective_phase(p, np.ones(2, complex), np.ones(4, complex))


def test_bare_pattern_reduces_to_host_phases():
    p = bare_pattern(5)
    rng = np.random.default_rng(1)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
    assert np.allclose(effective_phase(p, np.zeros(0, complex), phi), phi)
    assert np.all(p.padding_vector() == 1)
