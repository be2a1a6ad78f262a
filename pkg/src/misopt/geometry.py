"""Surface layouts, beam-pattern enumeration and composite phase vectors.

The movable surface (MS2) slides on the fixed primary surface (MS1) in
integer steps of the element pitch.  Every admissible displacement is a
"beam pattern": a mapping of each MS2 element onto one MS1 element plus a
padding vector marking the uncovered MS1 elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_MODULUS_TOL = 1e-9


class InvalidLayoutError(ValueError):
    """A layout dimension or spacing violates the geometry constraints."""


@dataclass(frozen=True)
class MisLayout:
    """Element geometry of the two stacked surfaces and the base-station array.

    MS1 occupies the z=0 plane, first element at the origin, row index
    increasing along +x, column index along +y.  Elements are indexed
    row-major: m = (m_r - 1) * m_cols + m_c (1-based in the math, 0-based in
    arrays).  MS2 uses the same pitch; its positions are relative to its own
    first element.
    """

    m_rows: int
    m_cols: int
    n_rows: int
    n_cols: int
    bs_antennas: int
    spacing: float
    wavelength: float
    ms1_positions: np.ndarray = field(repr=False)
    ms2_rel_positions: np.ndarray = field(repr=False)
    bs_positions: np.ndarray = field(repr=False)

    @property
    def num_ms1(self) -> int:
        return self.m_rows * self.m_cols

    @property
    def num_ms2(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def shift_rows(self) -> int:
        return self.m_rows - self.n_rows + 1

    @property
    def shift_cols(self) -> int:
        return self.m_cols - self.n_cols + 1

    @property
    def num_patterns(self) -> int:
        return self.shift_rows * self.shift_cols


@dataclass(frozen=True)
class BeamPattern:
    """One discrete overlap position of MS2 on MS1.

    ``ms1_index`` maps MS2 element n to the MS1 element it covers; it is the
    sparse form of the binary selection matrix (one 1 per column).  The
    padding vector marks MS1 elements left uncovered, which behave as
    unit-amplitude zero-phase elements.
    """

    u: int        # pattern index, 1..U
    u_row: int    # displacement index along rows, 1..U_r
    u_col: int    # displacement index along columns, 1..U_c
    num_ms1: int
    ms1_index: np.ndarray = field(repr=False)  # (N,) int, MS2 element -> MS1 element

    @property
    def num_ms2(self) -> int:
        return self.ms1_index.shape[0]

    def selection_matrix(self) -> np.ndarray:
        """Dense M x N binary selection matrix."""
        s = np.zeros((self.num_ms1, self.num_ms2))
        s[self.ms1_index, np.arange(self.num_ms2)] = 1.0
        return s

    def padding_vector(self) -> np.ndarray:
        """Binary M-vector, 1 on MS1 elements not covered by MS2."""
        e = np.ones(self.num_ms1)
        e[self.ms1_index] = 0.0
        return e

    def scatter(self, theta: np.ndarray) -> np.ndarray:
        """S_u @ theta + e_u without materialising the dense matrix."""
        out = np.ones(self.num_ms1, dtype=complex)
        out[self.ms1_index] = theta
        return out


def _grid_positions(rows: int, cols: int, spacing: float) -> np.ndarray:
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    pos = np.zeros((rows * cols, 3))
    pos[:, 0] = r.ravel() * spacing
    pos[:, 1] = c.ravel() * spacing
    return pos


def build_layout(
    m_rows: int,
    m_cols: int,
    n_rows: int,
    n_cols: int,
    spacing: float,
    wavelength: float,
    bs_antennas: int = 4,
    bs_spacing: float | None = None,
) -> MisLayout:
    """Construct a layout, validating every dimension constraint.

    The base station is a uniform linear array along +y; only pairwise
    distances of its elements enter the model, so the orientation is a free
    convention.  ``bs_spacing`` defaults to half a wavelength.
    """
    for name, value in [
        ("m_rows", m_rows), ("m_cols", m_cols),
        ("n_rows", n_rows), ("n_cols", n_cols),
        ("bs_antennas", bs_antennas),
    ]:
        if int(value) != value or value < 1:
            raise InvalidLayoutError(f"{name} must be a positive integer, got {value}")
    if n_rows > m_rows:
        raise InvalidLayoutError(f"n_rows={n_rows} exceeds m_rows={m_rows}")
    if n_cols > m_cols:
        raise InvalidLayoutError(f"n_cols={n_cols} exceeds m_cols={m_cols}")
    if spacing <= 0:
        raise InvalidLayoutError(f"spacing must be positive, got {spacing}")
    if wavelength <= 0:
        raise InvalidLayoutError(f"wavelength must be positive, got {wavelength}")
    if bs_spacing is None:
        bs_spacing = wavelength / 2.0
    if bs_spacing <= 0:
        raise InvalidLayoutError(f"bs_spacing must be positive, got {bs_spacing}")

    bs = np.zeros((bs_antennas, 3))
    bs[:, 1] = np.arange(bs_antennas) * bs_spacing
    return MisLayout(
        m_rows=int(m_rows), m_cols=int(m_cols),
        n_rows=int(n_rows), n_cols=int(n_cols),
        bs_antennas=int(bs_antennas),
        spacing=float(spacing), wavelength=float(wavelength),
        ms1_positions=_grid_positions(m_rows, m_cols, spacing),
        ms2_rel_positions=_grid_positions(n_rows, n_cols, spacing),
        bs_positions=bs,
    )


def enumerate_patterns(layout: MisLayout) -> list[BeamPattern]:
    """All U = (M_r - N_r + 1)(M_c - N_c + 1) overlap positions.

    Ordering follows u = (u_r - 1) * U_c + u_c, i.e. column displacement
    fastest.
    """
    n_r = np.repeat(np.arange(layout.n_rows), layout.n_cols)
    n_c = np.tile(np.arange(layout.n_cols), layout.n_rows)
    patterns = []
    u = 1
    for u_row in range(1, layout.shift_rows + 1):
        for u_col in range(1, layout.shift_cols + 1):
            index = (n_r + u_row - 1) * layout.m_cols + (n_c + u_col - 1)
            patterns.append(BeamPattern(
                u=u, u_row=u_row, u_col=u_col,
                num_ms1=layout.num_ms1,
                ms1_index=index.astype(np.intp),
            ))
            u += 1
    return patterns


def bare_pattern(num_ms1: int) -> BeamPattern:
    """Degenerate pattern with no MS2 at all: the single-layer surface.

    Every MS1 element is padded, so the composite phase vector reduces to
    the MS1 phases alone.
    """
    return BeamPattern(u=1, u_row=1, u_col=1, num_ms1=num_ms1,
                       ms1_index=np.zeros(0, dtype=np.intp))


def effective_phase(pattern: BeamPattern, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Composite two-layer phase vector v_u = (S_u theta + e_u) * phi.

    Both inputs must be unit-modulus; covered MS1 elements pick up the
    product of both layers' phases, uncovered ones keep only phi.
    """
    theta = np.asarray(theta, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (pattern.num_ms1,):
        raise ValueError(f"phi has shape {phi.shape}, expected ({pattern.num_ms1},)")
    if theta.shape != (pattern.num_ms2,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({pattern.num_ms2},)")
    for name, vec in [("theta", theta), ("phi", phi)]:
        if vec.size and np.max(np.abs(np.abs(vec) - 1.0)) > UNIT_MODULUS_TOL:
            raise ValueError(f"{name} is not unit-modulus within {UNIT_MODULUS_TOL}")
    return pattern.scatter(theta) * phi
