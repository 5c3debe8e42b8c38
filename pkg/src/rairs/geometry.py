"""Coordinate frames: element grids, steerable boresights, field regions.

The base-station array lies in the x-z plane with its default boresight on
the +y axis; the reflecting panel lies in the y-z plane.  Deflections are
(theta, phi) with theta the tilt away from +y and phi the azimuth of the
tilt, both in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import ScenarioConfig

TAU = 2.0 * math.pi

_COINCIDENT_TOL = 1e-12


def boresight(theta, phi) -> np.ndarray:
    """Unit pointing vector for a deflection (theta, phi) off the +y axis.

    Accepts scalars or equal-shape arrays; returns shape ``(..., 3)``.
    ``theta=0`` gives ``[0, 1, 0]`` regardless of phi.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st, ct = np.sin(theta), np.cos(theta)
    return np.stack([st * np.cos(phi), ct, st * np.sin(phi)], axis=-1)


def boresight_jacobian(theta, phi) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of :func:`boresight` with respect to theta and phi.

    Returns ``(d_dtheta, d_dphi)``, each of shape ``(..., 3)``.  The phi
    derivative vanishes at theta=0, where azimuth is degenerate.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    d_theta = np.stack([ct * cp, -st, ct * sp], axis=-1)
    d_phi = np.stack([-st * sp, np.zeros_like(st), st * cp], axis=-1)
    return d_theta, d_phi


def unit_direction(start, end) -> np.ndarray:
    """Unit vector pointing from ``start`` to ``end``."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    diff = end - start
    norm = float(np.linalg.norm(diff))
    if norm < _COINCIDENT_TOL:
        raise ValueError("cannot take a direction between coincident points")
    return diff / norm


@dataclass(frozen=True)
class ArrayLayout:
    """Uniform planar grid of elements centered on ``center``.

    ``plane="xz"`` places axis 1 along x and axis 2 along z (antenna array);
    ``plane="yz"`` places axis 1 along y and axis 2 along z (reflecting
    panel).  Flat element index is ``a1 * count_axis2 + a2``.
    """

    count_axis1: int
    count_axis2: int
    spacing: float
    center: tuple[float, float, float]
    plane: str = "xz"

    def __post_init__(self):
        if self.plane not in ("xz", "yz"):
            raise ValueError(f"unsupported plane {self.plane!r}")
        if self.count_axis1 < 1 or self.count_axis2 < 1:
            raise ValueError("element counts must be positive")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def num_elements(self) -> int:
        return self.count_axis1 * self.count_axis2

    @property
    def aperture_diagonal(self) -> float:
        """Corner-to-corner extent of the grid; zero for a single element."""
        return self.spacing * math.hypot(self.count_axis1 - 1, self.count_axis2 - 1)

    def _axes(self) -> tuple[np.ndarray, np.ndarray]:
        if self.plane == "xz":
            return np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])
        return np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])

    def element_position(self, a1: int, a2: int) -> np.ndarray:
        if not (0 <= a1 < self.count_axis1 and 0 <= a2 < self.count_axis2):
            raise ValueError(
                f"element index ({a1}, {a2}) outside "
                f"{self.count_axis1}x{self.count_axis2} grid"
            )
        e1, e2 = self._axes()
        off1 = (a1 - (self.count_axis1 - 1) / 2.0) * self.spacing
        off2 = (a2 - (self.count_axis2 - 1) / 2.0) * self.spacing
        return np.asarray(self.center, dtype=float) + off1 * e1 + off2 * e2

    def positions(self) -> np.ndarray:
        """All element positions, shape ``(num_elements, 3)``."""
        e1, e2 = self._axes()
        idx1 = np.arange(self.count_axis1) - (self.count_axis1 - 1) / 2.0
        idx2 = np.arange(self.count_axis2) - (self.count_axis2 - 1) / 2.0
        grid = (
            idx1[:, None, None] * self.spacing * e1
            + idx2[None, :, None] * self.spacing * e2
        )
        return np.asarray(self.center, dtype=float) + grid.reshape(-1, 3)


def bs_layout(cfg: ScenarioConfig) -> ArrayLayout:
    return ArrayLayout(cfg.bs_dims[0], cfg.bs_dims[1], cfg.bs_pitch_m,
                       tuple(cfg.bs_center_m), plane="xz")


def irs_layout(cfg: ScenarioConfig) -> ArrayLayout:
    return ArrayLayout(cfg.irs_dims[0], cfg.irs_dims[1], cfg.irs_pitch_m,
                       tuple(cfg.irs_center_m), plane="yz")


def bs_antenna_position(m_x: int, m_z: int, layout: ArrayLayout) -> np.ndarray:
    """Position of antenna (m_x, m_z) in an x-z array."""
    if layout.plane != "xz":
        raise ValueError("antenna layout must lie in the x-z plane")
    return layout.element_position(m_x, m_z)


def irs_element_position(n_y: int, n_z: int, layout: ArrayLayout) -> np.ndarray:
    """Position of reflecting element (n_y, n_z) in a y-z panel."""
    if layout.plane != "yz":
        raise ValueError("panel layout must lie in the y-z plane")
    return layout.element_position(n_y, n_z)


@dataclass
class RotationState:
    """Per-antenna deflection angles (theta, phi).

    phi is stored canonically wrapped into [0, 2*pi); theta is kept as given
    (optimizers clamp it to the mechanical range).
    """

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        phi = np.mod(np.atleast_1d(np.asarray(self.phi, dtype=float)), TAU)
        if theta.shape != phi.shape or theta.ndim != 1:
            raise ValueError("theta and phi must be 1-d arrays of equal length")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @property
    def count(self) -> int:
        return self.theta.shape[0]

    @classmethod
    def zeros(cls, num_antennas: int) -> "RotationState":
        return cls(np.zeros(num_antennas), np.zeros(num_antennas))

    @classmethod
    def pointing_at(cls, positions: np.ndarray, target,
                    theta_limit: float | None = None) -> "RotationState":
        """Deflections that aim each antenna at ``target``.

        If ``theta_limit`` is given, tilts are clamped to the mechanical
        range (the azimuth is kept, so the boresight stays on the cone edge
        closest to the target).
        """
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        target = np.asarray(target, dtype=float)
        diff = target[None, :] - positions
        norms = np.linalg.norm(diff, axis=1)
        if np.any(norms < _COINCIDENT_TOL):
            raise ValueError("target coincides with an antenna position")
        dirs = diff / norms[:, None]
        theta = np.arccos(np.clip(dirs[:, 1], -1.0, 1.0))
        phi = np.arctan2(dirs[:, 2], dirs[:, 0])
        if theta_limit is not None:
            theta = np.minimum(theta, theta_limit)
        return cls(theta, phi)

    def clamped(self, theta_limit: float) -> "RotationState":
        return RotationState(np.clip(self.theta, 0.0, theta_limit), self.phi)

    def copy(self) -> "RotationState":
        return RotationState(self.theta.copy(), self.phi.copy())


def fraunhofer_distance(aperture_diagonal: float, wavelength: float) -> float:
    """Far-field boundary ``2 D^2 / wavelength`` for an aperture of diagonal D."""
    if aperture_diagonal <= 0:
        raise ValueError("aperture diagonal must be positive")
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    return 2.0 * aperture_diagonal**2 / wavelength


@dataclass
class FieldRegionReport:
    """Near/far-field classification of the nodes relative to the panel."""

    wavelength_m: float
    aperture_diagonal_m: float
    fraunhofer_m: float
    bs_distance_m: float
    bs_in_near_field: bool
    user_distances_m: np.ndarray
    users_in_far_field: np.ndarray
    warnings: list[str] = field(default_factory=list)

    @property
    def all_expected(self) -> bool:
        return not self.warnings


def validate_field_regions(geom, cfg: ScenarioConfig) -> FieldRegionReport:
    """Check that the BS sits within, and the users beyond, the panel's
    far-field boundary.

    Violations are reported as warnings, not errors: the channel formulas
    stay evaluable either way, the model assumptions just stop matching.
    """
    lam = cfg.wavelength_m
    diag = irs_layout(cfg).aperture_diagonal
    d_f = fraunhofer_distance(diag, lam) if diag > 0 else 0.0
    r0 = np.asarray(cfg.irs_center_m, dtype=float)
    bs_distance = float(np.linalg.norm(np.asarray(cfg.bs_center_m) - r0))
    user_distances = np.linalg.norm(geom.user_positions - r0[None, :], axis=1)

    bs_near = bs_distance < d_f
    users_far = user_distances > d_f
    warnings = []
    if not bs_near:
        warnings.append(
            f"BS at {bs_distance:.3f} m is not inside the near-field "
            f"boundary {d_f:.3f} m"
        )
    for k in np.flatnonzero(~users_far):
        warnings.append(
            f"user {k} at {user_distances[k]:.3f} m is inside the "
            f"near-field boundary {d_f:.3f} m"
        )
    return FieldRegionReport(
        wavelength_m=lam,
        aperture_diagonal_m=diag,
        fraunhofer_m=d_f,
        bs_distance_m=bs_distance,
        bs_in_near_field=bs_near,
        user_distances_m=user_distances,
        users_in_far_field=users_far,
        warnings=warnings,
    )
