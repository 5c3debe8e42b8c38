"""Hybrid near/far-field channel synthesis for the steerable-antenna uplink.

Three components make up each user's effective channel:

* a direct user->BS channel: one attenuated line-of-sight ray plus a few
  scatterer bounces, planar wavefronts across the array, per-antenna
  amplitude gain that follows the antenna's deflection;
* a static user->panel channel: planar wavefronts with the element
  incidence gain (independent of antenna deflections);
* a panel->BS matrix with a true spherical wavefront: every
  (antenna, element) pair gets its own distance, phase and gain pair,
  because the BS sits inside the panel's near field.

The effective channel is ``h_k = h_direct_k + H_panel_bs @ diag(v) @
h_user_panel_k`` for a unit-modulus phase vector ``v``.

``ChannelWorkspace`` precomputes everything that does not depend on the
rotation state so that optimizer inner loops only pay for the
rotation-dependent factors.  The plain per-user functions
(:func:`direct_channel` and friends) are deliberately independent, direct
transcriptions of the model used to cross-check the vectorized path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import RotationState, boresight, boresight_jacobian, bs_layout, irs_layout, unit_direction
from .radiation import GainPattern, irs_element_gain, sqrt_gain, sqrt_gain_slope
from .scenario import ScenarioConfig

# Scatterer placement: sampled uniformly in fixed boxes between the
# endpoints, rejecting draws closer than the clearance to any node so path
# gains stay finite.
DIRECT_SCATTERER_BOX_M = ((-5.0, 5.0), (2.0, 8.0), (0.0, 3.0))
IRS_SCATTERER_BOX_M = ((-3.0, 3.0), (4.0, 12.0), (0.0, 3.0))
SCATTERER_CLEARANCE_M = 0.5
RCS_RANGE_M2 = (0.1, 1.0)

#: outward normal of the reflecting panel (y-z plane, facing the -x side,
#: which sees both the BS and the user region)
IRS_NORMAL = (-1.0, 0.0, 0.0)

UNIT_MODULUS_TOL = 1e-12


@dataclass(frozen=True)
class GeometryRealization:
    """One sampled drop: node positions, scatterers and their reflections.

    Fully determined by ``(config, seed)``; arrays are read-only so a
    realization can be shared freely across workers.
    """

    bs_positions: np.ndarray          # (M, 3)
    irs_positions: np.ndarray         # (N, 3)
    irs_normal: np.ndarray            # (3,)
    user_positions: np.ndarray        # (K, 3)
    direct_scatterer_positions: np.ndarray  # (L, 3)
    direct_scatterer_rcs_m2: np.ndarray     # (L,)
    direct_scatterer_phase_rad: np.ndarray  # (L,)
    irs_scatterer_positions: np.ndarray     # (P, 3)
    irs_scatterer_rcs_m2: np.ndarray        # (P,)
    irs_scatterer_phase_rad: np.ndarray     # (P,)
    seed: int

    def __post_init__(self):
        for f in (
            "bs_positions", "irs_positions", "irs_normal", "user_positions",
            "direct_scatterer_positions", "direct_scatterer_rcs_m2",
            "direct_scatterer_phase_rad", "irs_scatterer_positions",
            "irs_scatterer_rcs_m2", "irs_scatterer_phase_rad",
        ):
            arr = np.asarray(getattr(self, f), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, f, arr)

    @property
    def num_antennas(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def num_elements(self) -> int:
        return self.irs_positions.shape[0]

    @property
    def num_users(self) -> int:
        return self.user_positions.shape[0]


def _sample_clear_of_nodes(rng: np.random.Generator, count: int, box, nodes: np.ndarray) -> np.ndarray:
    """Uniform draws from ``box`` at least the clearance away from every node."""
    (x0, x1), (y0, y1), (z0, z1) = box
    low = np.array([x0, y0, z0])
    high = np.array([x1, y1, z1])
    out = np.empty((count, 3))
    for i in range(count):
        for _ in range(10_000):
            candidate = rng.uniform(low, high)
            if np.all(np.linalg.norm(nodes - candidate[None, :], axis=1) >= SCATTERER_CLEARANCE_M):
                out[i] = candidate
                break
        else:
            raise RuntimeError("could not place a scatterer clear of all nodes")
    return out


def generate_realization(cfg: ScenarioConfig) -> GeometryRealization:
    """Sample user and scatterer positions plus scatterer reflections.

    Deterministic given ``(cfg, cfg.seed)``: the same config reproduces the
    realization bit-exactly.  Draw order: users, direct scatterers, panel
    scatterers, then RCS and phase values for each group.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)

    xs = rng.uniform(cfg.user_region_x_m[0], cfg.user_region_x_m[1], cfg.num_users)
    ys = rng.uniform(cfg.user_region_y_m[0], cfg.user_region_y_m[1], cfg.num_users)
    users = np.column_stack([xs, ys, np.full(cfg.num_users, cfg.user_z_m)])

    nodes = np.vstack([
        np.asarray(cfg.bs_center_m, dtype=float)[None, :],
        np.asarray(cfg.irs_center_m, dtype=float)[None, :],
        users,
    ])
    direct_scat = _sample_clear_of_nodes(rng, cfg.num_direct_scatterers, DIRECT_SCATTERER_BOX_M, nodes)
    irs_scat = _sample_clear_of_nodes(rng, cfg.num_irs_scatterers, IRS_SCATTERER_BOX_M, nodes)

    direct_rcs = rng.uniform(*RCS_RANGE_M2, cfg.num_direct_scatterers)
    direct_phase = rng.uniform(-math.pi, math.pi, cfg.num_direct_scatterers)
    irs_rcs = rng.uniform(*RCS_RANGE_M2, cfg.num_irs_scatterers)
    irs_phase = rng.uniform(-math.pi, math.pi, cfg.num_irs_scatterers)

    return GeometryRealization(
        bs_positions=bs_layout(cfg).positions(),
        irs_positions=irs_layout(cfg).positions(),
        irs_normal=np.array(IRS_NORMAL),
        user_positions=users,
        direct_scatterer_positions=direct_scat,
        direct_scatterer_rcs_m2=direct_rcs,
        direct_scatterer_phase_rad=direct_phase,
        irs_scatterer_positions=irs_scat,
        irs_scatterer_rcs_m2=irs_rcs,
        irs_scatterer_phase_rad=irs_phase,
        seed=cfg.seed,
    )


# ----------------------------------------------------------------------
# elementary pieces
# ----------------------------------------------------------------------

def path_gain_los(distance: float, wavelength: float) -> complex:
    """Free-space amplitude ``lambda / (4 pi d)`` with propagation phase."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    mag = wavelength / (4.0 * math.pi * distance)
    return mag * np.exp(-2j * math.pi * distance / wavelength)


def path_gain_nlos(user_to_scatterer: float, scatterer_to_node: float,
                   rcs: float, phase: float, wavelength: float) -> complex:
    """Two-leg bounce amplitude scaled by the scatterer's sqrt(RCS)."""
    if user_to_scatterer <= 0 or scatterer_to_node <= 0:
        raise ValueError("path leg distances must be positive")
    if rcs <= 0:
        raise ValueError("radar cross section must be positive")
    mag = wavelength * math.sqrt(rcs) / (4.0 * math.pi * user_to_scatterer * scatterer_to_node)
    total = user_to_scatterer + scatterer_to_node
    return mag * np.exp(1j * (phase - 2.0 * math.pi * total / wavelength))


def _check_unit(direction) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return d


def bs_array_response(direction, bs_positions: np.ndarray, wavelength: float) -> np.ndarray:
    """Planar-wave phase offsets across the antenna array, unit modulus."""
    d = _check_unit(direction)
    return np.exp(2j * math.pi / wavelength * (bs_positions @ d))


def irs_array_response(direction, irs_positions: np.ndarray, panel_center,
                       wavelength: float) -> np.ndarray:
    """Planar-wave phase offsets across the panel, referenced to its center."""
    d = _check_unit(direction)
    offsets = irs_positions - np.asarray(panel_center, dtype=float)[None, :]
    return np.exp(2j * math.pi / wavelength * (offsets @ d))


# ----------------------------------------------------------------------
# per-user reference implementations
# ----------------------------------------------------------------------

def _direct_paths(user_index: int, geom: GeometryRealization, cfg: ScenarioConfig):
    """(complex gain, unit direction from BS) per direct-link path, ray first."""
    lam = cfg.wavelength_m
    b0 = np.asarray(cfg.bs_center_m, dtype=float)
    user = geom.user_positions[user_index]
    paths = [(path_gain_los(float(np.linalg.norm(user - b0)), lam), unit_direction(b0, user))]
    for pos, rcs, phase in zip(geom.direct_scatterer_positions,
                               geom.direct_scatterer_rcs_m2,
                               geom.direct_scatterer_phase_rad):
        gain = path_gain_nlos(float(np.linalg.norm(user - pos)),
                              float(np.linalg.norm(pos - b0)), rcs, phase, lam)
        paths.append((gain, unit_direction(b0, pos)))
    return paths


def direct_channel(rotation: RotationState, user_index: int,
                   geom: GeometryRealization, cfg: ScenarioConfig) -> np.ndarray:
    """Direct user->BS channel across all antennas for one user.

    Superposition of the blocked line-of-sight ray and the scatterer
    bounces; every path is weighted per antenna by the amplitude gain of
    that antenna's current deflection and scaled by the configured direct
    link attenuation.
    """
    pattern = GainPattern(cfg.bs_directivity)
    f = boresight(rotation.theta, rotation.phi)
    h = np.zeros(geom.num_antennas, dtype=complex)
    for gain, direction in _direct_paths(user_index, geom, cfg):
        amp = sqrt_gain(f @ direction, pattern)
        h += gain * amp * bs_array_response(direction, geom.bs_positions, cfg.wavelength_m)
    return cfg.direct_attenuation_amp * h


def user_irs_channel(user_index: int, geom: GeometryRealization,
                     cfg: ScenarioConfig) -> np.ndarray:
    """Static user->panel channel (independent of antenna deflections)."""
    lam = cfg.wavelength_m
    pattern = GainPattern(cfg.irs_directivity)
    r0 = np.asarray(cfg.irs_center_m, dtype=float)
    user = geom.user_positions[user_index]

    paths = [(path_gain_los(float(np.linalg.norm(user - r0)), lam), unit_direction(r0, user))]
    for pos, rcs, phase in zip(geom.irs_scatterer_positions,
                               geom.irs_scatterer_rcs_m2,
                               geom.irs_scatterer_phase_rad):
        gain = path_gain_nlos(float(np.linalg.norm(user - pos)),
                              float(np.linalg.norm(pos - r0)), rcs, phase, lam)
        paths.append((gain, unit_direction(r0, pos)))

    h = np.zeros(geom.num_elements, dtype=complex)
    for gain, direction in paths:
        cos_in = float(geom.irs_normal @ direction)
        amp = math.sqrt(irs_element_gain(cos_in, pattern))
        h += gain * amp * irs_array_response(direction, geom.irs_positions, r0, lam)
    return h


def irs_bs_channel(rotation: RotationState, geom: GeometryRealization,
                   cfg: ScenarioConfig) -> np.ndarray:
    """Panel->BS matrix with per-pair spherical-wave distances.

    Entry (m, n) combines free-space loss over the exact antenna-element
    distance with the antenna's arrival gain and the element's reflection
    gain; no shared steering vector is assumed.
    """
    lam = cfg.wavelength_m
    bs_pattern = GainPattern(cfg.bs_directivity)
    irs_pattern = GainPattern(cfg.irs_directivity)
    f = boresight(rotation.theta, rotation.phi)            # (M, 3)

    diff = geom.bs_positions[:, None, :] - geom.irs_positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)                   # (M, N)
    out_dir = diff / dist[..., None]                       # element -> antenna
    cos_out = out_dir @ geom.irs_normal
    cos_arr = -np.einsum("mi,mni->mn", f, out_dir)         # antenna -> element
    spherical = lam / (4.0 * math.pi * dist) * np.exp(-2j * math.pi * dist / lam)
    return spherical * sqrt_gain(cos_arr, bs_pattern) * sqrt_gain(cos_out, irs_pattern)


@dataclass(frozen=True)
class ChannelSet:
    """All channel components for one rotation state.

    ``direct`` and ``irs_bs`` depend on the rotation; ``user_irs`` never
    does.  ``cascaded[k] = irs_bs * user_irs[k]`` (columnwise), so the
    effective channel is linear in the phase vector.
    """

    direct: np.ndarray     # (K, M)
    irs_bs: np.ndarray     # (M, N)
    user_irs: np.ndarray   # (K, N)
    cascaded: np.ndarray   # (K, M, N)


def effective_channel(rotation: RotationState, phases: np.ndarray,
                      user_index: int, channels: ChannelSet) -> np.ndarray:
    """Effective channel ``h_d + cascaded @ v`` for one user."""
    v = np.asarray(phases)
    if v.shape != (channels.user_irs.shape[1],):
        raise ValueError(
            f"phase vector has length {v.shape}, panel has "
            f"{channels.user_irs.shape[1]} elements"
        )
    return channels.direct[user_index] + channels.cascaded[user_index] @ v


def channel_rotation_gradient(rotation: RotationState, phases: np.ndarray,
                              user_index: int, antenna_index: int,
                              geom: GeometryRealization, cfg: ScenarioConfig
                              ) -> tuple[complex, complex]:
    """Derivative of the effective channel's ``antenna_index`` entry with
    respect to that antenna's (theta, phi).

    All other entries of the gradient vector are exactly zero: each entry of
    the effective channel depends on its own antenna's deflection only.
    """
    m = antenna_index
    lam = cfg.wavelength_m
    bs_pattern = GainPattern(cfg.bs_directivity)
    irs_pattern = GainPattern(cfg.irs_directivity)
    theta_m = float(rotation.theta[m])
    phi_m = float(rotation.phi[m])
    j_theta, j_phi = boresight_jacobian(theta_m, phi_m)
    f_m = boresight(theta_m, phi_m)
    b_m = geom.bs_positions[m]

    d_theta = 0.0 + 0.0j
    d_phi = 0.0 + 0.0j
    for gain, direction in _direct_paths(user_index, geom, cfg):
        c = float(f_m @ direction)
        slope = sqrt_gain_slope(c, bs_pattern)
        response_m = np.exp(2j * math.pi / lam * float(direction @ b_m))
        common = cfg.direct_attenuation_amp * gain * slope * response_m
        d_theta += common * float(j_theta @ direction)
        d_phi += common * float(j_phi @ direction)

    if geom.num_elements and phases is not None:
        h_r = user_irs_channel(user_index, geom, cfg)
        diff = b_m[None, :] - geom.irs_positions                # (N, 3)
        dist = np.linalg.norm(diff, axis=1)
        out_dir = diff / dist[:, None]
        arr_dir = -out_dir
        sqrt_out = sqrt_gain(out_dir @ geom.irs_normal, irs_pattern)
        spherical = lam / (4.0 * math.pi * dist) * np.exp(-2j * math.pi * dist / lam)
        slope = sqrt_gain_slope(arr_dir @ f_m, bs_pattern)
        weights = spherical * sqrt_out * slope * h_r * np.asarray(phases)
        d_theta += complex(weights @ (arr_dir @ j_theta))
        d_phi += complex(weights @ (arr_dir @ j_phi))
    return complex(d_theta), complex(d_phi)


# ----------------------------------------------------------------------
# vectorized workspace
# ----------------------------------------------------------------------

class Assembled(NamedTuple):
    """Channels for one rotation state plus the intermediates the rotation
    gradient reuses."""

    effective: np.ndarray        # (K, M)
    direct: np.ndarray           # (K, M)
    irs_bs: np.ndarray | None    # (M, N)
    cos_direct: np.ndarray       # (M, K, L+1)
    cos_arrival: np.ndarray | None  # (M, N)


class ChannelWorkspace:
    """Rotation-independent precomputation for one scenario realization.

    With ``include_irs=False`` the panel is absent from the model entirely
    (effective channel equals the direct channel) and none of the
    panel-side arrays are built.
    """

    def __init__(self, cfg: ScenarioConfig, geom: GeometryRealization,
                 include_irs: bool = True):
        self.cfg = cfg
        self.geom = geom
        self.include_irs = bool(include_irs)
        self.wavelength = cfg.wavelength_m
        self.bs_pattern = GainPattern(cfg.bs_directivity)
        self.irs_pattern = GainPattern(cfg.irs_directivity)

        lam = self.wavelength
        b0 = np.asarray(cfg.bs_center_m, dtype=float)
        users = geom.user_positions
        num_users = geom.num_users
        num_scat = geom.direct_scatterer_positions.shape[0]

        # direct link: path 0 is the line-of-sight ray, then one per scatterer
        targets = np.concatenate([
            users[:, None, :],
            np.broadcast_to(geom.direct_scatterer_positions[None, :, :],
                            (num_users, num_scat, 3)),
        ], axis=1)                                           # (K, L+1, 3)
        vec = targets - b0[None, None, :]
        dist = np.linalg.norm(vec, axis=-1)
        self.direct_dirs = vec / dist[..., None]             # BS -> endpoint
        alpha = np.empty((num_users, num_scat + 1), dtype=complex)
        alpha[:, 0] = lam / (4.0 * math.pi * dist[:, 0]) * np.exp(-2j * math.pi * dist[:, 0] / lam)
        if num_scat:
            leg_user = np.linalg.norm(
                users[:, None, :] - geom.direct_scatterer_positions[None, :, :], axis=-1)
            leg_bs = dist[:, 1:]
            rcs = geom.direct_scatterer_rcs_m2[None, :]
            xi = geom.direct_scatterer_phase_rad[None, :]
            alpha[:, 1:] = (lam * np.sqrt(rcs) / (4.0 * math.pi * leg_user * leg_bs)
                            * np.exp(1j * (xi - 2.0 * math.pi * (leg_user + leg_bs) / lam)))
        self.direct_alpha = cfg.direct_attenuation_amp * alpha
        self.direct_response = np.exp(
            2j * math.pi / lam * np.einsum("kli,mi->klm", self.direct_dirs, geom.bs_positions))

        if self.include_irs:
            self.user_irs = np.stack(
                [user_irs_channel(k, geom, cfg) for k in range(num_users)])
            diff = geom.bs_positions[:, None, :] - geom.irs_positions[None, :, :]
            pair_dist = np.linalg.norm(diff, axis=-1)        # (M, N)
            out_dir = diff / pair_dist[..., None]
            self.arrival_dirs = -out_dir                      # antenna -> element
            self.irs_bs_static = (
                lam / (4.0 * math.pi * pair_dist)
                * np.exp(-2j * math.pi * pair_dist / lam)
                * sqrt_gain(out_dir @ geom.irs_normal, self.irs_pattern))
        else:
            self.user_irs = None
            self.arrival_dirs = None
            self.irs_bs_static = None

    # -- assembly ------------------------------------------------------
    def assemble(self, rotation: RotationState, phases: np.ndarray | None) -> Assembled:
        """Channels at ``rotation`` (and ``phases``, when the panel is in play)."""
        f = boresight(rotation.theta, rotation.phi)
        cos_direct = np.einsum("mi,kli->mkl", f, self.direct_dirs)
        amp_direct = sqrt_gain(cos_direct, self.bs_pattern)
        h_direct = np.einsum("kl,mkl,klm->km", self.direct_alpha, amp_direct,
                             self.direct_response)
        if not self.include_irs or phases is None:
            return Assembled(h_direct, h_direct, None, cos_direct, None)
        cos_arrival = np.einsum("mi,mni->mn", f, self.arrival_dirs)
        irs_bs = self.irs_bs_static * sqrt_gain(cos_arrival, self.bs_pattern)
        effective = h_direct + (self.user_irs * phases) @ irs_bs.T
        return Assembled(effective, h_direct, irs_bs, cos_direct, cos_arrival)

    def effective(self, rotation: RotationState, phases: np.ndarray | None) -> np.ndarray:
        return self.assemble(rotation, phases).effective

    def channel_set(self, rotation: RotationState) -> ChannelSet:
        if not self.include_irs:
            raise ValueError("workspace was built without the reflecting panel")
        ones = np.ones(self.geom.num_elements)
        asm = self.assemble(rotation, ones)
        cascaded = asm.irs_bs[None, :, :] * self.user_irs[:, None, :]
        return ChannelSet(direct=asm.direct, irs_bs=asm.irs_bs,
                          user_irs=self.user_irs.copy(), cascaded=cascaded)

    # -- rotation derivatives -------------------------------------------
    def rotation_gradient_entries(self, rotation: RotationState, asm: Assembled,
                                  phases: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero entries of the per-antenna channel derivatives.

        Returns two (K, M) arrays: element ``[k, m]`` is the m-th (only
        nonzero) entry of the derivative of user k's effective channel with
        respect to theta_m, respectively phi_m.
        """
        j_theta, j_phi = boresight_jacobian(rotation.theta, rotation.phi)
        slope_direct = sqrt_gain_slope(asm.cos_direct, self.bs_pattern)
        d_theta = np.einsum("kl,mkl,klm->km", self.direct_alpha,
                            slope_direct * np.einsum("mi,kli->mkl", j_theta, self.direct_dirs),
                            self.direct_response)
        d_phi = np.einsum("kl,mkl,klm->km", self.direct_alpha,
                          slope_direct * np.einsum("mi,kli->mkl", j_phi, self.direct_dirs),
                          self.direct_response)
        if self.include_irs and phases is not None:
            slope_arr = sqrt_gain_slope(asm.cos_arrival, self.bs_pattern)
            weighted = self.user_irs * phases                # (K, N)
            t_theta = self.irs_bs_static * slope_arr * np.einsum(
                "mi,mni->mn", j_theta, self.arrival_dirs)
            t_phi = self.irs_bs_static * slope_arr * np.einsum(
                "mi,mni->mn", j_phi, self.arrival_dirs)
            d_theta = d_theta + weighted @ t_theta.T
            d_phi = d_phi + weighted @ t_phi.T
        return d_theta, d_phi


def build_channel_set(rotation: RotationState, geom: GeometryRealization,
                      cfg: ScenarioConfig) -> ChannelSet:
    """All channel components for one rotation state."""
    return ChannelWorkspace(cfg, geom).channel_set(rotation)


# ----------------------------------------------------------------------
# debug dump
# ----------------------------------------------------------------------

def dump_channels_csv(channels: ChannelSet, path) -> None:
    """Write every channel entry as ``component,k,m,n,re,im`` rows.

    Index columns that do not apply to a component are left empty.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "k", "m", "n", "re", "im"])

        def emit(component, k, m, n, value):
            writer.writerow([component,
                             "" if k is None else k,
                             "" if m is None else m,
                             "" if n is None else n,
                             repr(float(value.real)), repr(float(value.imag))])

        num_users, num_ant = channels.direct.shape
        num_elem = channels.irs_bs.shape[1]
        for k in range(num_users):
            for m in range(num_ant):
                emit("direct", k, m, None, channels.direct[k, m])
        for m in range(num_ant):
            for n in range(num_elem):
                emit("irs_bs", None, m, n, channels.irs_bs[m, n])
        for k in range(num_users):
            for n in range(num_elem):
                emit("user_irs", k, None, n, channels.user_irs[k, n])
        for k in range(num_users):
            for m in range(num_ant):
                for n in range(num_elem):
                    emit("cascaded", k, m, n, channels.cascaded[k, m, n])
