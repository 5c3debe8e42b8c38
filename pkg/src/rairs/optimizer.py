"""Sum-rate maximization by alternating block updates.

Three blocks cycle until the rate stalls:

* antenna deflections via projected gradient ascent (box-clamped tilt,
  periodic azimuth, Armijo backtracking, zero subgradient at the gain
  cutoff);
* receive beamformer in closed form (regularized per-user combiner, the
  exact maximizer of every user's SINR for fixed channels);
* panel phases via a fractional-programming surrogate: closed-form
  auxiliary update, then conjugate-gradient ascent on the unit-modulus
  circle manifold.

Every block is monotone, so the recorded rate trajectory never decreases
beyond rounding.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields, replace
from enum import Enum

import numpy as np

from .channel import ChannelWorkspace, GeometryRealization, generate_realization, UNIT_MODULUS_TOL
from .geometry import RotationState
from .scenario import ScenarioConfig, ConfigError

LN2 = math.log(2.0)

#: smallest admissible surrogate log argument; trial steps below it are rejected
SURROGATE_FLOOR = 1e-12


class Scheme(str, Enum):
    """Benchmark schemes: full system, frozen antennas, or no panel."""

    RA_IRS = "ra_irs"
    FIXED_IRS = "fixed_irs"
    RA_ONLY = "ra_only"


@dataclass(frozen=True)
class PgaConfig:
    max_iters: int = 100
    grad_tol: float = 1e-6
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 30


@dataclass(frozen=True)
class FpConfig:
    outer_rounds: int = 20
    tol: float = 1e-4


@dataclass(frozen=True)
class RcgConfig:
    max_iters: int = 50
    grad_tol: float = 1e-6
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 30


@dataclass(frozen=True)
class OptimizerConfig:
    """Stopping rules and line-search constants for all blocks."""

    outer_tol: float = 1e-3
    outer_max_iters: int = 50
    pga: PgaConfig = field(default_factory=PgaConfig)
    fp: FpConfig = field(default_factory=FpConfig)
    rcg: RcgConfig = field(default_factory=RcgConfig)
    phase_init: str = "ones"      # "ones" or "random"
    num_restarts: int = 1

    def validate(self) -> "OptimizerConfig":
        if self.outer_tol <= 0 or self.outer_max_iters < 1:
            raise ConfigError("optimizer", "outer tolerance and iteration cap must be positive")
        for block in (self.pga, self.rcg):
            if not 0.0 < block.armijo_c1 < 1.0:
                raise ConfigError("armijo_c1", "must lie in (0, 1)")
            if not 0.0 < block.armijo_shrink < 1.0:
                raise ConfigError("armijo_shrink", "must lie in (0, 1)")
            if block.initial_step <= 0 or block.max_iters < 1 or block.max_backtracks < 1:
                raise ConfigError("optimizer", "line-search parameters must be positive")
        if self.fp.outer_rounds < 1 or self.fp.tol <= 0:
            raise ConfigError("fp", "rounds and tolerance must be positive")
        if self.phase_init not in ("ones", "random"):
            raise ConfigError("phase_init", "must be 'ones' or 'random'")
        if self.num_restarts < 1:
            raise ConfigError("num_restarts", "must be at least 1")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerConfig":
        kwargs = {}
        for key, value in data.items():
            if key == "pga":
                kwargs[key] = PgaConfig(**value)
            elif key == "fp":
                kwargs[key] = FpConfig(**value)
            elif key == "rcg":
                kwargs[key] = RcgConfig(**value)
            elif key in {f.name for f in fields(cls)}:
                kwargs[key] = value
            else:
                raise ConfigError(key, "unknown optimizer field")
        return cls(**kwargs).validate()


class UplinkProblem:
    """One scenario realization with its channel workspace and power levels."""

    def __init__(self, cfg: ScenarioConfig, geom: GeometryRealization | None = None,
                 include_irs: bool = True):
        cfg.validate()
        self.cfg = cfg
        self.geom = geom if geom is not None else generate_realization(cfg)
        self.workspace = ChannelWorkspace(cfg, self.geom, include_irs=include_irs)
        self.include_irs = include_irs
        self.powers_w = cfg.user_powers_w()
        self.noise_w = cfg.noise_w

    @property
    def num_users(self) -> int:
        return self.geom.num_users

    @property
    def num_antennas(self) -> int:
        return self.geom.num_antennas

    @property
    def num_elements(self) -> int:
        return self.geom.num_elements

    def effective_channels(self, rotation: RotationState, phases: np.ndarray | None) -> np.ndarray:
        return self.workspace.effective(rotation, phases)


# ----------------------------------------------------------------------
# rate evaluation
# ----------------------------------------------------------------------

def _rate_terms(beamformer: np.ndarray, channels: np.ndarray,
                powers_w: np.ndarray, noise_w: float):
    """Per-user SINR pieces for combiner columns ``beamformer[:, k]``.

    Returns ``(gamma, cross, denom)`` where ``cross[j, k]`` is user j's
    channel filtered by combiner k and ``denom`` the interference-plus-noise
    power.  A zero combiner column yields gamma 0 rather than a division
    error.
    """
    cross = channels @ beamformer.conj()              # (K, K)
    weighted = powers_w[:, None] * np.abs(cross) ** 2
    signal = np.diagonal(weighted).copy()
    noise_terms = noise_w * np.sum(np.abs(beamformer) ** 2, axis=0)
    denom = weighted.sum(axis=0) - signal + noise_terms
    gamma = np.divide(signal, denom, out=np.zeros_like(signal), where=denom > 0)
    return gamma, cross, denom


def sinr(beamformer: np.ndarray, channels: np.ndarray, powers_w: np.ndarray,
         noise_w: float, user: int) -> float:
    """SINR of one user after linear combining.

    ``channels`` holds the effective channels as rows.  Invariant under
    rescaling of the user's combiner and under a common scaling of all
    powers and the noise.
    """
    w = beamformer[:, user]
    if not np.any(w):
        raise ValueError(f"combiner column {user} is identically zero")
    desired = powers_w[user] * abs(np.vdot(w, channels[user])) ** 2
    interference = sum(
        powers_w[j] * abs(np.vdot(w, channels[j])) ** 2
        for j in range(channels.shape[0]) if j != user
    )
    return desired / (interference + noise_w * float(np.vdot(w, w).real))


def sum_rate_from_channels(beamformer: np.ndarray, channels: np.ndarray,
                           powers_w: np.ndarray, noise_w: float) -> float:
    gamma, _, _ = _rate_terms(beamformer, channels, powers_w, noise_w)
    return float(np.sum(np.log2(1.0 + gamma)))


def sum_rate(beamformer: np.ndarray, rotation: RotationState,
             phases: np.ndarray | None, problem: UplinkProblem) -> float:
    """Achievable sum rate in bps/Hz at the given operating point."""
    channels = problem.effective_channels(rotation, phases)
    return sum_rate_from_channels(beamformer, channels, problem.powers_w, problem.noise_w)


def per_user_sinr(beamformer: np.ndarray, channels: np.ndarray,
                  powers_w: np.ndarray, noise_w: float) -> np.ndarray:
    gamma, _, _ = _rate_terms(beamformer, channels, powers_w, noise_w)
    return gamma


# ----------------------------------------------------------------------
# receive beamforming
# ----------------------------------------------------------------------

def mmse_from_channels(channels: np.ndarray, powers_w: np.ndarray,
                       noise_w: float) -> np.ndarray:
    """Closed-form per-user combiners ``(sum_j P_j h_j h_j^H + noise I)^-1 h_k``."""
    num_antennas = channels.shape[1]
    covariance = (channels.T * powers_w) @ channels.conj()
    covariance += noise_w * np.eye(num_antennas)
    return np.linalg.solve(covariance, channels.T)


def mmse_beamformer(rotation: RotationState, phases: np.ndarray | None,
                    problem: UplinkProblem) -> np.ndarray:
    """Combiner matrix (columns per user) maximizing each user's SINR."""
    channels = problem.effective_channels(rotation, phases)
    return mmse_from_channels(channels, problem.powers_w, problem.noise_w)


# ----------------------------------------------------------------------
# rotation block (projected gradient ascent)
# ----------------------------------------------------------------------

def _rotation_gradient(beamformer, rotation, phases, problem, asm):
    """Sum-rate gradient, (M, 2) columns (d/dtheta, d/dphi)."""
    powers = problem.powers_w
    gamma, cross, denom = _rate_terms(beamformer, asm.effective, powers, problem.noise_w)
    d_theta, d_phi = problem.workspace.rotation_gradient_entries(rotation, asm, phases)
    weighted_cross = powers[:, None] * cross.conj()            # (K, K) [j, k]
    combiner_rows = beamformer.conj().T                        # (K, M) [k, m]
    coeff = np.divide(2.0, LN2 * (1.0 + gamma) * denom,
                      out=np.zeros_like(gamma), where=denom > 0)
    idx = np.arange(gamma.shape[0])

    def accumulate(entries):
        # contributions[j, k, m] = Re{P_j conj(cross_jk) conj(w_km) dh_jm}
        contributions = (weighted_cross[:, :, None]
                         * combiner_rows[None, :, :]
                         * entries[:, None, :]).real
        own = contributions[idx, idx, :]                       # j == k
        interference = contributions.sum(axis=0) - own
        return (coeff[:, None] * (own - gamma[:, None] * interference)).sum(axis=0)

    return np.stack([accumulate(d_theta), accumulate(d_phi)], axis=1)


def rate_rotation_gradient(beamformer: np.ndarray, rotation: RotationState,
                           phases: np.ndarray | None, problem: UplinkProblem) -> np.ndarray:
    """Gradient of the sum rate with respect to every (theta_m, phi_m).

    Uses the zero-subgradient convention wherever a path sits at or behind
    an antenna's gain cutoff.
    """
    asm = problem.workspace.assemble(rotation, phases)
    return _rotation_gradient(beamformer, rotation, phases, problem, asm)


def _projected_gradient(gradient: np.ndarray, rotation: RotationState,
                        theta_limit: float) -> np.ndarray:
    """Zero the tilt components that push against an active bound."""
    projected = gradient.copy()
    at_lower = (rotation.theta <= 0.0) & (gradient[:, 0] < 0.0)
    at_upper = (rotation.theta >= theta_limit) & (gradient[:, 0] > 0.0)
    projected[at_lower | at_upper, 0] = 0.0
    return projected


@dataclass
class PgaInfo:
    iterations: int = 0
    steps_accepted: int = 0
    final_rate: float = 0.0


def optimize_rotations(beamformer: np.ndarray, rotation: RotationState,
                       phases: np.ndarray | None, problem: UplinkProblem,
                       cfg: PgaConfig | None = None) -> tuple[RotationState, PgaInfo]:
    """Projected gradient ascent over the deflection angles.

    Tilts are clamped to [0, theta_max], azimuths wrap periodically.  Each
    accepted step satisfies an Armijo sufficient-increase test against the
    projected displacement, so the rate never decreases.  Returns the last
    iterate (the initial state if the gradient already vanishes).
    """
    cfg = cfg or PgaConfig()
    theta_limit = problem.cfg.theta_max_rad
    workspace = problem.workspace
    current = rotation.clamped(theta_limit)
    asm = workspace.assemble(current, phases)
    rate = sum_rate_from_channels(beamformer, asm.effective, problem.powers_w, problem.noise_w)
    info = PgaInfo(final_rate=rate)

    for _ in range(cfg.max_iters):
        info.iterations += 1
        gradient = _rotation_gradient(beamformer, current, phases, problem, asm)
        projected = _projected_gradient(gradient, current, theta_limit)
        if np.linalg.norm(projected) < cfg.grad_tol:
            break

        step = cfg.initial_step
        accepted = False
        for _ in range(cfg.max_backtracks):
            theta_new = np.clip(current.theta + step * gradient[:, 0], 0.0, theta_limit)
            candidate = RotationState(theta_new, current.phi + step * gradient[:, 1])
            # ascent measured along the projected move (wrap is an isometry,
            # so the azimuth displacement is just the raw step)
            increase = (gradient[:, 0] @ (theta_new - current.theta)
                        + step * (gradient[:, 1] @ gradient[:, 1]))
            if increase <= 0.0:
                break
            asm_new = workspace.assemble(candidate, phases)
            rate_new = sum_rate_from_channels(beamformer, asm_new.effective,
                                              problem.powers_w, problem.noise_w)
            if rate_new >= rate + cfg.armijo_c1 * increase:
                current, asm, rate = candidate, asm_new, rate_new
                info.steps_accepted += 1
                accepted = True
                break
            step *= cfg.armijo_shrink
        if not accepted:
            break

    info.final_rate = rate
    return current, info


# ----------------------------------------------------------------------
# phase block (fractional programming + conjugate gradient on the circle)
# ----------------------------------------------------------------------

@dataclass
class PhaseContext:
    """Quantities fixed during the phase block (combiner and rotations frozen).

    For combiner k and user j the filtered channel is affine in the phase
    vector: ``t_kj(v) = direct[k, j] + coupling[k, j] . conj -> v``; the
    context stores ``coupling`` so that both the objective and its gradient
    are cheap in v.
    """

    direct: np.ndarray        # (K, K) combiner_k^H h_direct_j
    coupling: np.ndarray      # (K, K, N) q_kj with t = direct + q^H v
    noise_terms: np.ndarray   # (K,) noise * ||w_k||^2
    powers_w: np.ndarray      # (K,)

    @property
    def num_elements(self) -> int:
        return self.coupling.shape[2]

    def filtered(self, phases: np.ndarray) -> np.ndarray:
        flat = self.coupling.conj().reshape(-1, self.coupling.shape[2])
        return self.direct + (flat @ phases).reshape(self.direct.shape)

    def signal_interference(self, phases: np.ndarray):
        t = self.filtered(phases)
        weighted = self.powers_w[None, :] * np.abs(t) ** 2     # [k, j]
        signal = np.diagonal(weighted).copy()
        interference = weighted.sum(axis=1) - signal + self.noise_terms
        return t, signal, interference

    def sum_rate(self, phases: np.ndarray) -> float:
        _, signal, interference = self.signal_interference(phases)
        return float(np.sum(np.log2(1.0 + signal / interference)))


def build_phase_context(beamformer: np.ndarray, rotation: RotationState,
                        problem: UplinkProblem) -> PhaseContext:
    asm = problem.workspace.assemble(rotation, np.ones(problem.num_elements))
    direct = (asm.direct @ beamformer.conj()).T            # [k, j]
    filtered_panel = asm.irs_bs.conj().T @ beamformer      # (N, K)
    coupling = np.einsum("jn,nk->kjn", problem.workspace.user_irs.conj(), filtered_panel)
    noise_terms = problem.noise_w * np.sum(np.abs(beamformer) ** 2, axis=0)
    return PhaseContext(direct=direct, coupling=coupling,
                        noise_terms=noise_terms, powers_w=problem.powers_w)


def _betas_from_context(ctx: PhaseContext, phases: np.ndarray) -> np.ndarray:
    t, _, interference = ctx.signal_interference(phases)
    desired = np.sqrt(ctx.powers_w) * np.diagonal(t)
    return desired.conj() / interference


def fp_beta_update(beamformer: np.ndarray, rotation: RotationState,
                   phases: np.ndarray, problem: UplinkProblem) -> np.ndarray:
    """Closed-form auxiliary variables ``conj(a_k) / I_k``.

    At this point the per-user surrogate term equals ``log2(1 + SINR_k)``
    exactly, so the surrogate touches the true sum rate.
    """
    ctx = build_phase_context(beamformer, rotation, problem)
    return _betas_from_context(ctx, phases)


def surrogate_terms(ctx: PhaseContext, phases: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Per-user surrogate log arguments ``1 + 2 Re{beta_k a_k} - |beta_k|^2 I_k``."""
    t, _, interference = ctx.signal_interference(phases)
    desired = np.sqrt(ctx.powers_w) * np.diagonal(t)
    return 1.0 + 2.0 * (betas * desired).real - np.abs(betas) ** 2 * interference


def surrogate_value(ctx: PhaseContext, phases: np.ndarray, betas: np.ndarray) -> float:
    return float(np.sum(np.log2(surrogate_terms(ctx, phases, betas))))


def phase_euclidean_gradient(ctx: PhaseContext, phases: np.ndarray,
                             betas: np.ndarray) -> np.ndarray:
    """Gradient of the surrogate in conjugate coordinates.

    The complex vector whose real/imaginary parts are the partial
    derivatives of the surrogate with respect to the real/imaginary parts
    of each phase entry.
    """
    t = ctx.filtered(phases)
    num_users = t.shape[0]
    idx = np.arange(num_users)
    desired = np.sqrt(ctx.powers_w) * t[idx, idx]
    weighted = ctx.powers_w[None, :] * np.abs(t) ** 2
    interference = weighted.sum(axis=1) - np.diagonal(weighted) + ctx.noise_terms
    args = 1.0 + 2.0 * (betas * desired).real - np.abs(betas) ** 2 * interference

    lead = np.sqrt(ctx.powers_w) * betas.conj() / args         # (K,)
    term_signal = lead @ ctx.coupling[idx, idx, :]
    cross_w = (np.abs(betas) ** 2 / args)[:, None] * ctx.powers_w[None, :] * t
    cross_w[idx, idx] = 0.0
    term_interf = np.einsum("kj,kjn->n", cross_w, ctx.coupling)
    return (2.0 / LN2) * (term_signal - term_interf)


def tangent_project(vector: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Remove the radial component so the vector is tangent to the circle
    manifold at ``phases``."""
    return vector - (vector * phases.conj()).real * phases


def _retract(phases: np.ndarray) -> np.ndarray:
    return phases / np.abs(phases)


@dataclass
class RcgInfo:
    iterations: int = 0
    final_value: float = 0.0
    grad_norm: float = 0.0


def rcg_inner(phases_init: np.ndarray, betas: np.ndarray, ctx: PhaseContext,
              cfg: RcgConfig | None = None) -> tuple[np.ndarray, RcgInfo]:
    """Maximize the fixed-auxiliary surrogate over unit-modulus phases.

    Polak-Ribiere conjugate directions in the tangent space, entrywise
    normalization as the retraction, Armijo backtracking on the surrogate.
    Trial steps that push any log argument to the positivity floor are
    rejected and halved.
    """
    cfg = cfg or RcgConfig()
    v = np.asarray(phases_init, dtype=complex)
    if np.max(np.abs(np.abs(v) - 1.0)) > 1e-9:
        raise ValueError("initial phases must have unit modulus")
    args = surrogate_terms(ctx, v, betas)
    if np.any(args <= SURROGATE_FLOOR):
        raise ValueError("surrogate argument non-positive at the initial phases")
    value = float(np.sum(np.log2(args)))

    grad = tangent_project(phase_euclidean_gradient(ctx, v, betas), v)
    direction = grad
    grad_sq = float(np.sum((grad.conj() * grad).real))
    info = RcgInfo(final_value=value, grad_norm=math.sqrt(grad_sq))

    for _ in range(cfg.max_iters):
        if math.sqrt(grad_sq) < cfg.grad_tol:
            break
        info.iterations += 1
        slope = float(np.sum((grad.conj() * direction).real))
        if slope <= 0.0:
            direction = grad
            slope = grad_sq

        step = cfg.initial_step
        accepted = False
        for _ in range(cfg.max_backtracks):
            v_new = _retract(v + step * direction)
            args_new = surrogate_terms(ctx, v_new, betas)
            if np.all(args_new > SURROGATE_FLOOR):
                value_new = float(np.sum(np.log2(args_new)))
                if value_new >= value + cfg.armijo_c1 * step * slope:
                    accepted = True
                    break
            step *= cfg.armijo_shrink
        if not accepted:
            break

        grad_new = tangent_project(phase_euclidean_gradient(ctx, v_new, betas), v_new)
        transported = tangent_project(grad, v_new)
        grad_new_sq = float(np.sum((grad_new.conj() * grad_new).real))
        mix = float(np.sum((grad_new.conj() * (grad_new - transported)).real))
        beta_pr = max(0.0, mix / grad_sq) if grad_sq > 0 else 0.0
        direction = grad_new + beta_pr * tangent_project(direction, v_new)
        v, value, grad, grad_sq = v_new, value_new, grad_new, grad_new_sq

    info.final_value = value
    info.grad_norm = math.sqrt(grad_sq)
    return v, info


@dataclass
class FpInfo:
    rounds: int = 0
    rcg_iterations: int = 0
    identity_error: float = 0.0
    modulus_error: float = 0.0
    final_rate: float = 0.0


def optimize_phases(beamformer: np.ndarray, rotation: RotationState,
                    phases_init: np.ndarray, problem: UplinkProblem,
                    fp_cfg: FpConfig | None = None,
                    rcg_cfg: RcgConfig | None = None) -> tuple[np.ndarray, FpInfo]:
    """Alternate auxiliary updates with manifold conjugate-gradient rounds.

    Stops once a round improves the surrogate by less than the tolerance or
    the round budget is exhausted.  The true sum rate is non-decreasing
    across rounds because each auxiliary update re-tightens the surrogate.
    """
    fp_cfg = fp_cfg or FpConfig()
    rcg_cfg = rcg_cfg or RcgConfig()
    v = np.asarray(phases_init, dtype=complex)
    if np.max(np.abs(np.abs(v) - 1.0)) > 1e-9:
        raise ValueError("initial phases must have unit modulus")

    ctx = build_phase_context(beamformer, rotation, problem)
    info = FpInfo()
    for _ in range(fp_cfg.outer_rounds):
        info.rounds += 1
        betas = _betas_from_context(ctx, v)
        tight = surrogate_value(ctx, v, betas)
        info.identity_error = max(info.identity_error,
                                  abs(tight - ctx.sum_rate(v)))
        v, rcg_info = rcg_inner(v, betas, ctx, rcg_cfg)
        info.rcg_iterations += rcg_info.iterations
        info.modulus_error = max(info.modulus_error,
                                 float(np.max(np.abs(np.abs(v) - 1.0))))
        if rcg_info.final_value - tight < fp_cfg.tol:
            break
    info.final_rate = ctx.sum_rate(v)
    return v, info


# ----------------------------------------------------------------------
# alternating driver
# ----------------------------------------------------------------------

@dataclass
class SolveReport:
    """Outcome of one alternating-optimization run."""

    scheme: str
    sum_rate_bpshz: float
    sum_rate_trajectory: list[float]
    per_user_sinr: np.ndarray
    iterations_used: int
    converged: bool
    wall_time_s: float
    pga_steps_accepted: int
    rcg_iterations: int
    fp_rounds: int
    fp_identity_error: float
    phase_modulus_error: float
    theta_range_rad: tuple[float, float]
    rotation: RotationState
    phases: np.ndarray | None
    beamformer: np.ndarray

    def trajectory_is_monotone(self, slack: float = 1e-9) -> bool:
        traj = self.sum_rate_trajectory
        return all(traj[i + 1] >= traj[i] - slack for i in range(len(traj) - 1))

    def summary_lines(self, include_timing: bool = True) -> list[str]:
        lines = [
            f"scheme: {self.scheme}",
            f"sum_rate_bpshz: {self.sum_rate_bpshz!r}",
            f"iterations_used: {self.iterations_used}",
            f"converged: {str(self.converged).lower()}",
            f"per_user_sinr: {' '.join(repr(float(s)) for s in self.per_user_sinr)}",
            f"pga_steps_accepted: {self.pga_steps_accepted}",
            f"rcg_iterations: {self.rcg_iterations}",
            f"fp_rounds: {self.fp_rounds}",
            f"fp_identity_error: {self.fp_identity_error!r}",
            f"phase_modulus_error: {self.phase_modulus_error!r}",
            f"theta_range_deg: {math.degrees(self.theta_range_rad[0])!r}"
            f" {math.degrees(self.theta_range_rad[1])!r}",
        ]
        if include_timing:
            lines.append(f"wall_time_s: {self.wall_time_s:.6f}")
        return lines


def initial_rotation(problem: UplinkProblem, scheme: Scheme) -> RotationState:
    """Frozen antennas stay on the default boresight; steerable schemes start
    aimed at the panel center (clamped to the mechanical range)."""
    if scheme is Scheme.FIXED_IRS:
        return RotationState.zeros(problem.num_antennas)
    return RotationState.pointing_at(problem.geom.bs_positions,
                                     problem.cfg.irs_center_m,
                                     problem.cfg.theta_max_rad)


def _initial_phases(problem: UplinkProblem, opt: OptimizerConfig,
                    restart: int) -> np.ndarray:
    if opt.phase_init == "ones" and restart == 0:
        return np.ones(problem.num_elements, dtype=complex)
    rng = np.random.default_rng(problem.cfg.seed + 7919 * (restart + 1))
    return np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, problem.num_elements))


def _solve_once(problem: UplinkProblem, opt: OptimizerConfig, scheme: Scheme,
                rotation_init: RotationState | None, restart: int) -> SolveReport:
    start = time.perf_counter()
    use_phases = scheme is not Scheme.RA_ONLY
    rotation = (rotation_init.clamped(problem.cfg.theta_max_rad)
                if rotation_init is not None else initial_rotation(problem, scheme))
    phases = _initial_phases(problem, opt, restart) if use_phases else None

    beamformer = mmse_beamformer(rotation, phases, problem)
    trajectory: list[float] = []
    converged = False
    pga_steps = rcg_iters = fp_rounds = 0
    identity_err = modulus_err = 0.0
    theta_lo = float(np.min(rotation.theta))
    theta_hi = float(np.max(rotation.theta))
    previous = -math.inf

    for _ in range(opt.outer_max_iters):
        if scheme is not Scheme.FIXED_IRS:
            rotation, pga_info = optimize_rotations(beamformer, rotation, phases,
                                                    problem, opt.pga)
            pga_steps += pga_info.steps_accepted
            theta_lo = min(theta_lo, float(np.min(rotation.theta)))
            theta_hi = max(theta_hi, float(np.max(rotation.theta)))
        beamformer = mmse_beamformer(rotation, phases, problem)
        if use_phases:
            phases, fp_info = optimize_phases(beamformer, rotation, phases,
                                              problem, opt.fp, opt.rcg)
            fp_rounds += fp_info.rounds
            rcg_iters += fp_info.rcg_iterations
            identity_err = max(identity_err, fp_info.identity_error)
            modulus_err = max(modulus_err, fp_info.modulus_error)

        channels = problem.effective_channels(rotation, phases)
        gamma = per_user_sinr(beamformer, channels, problem.powers_w, problem.noise_w)
        rate = float(np.sum(np.log2(1.0 + gamma)))
        trajectory.append(rate)
        if abs(rate - previous) < opt.outer_tol:
            converged = True
            break
        previous = rate

    return SolveReport(
        scheme=scheme.value,
        sum_rate_bpshz=trajectory[-1],
        sum_rate_trajectory=trajectory,
        per_user_sinr=gamma,
        iterations_used=len(trajectory),
        converged=converged,
        wall_time_s=time.perf_counter() - start,
        pga_steps_accepted=pga_steps,
        rcg_iterations=rcg_iters,
        fp_rounds=fp_rounds,
        fp_identity_error=identity_err,
        phase_modulus_error=modulus_err,
        theta_range_rad=(theta_lo, theta_hi),
        rotation=rotation,
        phases=phases,
        beamformer=beamformer,
    )


def ao_solve(scenario: ScenarioConfig, opt: OptimizerConfig | None = None,
             scheme: Scheme = Scheme.RA_IRS,
             realization: GeometryRealization | None = None,
             rotation_init: RotationState | None = None) -> SolveReport:
    """Run the alternating optimization for one scenario and scheme.

    Blocks run in the order rotations, combiner, phases each outer
    iteration; the loop stops when the rate changes by less than the outer
    tolerance or the iteration cap is reached.  ``FIXED_IRS`` keeps the
    antennas on the default boresight; ``RA_ONLY`` removes the panel from
    the model entirely, so its result is independent of the panel size.
    """
    opt = (opt or OptimizerConfig()).validate()
    problem = UplinkProblem(scenario, geom=realization,
                            include_irs=(scheme is not Scheme.RA_ONLY))
    best: SolveReport | None = None
    restarts = opt.num_restarts if scheme is not Scheme.RA_ONLY else 1
    for restart in range(restarts):
        report = _solve_once(problem, opt, scheme, rotation_init, restart)
        if best is None or report.sum_rate_bpshz > best.sum_rate_bpshz:
            best = report
    return best


# ----------------------------------------------------------------------
# gradient self-check
# ----------------------------------------------------------------------

@dataclass
class GradientCheckResult:
    rotation_worst: float
    phase_worst: float
    rotation_tol: float
    phase_tol: float
    num_states: int
    worst_rotation_state: int
    worst_phase_state: int
    elapsed_s: float

    @property
    def passed(self) -> bool:
        return self.rotation_worst < self.rotation_tol and self.phase_worst < self.phase_tol


def gradient_check(cfg: ScenarioConfig, num_states: int = 100, seed: int = 0,
                   step: float = 1e-6, rotation_tol: float = 1e-4,
                   phase_tol: float = 1e-5, corruption: float = 0.0
                   ) -> GradientCheckResult:
    """Compare analytic gradients with central finite differences.

    Random interior states only: tilts are sampled away from the box bounds
    where the projection is non-differentiable.  ``corruption`` injects a
    relative error into the analytic values (negative-control hook).
    """
    start = time.perf_counter()
    problem = UplinkProblem(cfg)
    rng = np.random.default_rng(seed)
    margin = 0.05
    rot_worst, rot_state = 0.0, -1
    ph_worst, ph_state = 0.0, -1

    for state in range(num_states):
        theta = rng.uniform(margin, cfg.theta_max_rad - margin, problem.num_antennas)
        phi = rng.uniform(0.0, 2.0 * math.pi, problem.num_antennas)
        rotation = RotationState(theta, phi)
        phases = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, problem.num_elements))
        beamformer = mmse_beamformer(rotation, phases, problem)

        analytic = rate_rotation_gradient(beamformer, rotation, phases, problem)
        analytic = analytic * (1.0 + corruption)
        numeric = np.empty_like(analytic)
        for m in range(problem.num_antennas):
            for col, which in enumerate(("theta", "phi")):
                for sign, slot in ((+1, 0), (-1, 1)):
                    t = theta.copy()
                    p = phi.copy()
                    if which == "theta":
                        t[m] += sign * step
                    else:
                        p[m] += sign * step
                    value = sum_rate(beamformer, RotationState(t, p), phases, problem)
                    if slot == 0:
                        upper = value
                    else:
                        lower = value
                numeric[m, col] = (upper - lower) / (2.0 * step)
        scale = max(float(np.max(np.abs(numeric))), 1e-30)
        err = float(np.max(np.abs(analytic - numeric))) / scale
        if err > rot_worst:
            rot_worst, rot_state = err, state

        ctx = build_phase_context(beamformer, rotation, problem)
        betas = _betas_from_context(ctx, phases)
        grad = phase_euclidean_gradient(ctx, phases, betas) * (1.0 + corruption)
        fd = np.empty_like(grad)
        for n in range(problem.num_elements):
            for delta, attr in ((step, "real"), (1j * step, "imag")):
                v_plus = phases.copy()
                v_plus[n] += delta
                v_minus = phases.copy()
                v_minus[n] -= delta
                diff = (surrogate_value(ctx, v_plus, betas)
                        - surrogate_value(ctx, v_minus, betas)) / (2.0 * step)
                if attr == "real":
                    fd[n] = diff
                else:
                    fd[n] += 1j * diff
        scale = max(float(np.max(np.abs(fd))), 1e-30)
        err = float(np.max(np.abs(grad - fd))) / scale
        if err > ph_worst:
            ph_worst, ph_state = err, state

    return GradientCheckResult(
        rotation_worst=rot_worst,
        phase_worst=ph_worst,
        rotation_tol=rotation_tol,
        phase_tol=phase_tol,
        num_states=num_states,
        worst_rotation_state=rot_state,
        worst_phase_state=ph_state,
        elapsed_s=time.perf_counter() - start,
    )
