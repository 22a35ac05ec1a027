"""Smoke simulator and the differentiable semi-Lagrangian advection operator.

The simulator is the source of all synthetic ground truth: buoyant plumes in
a closed box, driven by a per-frame density inflow on a bottom-slab emitter.
One step runs buoyancy -> pressure projection -> velocity self-advection ->
projection -> density advection -> inflow -> clamp. The velocity returned by
a step is exactly the one that transported the density, so replaying the
recorded (velocity, inflow) sequence reproduces the density sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (
    FieldError,
    ScalarField3,
    VelocityField3,
    cell_center_positions,
    divergence,
    sample_gradient_index_space,
    sample_index_space,
    scatter_index_space,
)


@dataclass(frozen=True)
class SimParams:
    """Solver constants. ``buoyancy`` is force per unit density per frame^2."""

    buoyancy: float = 0.08
    pressure_iters: int = 100
    dt: float = 1.0

    def __post_init__(self):
        if self.buoyancy < 0:
            raise FieldError(f"buoyancy must be >= 0, got {self.buoyancy}")
        if self.pressure_iters < 1:
            raise FieldError(f"pressure_iters must be >= 1, got {self.pressure_iters}")


def bottom_slab_mask(
    dims: tuple[int, int, int], height: int = 2, radius: float | None = None
) -> np.ndarray:
    """Boolean emitter mask: a slab of ``height`` cells at the domain floor.

    With ``radius`` the slab is restricted to a centered disc in the
    horizontal plane (radius in cells).
    """
    nx, ny, nz = dims
    mask = np.zeros(dims, dtype=bool)
    mask[:, : min(height, ny), :] = True
    if radius is not None:
        xs = np.arange(nx) + 0.5 - nx / 2.0
        zs = np.arange(nz) + 0.5 - nz / 2.0
        gx, gz = np.meshgrid(xs, zs, indexing="ij")
        disc = (gx**2 + gz**2) <= radius**2
        mask &= disc[:, None, :]
    return mask


@dataclass(frozen=True)
class InflowState:
    """Per-frame density increment, nonnegative and zero off the emitter mask."""

    increment: ScalarField3
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != self.increment.dims:
            raise FieldError(
                f"inflow mask shape {m.shape} does not match field dims {self.increment.dims}"
            )
        vals = self.increment.values
        if np.any(vals < 0):
            raise FieldError("inflow increment must be nonnegative")
        if np.any(vals[~m] != 0):
            raise FieldError("inflow increment must be zero outside the mask")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)

    @staticmethod
    def from_values(values: np.ndarray, mask: np.ndarray, dx: float = 1.0) -> "InflowState":
        vals = np.where(np.asarray(mask, dtype=bool), np.maximum(values, 0.0), 0.0)
        return InflowState(ScalarField3(vals, dx=dx), mask)


# ---------------------------------------------------------------------------
# Velocity sampling on the staggered grid
# ---------------------------------------------------------------------------

# index-space offset of each component's own sample lattice: u[i,j,k] sits at
# world (i, j+0.5, k+0.5)*dx, so its index coordinates are (x/dx, y/dx-0.5, ...).
_STAGGER = {
    "u": np.array([0.0, 0.5, 0.5]),
    "v": np.array([0.5, 0.0, 0.5]),
    "w": np.array([0.5, 0.5, 0.0]),
}


def sample_velocity(vel: VelocityField3, pts: np.ndarray) -> np.ndarray:
    """Velocity vectors at world positions ``pts`` (..., 3), edge-clamped."""
    pts = np.asarray(pts, dtype=np.float64)
    s = pts / vel.dx
    out = np.stack(
        [
            sample_index_space(vel.u, s - _STAGGER["u"]),
            sample_index_space(vel.v, s - _STAGGER["v"]),
            sample_index_space(vel.w, s - _STAGGER["w"]),
        ],
        axis=-1,
    )
    return out


def cell_centered_velocity(vel: VelocityField3) -> np.ndarray:
    """Average face velocities to cell centers, shape (nx, ny, nz, 3)."""
    return np.stack(
        [
            0.5 * (vel.u[:-1] + vel.u[1:]),
            0.5 * (vel.v[:, :-1] + vel.v[:, 1:]),
            0.5 * (vel.w[:, :, :-1] + vel.w[:, :, 1:]),
        ],
        axis=-1,
    )


# ---------------------------------------------------------------------------
# Advection and its exact reverse-mode derivative
# ---------------------------------------------------------------------------

def advect(rho: ScalarField3, vel: VelocityField3, dt: float = 1.0) -> ScalarField3:
    """Semi-Lagrangian transport: rho'(x) = rho(x - u(x) dt), edge-clamped."""
    if rho.dims != vel.dims:
        raise FieldError(f"advect dims mismatch: rho {rho.dims} vs vel {vel.dims}")
    pos = cell_center_positions(*rho.dims, dx=rho.dx)
    ucc = cell_centered_velocity(vel)
    back = pos - ucc * dt
    s = back / rho.dx - 0.5
    vals = sample_index_space(rho.values, s)
    return ScalarField3(vals, dx=rho.dx, clamp_nonneg=rho.clamp_nonneg)


def advect_grad(
    rho: ScalarField3,
    vel: VelocityField3,
    dL_drho_out: np.ndarray | ScalarField3,
    dt: float = 1.0,
) -> tuple[ScalarField3, VelocityField3]:
    """Reverse-mode derivative of :func:`advect`.

    Returns gradients with respect to the input density and the face
    velocities, including the dependence of the sample position on the
    velocity (-grad rho at the backtraced point).
    """
    g = dL_drho_out.values if isinstance(dL_drho_out, ScalarField3) else np.asarray(dL_drho_out)
    if g.shape != rho.dims:
        raise FieldError(f"gradient shape {g.shape} does not match rho dims {rho.dims}")
    nx, ny, nz = rho.dims
    pos = cell_center_positions(nx, ny, nz, dx=rho.dx)
    ucc = cell_centered_velocity(vel)
    s = (pos - ucc * dt) / rho.dx - 0.5

    # d rho' / d rho: transpose of the trilinear gather
    drho_in = scatter_index_space(rho.dims, s, g)

    # d rho' / d u_cc = -dt/dx * dS/ds at the backtraced point
    gs = sample_gradient_index_space(rho.values, s)
    gcc = gs * (g[..., None] * (-dt / rho.dx))

    # distribute cell-centered velocity gradients onto faces (transpose of
    # the 0.5*(left+right) averaging)
    gu = np.zeros((nx + 1, ny, nz))
    gv = np.zeros((nx, ny + 1, nz))
    gw = np.zeros((nx, ny, nz + 1))
    gu[:-1] += 0.5 * gcc[..., 0]
    gu[1:] += 0.5 * gcc[..., 0]
    gv[:, :-1] += 0.5 * gcc[..., 1]
    gv[:, 1:] += 0.5 * gcc[..., 1]
    gw[:, :, :-1] += 0.5 * gcc[..., 2]
    gw[:, :, 1:] += 0.5 * gcc[..., 2]
    return ScalarField3(drho_in, dx=rho.dx), VelocityField3(gu, gv, gw, dx=vel.dx)


def _advect_component(comp: np.ndarray, offset: np.ndarray, vel: VelocityField3, dt: float) -> np.ndarray:
    """Semi-Lagrangian transport of one staggered velocity component."""
    idx = np.indices(comp.shape, dtype=np.float64)
    pts = np.stack([idx[0], idx[1], idx[2]], axis=-1) + offset[None, None, None, :]
    pos = pts * vel.dx
    u_here = sample_velocity(vel, pos)
    s = (pos - u_here * dt) / vel.dx
    return sample_index_space(comp, s.reshape(-1, 3) - offset[None, :]).reshape(comp.shape)


def advect_velocity(vel: VelocityField3, dt: float = 1.0) -> VelocityField3:
    """Self-advect each MAC component semi-Lagrangian style."""
    u = _advect_component(vel.u, _STAGGER["u"], vel, dt)
    v = _advect_component(vel.v, _STAGGER["v"], vel, dt)
    w = _advect_component(vel.w, _STAGGER["w"], vel, dt)
    return VelocityField3(u, v, w, dx=vel.dx)


# ---------------------------------------------------------------------------
# Pressure projection
# ---------------------------------------------------------------------------

def zero_hull_faces(vel: VelocityField3) -> VelocityField3:
    """Enforce the closed-box condition: no flow through domain walls."""
    u, v, w = vel.u.copy(), vel.v.copy(), vel.w.copy()
    u[0] = u[-1] = 0.0
    v[:, 0] = v[:, -1] = 0.0
    w[:, :, 0] = w[:, :, -1] = 0.0
    return VelocityField3(u, v, w, dx=vel.dx)


def pressure_project(
    vel: VelocityField3, iters: int | None = None, tol: float | None = None
) -> VelocityField3:
    """Jacobi-iterated pressure solve; returns ``vel - grad p``, closed box.

    Convergence is a property of ``iters``; callers that need a specific
    divergence level can pass ``tol`` (max |div| of the pressure residual,
    checked every 50 sweeps) and a generous ``iters`` cap.
    """
    if iters is None:
        iters = SimParams().pressure_iters
    vel = zero_hull_faces(vel)
    rhs = divergence(vel).values * (vel.dx * vel.dx)
    p = np.zeros(vel.dims, dtype=np.float64)
    def neighbor_sum(q: np.ndarray) -> np.ndarray:
        qp = np.pad(q, 1, mode="edge")
        return (
            qp[:-2, 1:-1, 1:-1] + qp[2:, 1:-1, 1:-1]
            + qp[1:-1, :-2, 1:-1] + qp[1:-1, 2:, 1:-1]
            + qp[1:-1, 1:-1, :-2] + qp[1:-1, 1:-1, 2:]
        )

    for it in range(iters):
        p = (neighbor_sum(p) - rhs) / 6.0
        if tol is not None and (it + 1) % 50 == 0:
            # divergence remaining after subtracting grad p
            res = np.max(np.abs(rhs - (neighbor_sum(p) - 6.0 * p))) / (vel.dx * vel.dx)
            if res < tol:
                break
    u, v, w = vel.u.copy(), vel.v.copy(), vel.w.copy()
    u[1:-1] -= np.diff(p, axis=0) / vel.dx
    v[:, 1:-1] -= np.diff(p, axis=1) / vel.dx
    w[:, :, 1:-1] -= np.diff(p, axis=2) / vel.dx
    return VelocityField3(u, v, w, dx=vel.dx)


# ---------------------------------------------------------------------------
# Full step and re-simulation
# ---------------------------------------------------------------------------

def add_buoyancy(vel: VelocityField3, rho: ScalarField3, params: SimParams) -> VelocityField3:
    """Add upward force on y-faces proportional to the adjacent density."""
    v = vel.v.copy()
    rho_face = 0.5 * (rho.values[:, :-1, :] + rho.values[:, 1:, :])
    v[:, 1:-1, :] += params.buoyancy * params.dt * rho_face
    return VelocityField3(vel.u, v, vel.w, dx=vel.dx)


def simulate_step(
    rho: ScalarField3,
    vel: VelocityField3,
    inflow: InflowState | None,
    params: SimParams = SimParams(),
) -> tuple[ScalarField3, VelocityField3]:
    """Advance one frame. Returns (new density, transport velocity).

    The returned velocity is the one the density was advected with, so
    ``advect(rho, vel') + inflow`` reproduces the returned density exactly.
    """
    if rho.dims != vel.dims:
        raise FieldError(f"simulate_step dims mismatch: {rho.dims} vs {vel.dims}")
    vel = add_buoyancy(vel, rho, params)
    vel = pressure_project(vel, params.pressure_iters)
    vel = advect_velocity(vel, params.dt)
    vel = pressure_project(vel, params.pressure_iters)
    rho_new = advect(rho, vel, params.dt).values
    if inflow is not None:
        if inflow.increment.dims != rho.dims:
            raise FieldError("inflow dims do not match density dims")
        rho_new = rho_new + inflow.increment.values
    return ScalarField3(rho_new, dx=rho.dx, clamp_nonneg=True), vel


def resimulate(
    rho0: ScalarField3,
    inflows: list[InflowState],
    vels: list[VelocityField3] | None = None,
    params: SimParams = SimParams(),
    vel0: VelocityField3 | None = None,
) -> list[ScalarField3]:
    """Regenerate a density sequence from initial state and inflows.

    With ``vels`` this is a pure transport replay,
    ``rho[t+1] = advect(rho[t], vels[t]) + inflows[t]``; without, the full
    solver is re-run from ``vel0`` (zero by default) using the inflows.
    Returns ``len(inflows) + 1`` fields including ``rho0``.
    """
    if vels is not None and len(vels) != len(inflows):
        raise FieldError(
            f"got {len(vels)} velocity fields for {len(inflows)} inflows"
        )
    out = [rho0]
    if vels is not None:
        rho = rho0
        for u, q in zip(vels, inflows):
            rho = ScalarField3(
                advect(rho, u, params.dt).values + q.increment.values,
                dx=rho.dx,
                clamp_nonneg=True,
            )
            out.append(rho)
        return out
    rho = rho0
    vel = vel0 if vel0 is not None else VelocityField3.zeros(*rho0.dims, dx=rho0.dx)
    for q in inflows:
        rho, vel = simulate_step(rho, vel, q, params)
        out.append(rho)
    return out


def total_mass(rho: ScalarField3) -> float:
    return float(np.sum(rho.values)) * rho.dx**3
