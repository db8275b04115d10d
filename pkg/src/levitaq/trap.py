"""Translational dynamics of a charged particle in a needle-electrode trap.

The drive is modeled as an ideal oscillating quadrupole parametrized by the
peak-to-peak voltage, an efficiency factor absorbing electrode geometry, and
the needle half-distance:

    E(r, t) = (eta * V_ac / z0^2) * cos(Omega t) * (x/2, y/2, -z)

which reproduces the axial secular frequency

    omega_z = |Q| * V_ac * eta / (sqrt(2) * m * Omega * z0^2)

and the standard single-parameter drive strength q = 2*sqrt(2)*omega_z/Omega.
The q = 0.908 instability threshold is not hard-coded into the integrator; a
monodromy-matrix analysis of the parametric equation recovers it and serves
as the stability oracle for the simulation-level operations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Particle, particle_mass
from .errors import ConvergenceError, PhysicsError, UntrappedParticleError

# Single-parameter stability limit of the cosine-driven oscillator
# u'' + (a - 2 q cos 2 tau) u = 0 on the a = 0 axis.
STABILITY_Q_MAX = 0.908

ESCAPE_RADIUS_FACTOR = 100.0  # escape flagged at |coordinate| > 100 * z0
MIN_STEPS_PER_DRIVE_PERIOD = 200


@dataclass(frozen=True)
class TrapConfig:
    """Drive and static parameters of the needle trap.

    v_ac is the peak-to-peak drive voltage (V), drive_freq the angular drive
    frequency Omega (rad/s), z0 the needle half-distance (m), eta the
    dimensionless efficiency factor relative to an ideal hyperbolic
    quadrupole, xi the static-potential curvature (V/m^2) used by the
    instability-based charge inference, and damping_gamma a linear drag rate
    (1/s) standing in for gas collisions.
    """

    v_ac: float
    drive_freq: float
    z0: float
    eta: float = 0.2
    xi: float = 2.0e6
    damping_gamma: float = 0.0

    def __post_init__(self):
        if not (self.v_ac > 0.0):
            raise ValueError("v_ac must be > 0")
        if not (self.drive_freq > 0.0):
            raise ValueError("drive_freq must be > 0")
        if not (self.z0 > 0.0):
            raise ValueError("z0 must be > 0")
        if not (0.0 < self.eta <= 1.0):
            raise ValueError("eta must be in (0, 1]")
        if not (self.xi > 0.0):
            raise ValueError("xi must be > 0")
        if self.damping_gamma < 0.0:
            raise ValueError("damping_gamma must be >= 0")


@dataclass(frozen=True)
class LaserConfig:
    """Probe beam parameters for the momentum-transfer force estimate."""

    power: float              # W
    reflection_coeff: float   # Fresnel coefficient at normal incidence
    half_aperture: float      # rad, half-angle subtended by the focusing lens

    def __post_init__(self):
        if self.power < 0.0:
            raise ValueError("power must be >= 0")
        if not (0.0 <= self.reflection_coeff <= 1.0):
            raise ValueError("reflection_coeff must be in [0, 1]")
        if not (0.0 < self.half_aperture < math.pi / 2.0):
            raise ValueError("half_aperture must be in (0, pi/2)")


@dataclass
class Trajectory:
    """Sampled center-of-mass motion; arrays share one strictly increasing time grid."""

    t: np.ndarray           # (n,), s
    positions: np.ndarray   # (n, 3), m
    velocities: np.ndarray  # (n, 3), m/s
    escaped: bool = False
    escape_time: Optional[float] = None

    def __post_init__(self):
        if not (self.t.shape[0] == self.positions.shape[0] == self.velocities.shape[0]):
            raise ValueError("trajectory arrays must have equal length")
        if self.t.size > 1 and not np.all(np.diff(self.t) > 0.0):
            raise ValueError("time grid must be strictly increasing")
        for arr in (self.t, self.positions, self.velocities):
            arr.setflags(write=False)


def secular_frequency(trap: TrapConfig, p: Particle) -> float:
    """Axial pseudo-potential angular frequency omega_z (rad/s)."""
    if p.total_charge == 0.0:
        raise UntrappedParticleError("uncharged particle is untrapped")
    m = particle_mass(p)
    return (abs(p.total_charge) * trap.v_ac * trap.eta
            / (math.sqrt(2.0) * m * trap.drive_freq * trap.z0 ** 2))


def mathieu_q(trap: TrapConfig, p: Particle) -> float:
    """Dimensionless axial drive-strength parameter q = 2*sqrt(2)*omega_z/Omega."""
    return 2.0 * math.sqrt(2.0) * secular_frequency(trap, p) / trap.drive_freq


def charge_to_mass_from_instability(omega_unstable: float, xi: float) -> float:
    """|Q|/m (C/kg) from the drive frequency at which the motion destabilizes.

    |Q|/m = q_max * Omega_unstable^2 / (4 * xi) with q_max = 0.908.
    """
    if not (omega_unstable > 0.0):
        raise ValueError("omega_unstable must be > 0")
    if not (xi > 0.0):
        raise ValueError("xi must be > 0")
    return STABILITY_Q_MAX * omega_unstable ** 2 / (4.0 * xi)


def drive_curvature(trap: TrapConfig) -> float:
    """Quadrupole curvature amplitude eta*V_ac/(2*z0^2) of the drive potential (V/m^2).

    Feeding this value as ``xi`` into charge_to_mass_from_instability makes
    the instability inference exactly consistent with the drive model used by
    the integrator; an independently simulated static curvature (TrapConfig.xi)
    will generally differ.
    """
    return trap.eta * trap.v_ac / (2.0 * trap.z0 ** 2)


@dataclass(frozen=True)
class FloquetResult:
    stable: bool
    trace: float  # trace of the one-period monodromy matrix


def floquet_stability(a: float, q: float, rtol: float = 1e-9,
                      max_steps: int = 1 << 20) -> FloquetResult:
    """Stability of u'' + (a - 2 q cos 2 tau) u = 0 from its monodromy matrix.

    Integrates the two fundamental solutions over one drive period
    (tau in [0, pi]) with a fixed-step RK4 scheme, doubling the step count
    until the monodromy trace is converged.  |trace| <= 2 means stable.
    """
    if not (math.isfinite(a) and math.isfinite(q)):
        raise ValueError("a and q must be finite")

    def trace_for(n: int) -> float:
        h = math.pi / n
        u1, w1, u2, w2 = 1.0, 0.0, 0.0, 1.0
        cos = math.cos
        for k in range(n):
            tau = k * h
            c0 = a - 2.0 * q * cos(2.0 * tau)
            ch = a - 2.0 * q * cos(2.0 * tau + h)
            c1 = a - 2.0 * q * cos(2.0 * tau + 2.0 * h)
            # RK4 on (u, w), w = u'
            k1u, k1w = w1, -c0 * u1
            k2u, k2w = w1 + 0.5 * h * k1w, -ch * (u1 + 0.5 * h * k1u)
            k3u, k3w = w1 + 0.5 * h * k2w, -ch * (u1 + 0.5 * h * k2u)
            k4u, k4w = w1 + h * k3w, -c1 * (u1 + h * k3u)
            u1 += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            w1 += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            k1u, k1w = w2, -c0 * u2
            k2u, k2w = w2 + 0.5 * h * k1w, -ch * (u2 + 0.5 * h * k1u)
            k3u, k3w = w2 + 0.5 * h * k2w, -ch * (u2 + 0.5 * h * k2u)
            k4u, k4w = w2 + h * k3w, -c1 * (u2 + h * k3u)
            u2 += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            w2 += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        return u1 + w2

    n = 1024
    prev = trace_for(n)
    while True:
        n *= 2
        cur = trace_for(n)
        if abs(cur - prev) <= rtol * max(1.0, abs(cur)):
            return FloquetResult(stable=abs(cur) <= 2.0, trace=cur)
        if n > max_steps:
            raise ConvergenceError(
                f"monodromy trace not converged: n={n}, "
                f"last traces {prev:.6e} -> {cur:.6e}")
        prev = cur


def find_stability_boundary(a: float = 0.0, q_min: float = 0.0, q_max: float = 1.5,
                            tol: float = 1e-4) -> float:
    """Locate the single stable->unstable transition in q over (q_min, q_max) by bisection."""
    if not (q_max > q_min >= 0.0):
        raise ValueError("need q_max > q_min >= 0")
    lo, hi = q_min, q_max
    if not floquet_stability(a, lo if lo > 0.0 else 1e-6).stable:
        raise PhysicsError("lower end of the scan range is already unstable")
    if floquet_stability(a, hi).stable:
        raise PhysicsError("upper end of the scan range is still stable")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if floquet_stability(a, mid).stable:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _sum_forces(forces) -> tuple[float, float, float]:
    if forces is None:
        return 0.0, 0.0, 0.0
    fx = fy = fz = 0.0
    for f in forces:
        fx += float(f[0])
        fy += float(f[1])
        fz += float(f[2])
    return fx, fy, fz


def integrate_motion(trap: TrapConfig, p: Particle,
                     forces: Optional[Sequence[Sequence[float]]] = None,
                     t_end: float = 0.01, dt: float = 1e-6,
                     x0: Sequence[float] = (0.0, 0.0, 0.0),
                     v0: Sequence[float] = (0.0, 0.0, 0.0),
                     store_every: int = 1) -> Trajectory:
    """Integrate m r'' = Q E(r, t) - m gamma r' + F_ext with fixed-step RK4.

    ``forces`` is a list of constant external force vectors (N).  Integration
    stops early with the escape flag set once any coordinate exceeds
    100 * z0.  Requires dt <= 2 pi / (200 Omega) so the drive is resolved.
    """
    dt_max = 2.0 * math.pi / (MIN_STEPS_PER_DRIVE_PERIOD * trap.drive_freq)
    if dt > dt_max:
        raise ValueError(f"dt too large: {dt:g} s exceeds drive-resolution limit {dt_max:g} s")
    if t_end <= 0.0:
        raise ValueError("t_end must be > 0")
    if store_every < 1:
        raise ValueError("store_every must be >= 1")

    m = particle_mass(p)
    cd = p.total_charge * trap.eta * trap.v_ac / (m * trap.z0 ** 2)  # drive accel / m
    gam = trap.damping_gamma
    fx, fy, fz = _sum_forces(forces)
    aex, aey, aez = fx / m, fy / m, fz / m
    om = trap.drive_freq
    esc = ESCAPE_RADIUS_FACTOR * trap.z0

    n_steps = max(1, int(round(t_end / dt)))
    x, y, z = float(x0[0]), float(x0[1]), float(x0[2])
    vx, vy, vz = float(v0[0]), float(v0[1]), float(v0[2])

    ts = [0.0]
    pos = [(x, y, z)]
    vel = [(vx, vy, vz)]
    escaped = False
    escape_time = None
    cos = math.cos

    for k in range(n_steps):
        t = k * dt
        c0 = cd * cos(om * t)
        ch = cd * cos(om * (t + 0.5 * dt))
        c1 = cd * cos(om * (t + dt))

        # stage 1
        a1x = 0.5 * c0 * x - gam * vx + aex
        a1y = 0.5 * c0 * y - gam * vy + aey
        a1z = -c0 * z - gam * vz + aez
        # stage 2
        x2, y2, z2 = x + 0.5 * dt * vx, y + 0.5 * dt * vy, z + 0.5 * dt * vz
        vx2, vy2, vz2 = vx + 0.5 * dt * a1x, vy + 0.5 * dt * a1y, vz + 0.5 * dt * a1z
        a2x = 0.5 * ch * x2 - gam * vx2 + aex
        a2y = 0.5 * ch * y2 - gam * vy2 + aey
        a2z = -ch * z2 - gam * vz2 + aez
        # stage 3
        x3, y3, z3 = x + 0.5 * dt * vx2, y + 0.5 * dt * vy2, z + 0.5 * dt * vz2
        vx3, vy3, vz3 = vx + 0.5 * dt * a2x, vy + 0.5 * dt * a2y, vz + 0.5 * dt * a2z
        a3x = 0.5 * ch * x3 - gam * vx3 + aex
        a3y = 0.5 * ch * y3 - gam * vy3 + aey
        a3z = -ch * z3 - gam * vz3 + aez
        # stage 4
        x4, y4, z4 = x + dt * vx3, y + dt * vy3, z + dt * vz3
        vx4, vy4, vz4 = vx + dt * a3x, vy + dt * a3y, vz + dt * a3z
        a4x = 0.5 * c1 * x4 - gam * vx4 + aex
        a4y = 0.5 * c1 * y4 - gam * vy4 + aey
        a4z = -c1 * z4 - gam * vz4 + aez

        x += dt / 6.0 * (vx + 2.0 * vx2 + 2.0 * vx3 + vx4)
        y += dt / 6.0 * (vy + 2.0 * vy2 + 2.0 * vy3 + vy4)
        z += dt / 6.0 * (vz + 2.0 * vz2 + 2.0 * vz3 + vz4)
        vx += dt / 6.0 * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
        vy += dt / 6.0 * (a1y + 2.0 * a2y + 2.0 * a3y + a4y)
        vz += dt / 6.0 * (a1z + 2.0 * a2z + 2.0 * a3z + a4z)

        t_next = (k + 1) * dt
        if (k + 1) % store_every == 0 or k == n_steps - 1:
            ts.append(t_next)
            pos.append((x, y, z))
            vel.append((vx, vy, vz))
        if abs(x) > esc or abs(y) > esc or abs(z) > esc:
            escaped = True
            escape_time = t_next
            if ts[-1] != t_next:
                ts.append(t_next)
                pos.append((x, y, z))
                vel.append((vx, vy, vz))
            break

    return Trajectory(t=np.array(ts), positions=np.array(pos),
                      velocities=np.array(vel), escaped=escaped,
                      escape_time=escape_time)


def frequency_ramp_instability(trap: TrapConfig, p: Particle,
                               omega_start: float, omega_end: float,
                               ramp_rate: float, dt: Optional[float] = None,
                               seed_displacement: Optional[float] = None) -> float:
    """Drive frequency (rad/s) at which a downward frequency ramp destabilizes the motion.

    Ramps Omega(t) = omega_start - ramp_rate * t and integrates the axial
    motion (the most confining axis, so the first to destabilize) until the
    escape threshold is crossed.  The returned frequency carries a small
    systematic lag from the finite growth time of the instability; slower
    ramps shrink it.  A warning is emitted when Omega changes by more than 1%
    per secular period.
    """
    if not (omega_start > omega_end > 0.0):
        raise ValueError("need omega_start > omega_end > 0")
    if not (ramp_rate > 0.0):
        raise ValueError("ramp_rate must be > 0")
    if p.total_charge == 0.0:
        raise UntrappedParticleError("uncharged particle is untrapped")

    m = particle_mass(p)
    if dt is None:
        dt = 2.0 * math.pi / (MIN_STEPS_PER_DRIVE_PERIOD * omega_start)
    elif dt > 2.0 * math.pi / (MIN_STEPS_PER_DRIVE_PERIOD * omega_start):
        raise ValueError("dt too large for the starting drive frequency")
    if seed_displacement is None:
        seed_displacement = 0.5 * trap.z0

    trap_start = TrapConfig(v_ac=trap.v_ac, drive_freq=omega_start, z0=trap.z0,
                            eta=trap.eta, xi=trap.xi, damping_gamma=trap.damping_gamma)
    wz0 = secular_frequency(trap_start, p)
    t_sec = 2.0 * math.pi / wz0
    if ramp_rate * t_sec > 0.01 * omega_start:
        warnings.warn("ramp changes the drive by more than 1% per secular period; "
                      "the detected instability frequency will lag", stacklevel=2)

    k_acc = p.total_charge * trap.eta * trap.v_ac / (m * trap.z0 ** 2)
    gam = trap.damping_gamma
    esc = ESCAPE_RADIUS_FACTOR * trap.z0
    z, vz = seed_displacement, 0.0
    phase, t = 0.0, 0.0
    t_max = (omega_start - omega_end) / ramp_rate
    cos = math.cos

    while t < t_max:
        om_t = omega_start - ramp_rate * t
        c0 = k_acc * cos(phase)
        ch = k_acc * cos(phase + 0.5 * om_t * dt)
        c1 = k_acc * cos(phase + om_t * dt)

        a1 = -c0 * z - gam * vz
        z2, v2 = z + 0.5 * dt * vz, vz + 0.5 * dt * a1
        a2 = -ch * z2 - gam * v2
        z3, v3 = z + 0.5 * dt * v2, vz + 0.5 * dt * a2
        a3 = -ch * z3 - gam * v3
        z4, v4 = z + dt * v3, vz + dt * a3
        a4 = -c1 * z4 - gam * v4

        z += dt / 6.0 * (vz + 2.0 * v2 + 2.0 * v3 + v4)
        vz += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        phase += om_t * dt
        t += dt
        if abs(z) > esc:
            return omega_start - ramp_rate * t

    raise PhysicsError("stable over full ramp: no instability detected")


def dc_offset_displacement(trap: TrapConfig, p: Particle, v_dc: float,
                           geometry_factor: float = 1.0) -> float:
    """Signed equilibrium shift (m) along z from a static offset voltage.

    The static field is linearized as E_dc = geometry_factor * v_dc / z0,
    pointing along +z for positive v_dc, so the shift Q*E_dc/(m*omega_z^2)
    flips sign with the particle charge: a negatively charged particle moves
    toward -z under positive voltage.
    """
    if p.total_charge == 0.0:
        raise UntrappedParticleError("uncharged particle does not respond harmonically")
    wz = secular_frequency(trap, p)
    m = particle_mass(p)
    e_dc = geometry_factor * v_dc / trap.z0
    return p.total_charge * e_dc / (m * wz ** 2)


def radiation_pressure_force(laser: LaserConfig,
                             speed_of_light: float = 299792458.0) -> float:
    """Axial momentum-transfer force (N): (2 R P / c) * sinc(theta_m)."""
    th = laser.half_aperture
    sinc = math.sin(th) / th if th != 0.0 else 1.0
    return 2.0 * laser.reflection_coeff * laser.power / speed_of_light * sinc


def equilibrium_displacement(force: float, p: Particle, omega_x: float) -> float:
    """Static displacement F / (m * omega_x^2) of a harmonically confined particle."""
    if not (omega_x > 0.0):
        raise ValueError("omega_x must be > 0")
    return force / (particle_mass(p) * omega_x ** 2)
