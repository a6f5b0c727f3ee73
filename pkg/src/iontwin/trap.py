"""Surface-electrode trap electrostatics in the gapless-plane approximation.

Every electrode is a rectangle in the z=0 plane held at its own potential;
everything else in the plane is grounded. A rectangle at unit voltage
produces (House, PRA 78, 033402)

    phi = 1/(2 pi) * sum_{i,j} (-1)^(i+j) atan[(x-x_i)(y-y_j) / (z R_ij)].

The RF electrodes enter through the pseudopotential
q^2 |grad V_rf|^2 / (4 m Omega^2). Positions are in metres, energies in
joules unless a name says otherwise.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import atomic_mass, elementary_charge
from scipy.optimize import least_squares

from .errors import Infeasible, NoNull, OnSurface

HESSIAN_STEP = 0.1e-6


@dataclass(frozen=True)
class ElectrodePatch:
    name: str
    x1: float
    x2: float
    y1: float
    y2: float
    role: str = "dc"  # "rf" | "dc" | "ground"
    voltage: float = 0.0  # DC volts, or RF amplitude for role "rf"

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"patch {self.name!r}: need x1<x2 and y1<y2")
        if self.role not in ("rf", "dc", "ground"):
            raise ValueError(f"patch {self.name!r}: unknown role {self.role!r}")

    def overlaps(self, other: "ElectrodePatch") -> bool:
        return (self.x1 < other.x2 and other.x1 < self.x2
                and self.y1 < other.y2 and other.y1 < self.y2)

    def scaled(self, s):
        return replace(self, x1=self.x1 * s, x2=self.x2 * s, y1=self.y1 * s, y2=self.y2 * s)


def _split(points):
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    if np.any(z <= 0):
        raise OnSurface("potential is only defined above the electrode plane (z > 0)")
    return x, y, z


def _corners(patch):
    for i, xi in ((1, patch.x1), (2, patch.x2)):
        for j, yj in ((1, patch.y1), (2, patch.y2)):
            yield (-1) ** (i + j), xi, yj


def unit_potential(patch: ElectrodePatch, points):
    """Potential of ``patch`` at 1 V (dimensionless basis function)."""
    x, y, z = _split(points)
    total = 0.0
    for sign, xi, yj in _corners(patch):
        X, Y = x - xi, y - yj
        R = np.sqrt(X * X + Y * Y + z * z)
        total = total + sign * np.arctan(X * Y / (z * R))
    return total / (2 * math.pi)


def unit_gradient(patch: ElectrodePatch, points):
    """Analytic gradient of :func:`unit_potential`, shape (..., 3), in 1/m."""
    x, y, z = _split(points)
    gx = gy = gz = 0.0
    for sign, xi, yj in _corners(patch):
        X, Y = x - xi, y - yj
        X2z, Y2z = X * X + z * z, Y * Y + z * z
        R = np.sqrt(X * X + Y * Y + z * z)
        gx = gx + sign * Y * z / (R * X2z)
        gy = gy + sign * X * z / (R * Y2z)
        gz = gz - sign * X * Y * (R * R + z * z) / (R * X2z * Y2z)
    return np.stack(np.broadcast_arrays(gx, gy, gz), axis=-1) / (2 * math.pi)


def patch_potential(patch: ElectrodePatch, points):
    return patch.voltage * unit_potential(patch, points)


def unit_hessian(patch: ElectrodePatch, point, h=HESSIAN_STEP):
    """3x3 Hessian of the unit potential by central differences of the gradient."""
    p = np.asarray(point, dtype=float)
    steps = np.eye(3) * h
    g = unit_gradient(patch, np.concatenate([p + steps, p - steps]))
    H = (g[:3] - g[3:]) / (2 * h)
    return 0.5 * (H + H.T)


def numerical_hessian(f, point, h=HESSIAN_STEP):
    """Central-difference Hessian of a scalar field ``f`` evaluated on point arrays."""
    p = np.asarray(point, dtype=float)
    E = np.eye(3) * h
    pts = [p]
    for i in range(3):
        pts += [p + E[i], p - E[i]]
    for i in range(3):
        for j in range(i + 1, 3):
            pts += [p + E[i] + E[j], p + E[i] - E[j], p - E[i] + E[j], p - E[i] - E[j]]
    vals = f(np.array(pts))
    f0 = vals[0]
    H = np.empty((3, 3))
    for i in range(3):
        H[i, i] = (vals[1 + 2 * i] - 2 * f0 + vals[2 + 2 * i]) / h**2
    k = 7
    for i in range(3):
        for j in range(i + 1, 3):
            pp, pm, mp, mm = vals[k:k + 4]
            H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4 * h * h)
            k += 4
    return H


@dataclass(frozen=True)
class TrapModel:
    patches: tuple
    rf_frequency: float  # angular
    ion_mass: float = 88 * atomic_mass
    ion_charge: float = elementary_charge
    stray_field: tuple = (0.0, 0.0, 0.0)
    length_scale: float = 55e-6  # typical ion height, used to scale solver tolerances
    notes: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        if not self.rf_frequency > 0:
            raise ValueError("rf_frequency must be positive")
        if not self.rf_patches or not self.dc_patches:
            raise ValueError("trap needs at least one RF and one DC electrode")
        names = [p.name for p in self.patches]
        if len(set(names)) != len(names):
            raise ValueError("electrode names must be unique")
        for i, a in enumerate(self.patches):
            for b in self.patches[i + 1:]:
                if a.overlaps(b):
                    raise ValueError(f"electrodes {a.name!r} and {b.name!r} overlap")

    @property
    def rf_patches(self):
        return [p for p in self.patches if p.role == "rf"]

    @property
    def dc_patches(self):
        return [p for p in self.patches if p.role == "dc"]

    @property
    def dc_names(self):
        return [p.name for p in self.dc_patches]

    def with_dc_voltages(self, voltages):
        patches = [replace(p, voltage=float(voltages[p.name])) if p.name in voltages else p
                   for p in self.patches]
        return replace(self, patches=tuple(patches))

    def with_rf_amplitude(self, amplitude):
        return replace(self, patches=tuple(replace(p, voltage=amplitude) if p.role == "rf" else p
                                           for p in self.patches))

    def scaled(self, s):
        """Every length multiplied by ``s``; voltages unchanged."""
        return replace(self, patches=tuple(p.scaled(s) for p in self.patches),
                       length_scale=self.length_scale * s)


def rf_potential(trap: TrapModel, points):
    return sum(patch_potential(p, points) for p in trap.rf_patches)


def rf_gradient(trap: TrapModel, points):
    return sum(p.voltage * unit_gradient(p, points) for p in trap.rf_patches)


def dc_potential(trap: TrapModel, points, voltages=None):
    voltages = voltages or {}
    return sum(voltages.get(p.name, p.voltage) * unit_potential(p, points) for p in trap.dc_patches)


def pseudopotential_energy(trap: TrapModel, points):
    g = rf_gradient(trap, points)
    return trap.ion_charge**2 * np.sum(g * g, axis=-1) / (4 * trap.ion_mass * trap.rf_frequency**2)


def pseudopotential(trap: TrapModel, points):
    """Pseudopotential in eV."""
    return pseudopotential_energy(trap, points) / elementary_charge


def potential_energy(trap: TrapModel, points, voltages=None):
    """Total effective potential energy (J): DC + pseudopotential + stray field."""
    p = np.asarray(points, dtype=float)
    stray = p @ np.asarray(trap.stray_field, dtype=float)
    return (trap.ion_charge * (dc_potential(trap, p, voltages) - stray)
            + pseudopotential_energy(trap, p))


def _null_at(trap: TrapModel, y, guess=None):
    L = trap.length_scale
    rf = trap.rf_patches
    if guess is None:
        x0 = np.mean([0.5 * (p.x1 + p.x2) for p in rf])
        if len(rf) > 1:
            # symmetric rail pairs centre on the mirror line
            x0 = 0.5 * (min(p.x1 for p in rf) + max(p.x2 for p in rf))
        span = max(p.x2 for p in rf) - min(p.x1 for p in rf)

        # |E| also vanishes far away, so seed from the lowest local minimum on a grid
        zs = np.geomspace(1e-2 * span, 3 * span, 600)
        pts = np.stack([np.full_like(zs, x0), np.full_like(zs, y), zs], axis=-1)
        g = rf_gradient(trap, pts)
        e2 = np.sum(g * g, axis=-1)
        interior = np.nonzero((e2[1:-1] < e2[:-2]) & (e2[1:-1] <= e2[2:]))[0]
        if not len(interior):
            raise NoNull(f"no RF field minimum above the surface at y={y:.3e} m")
        guess = (x0, zs[interior[0] + 1])

    def resid(v):
        g = rf_gradient(trap, np.array([v[0] * L, y, v[1] * L]))
        return g[[0, 2]] * L

    sol = least_squares(resid, np.asarray(guess) / L, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        method="lm")
    point = np.array([sol.x[0] * L, y, sol.x[1] * L])
    if point[2] <= 0:
        raise NoNull(f"null search at y={y:.3e} m left the half-space")
    g = rf_gradient(trap, point)
    scale = max(abs(p.voltage) for p in rf) / point[2]
    # only the transverse components vanish on the null line
    if math.hypot(g[0], g[2]) > 1e-8 * scale:
        raise NoNull(f"RF field minimum at y={y:.3e} m not converged "
                     f"(|E_perp|={math.hypot(g[0], g[2]):.3e} V/m)")
    return point


def find_null(trap: TrapModel, y_values=(0.0,)):
    """RF null points (minimum of |grad V_rf| in x, z) for each requested y."""
    out, guess = [], None
    for y in y_values:
        p = _null_at(trap, float(y), guess)
        guess = (p[0], p[2])
        out.append(p)
    return np.array(out)


def secular_modes(trap: TrapModel, position, voltages=None, h=HESSIAN_STEP):
    """Angular frequencies ordered (x-like, y-like, z-like) and the matching
    principal axes as rows."""
    H = numerical_hessian(lambda p: potential_energy(trap, p, voltages), position, h)
    k, vecs = np.linalg.eigh(H)
    if np.any(k <= 0):
        raise Infeasible(f"effective potential is not confining (curvatures {k})")
    # assign modes to coordinate axes by best overlap
    best = max(itertools.permutations(range(3)),
               key=lambda perm: np.prod([abs(vecs[ax, m]) for ax, m in enumerate(perm)]))
    order = list(best)
    return np.sqrt(k[order] / trap.ion_mass), vecs[:, order].T


def radial_pseudo_frequency(trap: TrapModel, y=0.0):
    """Mean radial secular frequency from the pseudopotential alone."""
    p = find_null(trap, [y])[0]
    H = numerical_hessian(lambda q: pseudopotential_energy(trap, q), p)
    k = np.linalg.eigvalsh(H[np.ix_([0, 2], [0, 2])])
    return float(np.mean(np.sqrt(np.clip(k, 0, None) / trap.ion_mass)))


def five_wire_layout(height=55e-6, aspect=2.0, rf_amplitude=1.0, n_segments=5,
                     segment_pitch=None, segment_width=None, rail_length=None):
    """Symmetric five-wire electrode layout with its RF null at ``height``.

    The grounded centre strip spans |x| < a and the RF rails a < |x| < b with
    a*b = height^2 and b/a = ``aspect``; ``n_segments`` DC segments per side
    sit outside the rails. All lateral dimensions scale with ``height``.
    """
    h = height
    a, b = h / math.sqrt(aspect), h * math.sqrt(aspect)
    pitch = segment_pitch if segment_pitch is not None else h * 100 / 55
    width = segment_width if segment_width is not None else 3 * h
    L = rail_length if rail_length is not None else 100 * h
    patches = [
        ElectrodePatch("center", -a, a, -L, L, "ground"),
        ElectrodePatch("rf_left", -b, -a, -L, L, "rf", rf_amplitude),
        ElectrodePatch("rf_right", a, b, -L, L, "rf", rf_amplitude),
    ]
    edges = (np.arange(n_segments + 1) - n_segments / 2) * pitch
    for side, (x1, x2) in (("L", (-b - width, -b)), ("R", (b, b + width))):
        for k in range(n_segments):
            patches.append(ElectrodePatch(f"dc{side}{k + 1}", x1, x2, edges[k], edges[k + 1], "dc"))
    return patches


def design_geometry(target_height, rf_frequency=2 * math.pi * 50e6,
                    radial_frequency=2 * math.pi * 3e6, aspect=2.0, **layout) -> TrapModel:
    """Five-wire trap whose RF null sits at ``target_height``.

    The RF amplitude is set so the pseudopotential alone gives
    ``radial_frequency`` (the radial curvature is linear in amplitude^2).
    """
    if not target_height > 0:
        from .errors import Unreachable
        raise Unreachable("target height must be positive")
    trap = TrapModel(five_wire_layout(target_height, aspect, **layout), rf_frequency,
                     length_scale=target_height)
    w1 = radial_pseudo_frequency(trap)
    return trap.with_rf_amplitude(radial_frequency / w1)


@dataclass(frozen=True)
class WellSolution:
    position: np.ndarray
    secular_frequencies: np.ndarray  # angular (w_x, w_y, w_z)
    principal_axes: np.ndarray  # rows matching secular_frequencies
    dc_voltages: dict
    residual: float
    condition_number: float
    target: np.ndarray

    @property
    def axial_frequency(self):
        return float(self.secular_frequencies[1])


def well_constraints(trap: TrapModel, point, axial_frequency, decouple=True):
    """Scaled linear system A V = b for DC voltages at ``point``.

    Rows: zero net force (3), d2phi/dy2 = m w^2 / q and, if ``decouple``,
    vanishing xy and yz curvature so y is a principal axis.
    """
    L = trap.length_scale
    dcs = trap.dc_patches
    grads = np.array([unit_gradient(p, point) for p in dcs]).T  # (3, n)
    hess = np.array([unit_hessian(p, point) for p in dcs])  # (n, 3, 3)
    rows = [grads * L, [hess[:, 1, 1] * L**2]]
    rhs = [np.asarray(trap.stray_field, dtype=float) * L,
           [trap.ion_mass * axial_frequency**2 / trap.ion_charge * L**2]]
    if decouple:
        rows.append([hess[:, 0, 1] * L**2, hess[:, 1, 2] * L**2])
        rhs.append([0.0, 0.0])
    A = np.vstack([np.atleast_2d(r) for r in rows])
    b = np.concatenate([np.ravel(r) for r in rhs])
    return A, b


def solve_axial_well(trap: TrapModel, target_y, axial_frequency, decouple=True,
                     tol=1e-8) -> WellSolution:
    """Minimum-norm DC voltages that trap the ion on the RF null at ``target_y``
    with axial (y) angular frequency ``axial_frequency``."""
    null = find_null(trap, [target_y])[0]
    A, b = well_constraints(trap, null, axial_frequency, decouple)
    if A.shape[1] < A.shape[0]:
        raise Infeasible(f"{A.shape[1]} DC electrodes cannot meet {A.shape[0]} constraints",
                         y=target_y)
    v, *_ = np.linalg.lstsq(A, b, rcond=None)
    cond = float(np.linalg.cond(A))
    residual = float(np.linalg.norm(A @ v - b) / np.linalg.norm(b))
    if residual > tol:
        raise Infeasible(f"voltage solve residual {residual:.2e} at y={target_y:.3e} m "
                         f"(condition number {cond:.2e})", residual, cond, target_y)
    voltages = dict(zip(trap.dc_names, map(float, v)))

    # refine the actual minimum by Newton steps on the effective potential
    pos = null.copy()
    for _ in range(5):
        f = lambda p: potential_energy(trap, p, voltages)
        H = numerical_hessian(f, pos)
        h = HESSIAN_STEP
        grad = np.array([(f(pos + e) - f(pos - e)) / (2 * h) for e in np.eye(3) * h])
        step = np.linalg.solve(H, grad)
        pos = pos - step
        if np.linalg.norm(step) < 1e-13:
            break
    freqs, axes = secular_modes(trap, pos, voltages)
    return WellSolution(pos, freqs, axes, voltages, residual, cond, null)


def shuttle_scan(trap: TrapModel, y_values, axial_frequency, decouple=True):
    out = []
    for y in y_values:
        try:
            out.append(solve_axial_well(trap, y, axial_frequency, decouple))
        except Infeasible as exc:
            exc.y = y
            raise
    return out
