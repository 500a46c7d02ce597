"""Piecewise radial amplitudes and planar synthesis of dihedral ring patterns.

Near onset a localised ring splits into an inner core, where every angular
mode rides a Bessel envelope, and an outer skirt carried by the radial
Ginzburg-Landau pulse q.  Writing s = sqrt(mu)*r and

    psi_n(r) = r - m*n*pi/2 - pi/4,

the amplitude of mode n is assembled as

    u_n(r) = sign * 2*a_n * mu^(3/4) * q0 * sqrt(pi/2)
             * [ r*J_{mn+1}(r) U0 + 2*J_{mn}(r) U1 ],            r <= r0,

    u_n(r) = sign * 2*a_n * [ mu^(1/2) * q(s) * sin(psi_n) U0
             + 2*mu * (q'(s) + q(s)/(2s)) * cos(psi_n) U1 ],     r > r0.

The outer U1 coefficient is the radial operator d/dr + 1/(2r) applied to
q(sqrt(mu)*r); each d/dr pulls out a factor sqrt(mu), which is why the U1
term sits one power of mu^(1/2) below the U0 term.  In the overlap window
r0 < r << mu^(-1/2) both rows collapse onto the same oscillatory envelope:
large-argument asymptotics give sqrt(pi/2)*r*J_{mn+1}(r) -> sqrt(r)*sin(psi_n)
and sqrt(pi/2)*2*J_{mn}(r) -> 2*cos(psi_n)/sqrt(r), while q(s) ~ q0*sqrt(s)
and q'(s)+q/(2s) ~ q0/sqrt(s) for small s.  The intermediate branch

    mu^(3/4) * q0 * [ sqrt(r)*sin(psi_n) U0 + 2*cos(psi_n)/sqrt(r) U1 ]

is therefore the shared leading order of the other two, and the default
evaluation uses just core and far pieces with a hard switch at r0.  The
strict three-region form stays available behind a keyword for asymptotics
checks, as does a cosmetic C0 cosine blend across the seam.

The planar field is the cosine sum u(r,theta) = u_0(r)
+ 2*sum_{n>=1} u_n(r)*cos(m*n*theta); grids store its projection onto the
adjoint kernel vector U0s (and onto U1s, which for non-degenerate systems
need not vanish at the origin even though the U0s projection always does).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, DomainError
from .glradial import GLSolution, evaluate, find_homoclinic
from .matching import transform_r
from .rdsys import BifCoefficients, RDSystem, TuringData, coefficients, verify_turing
from .specfun import j_table


def default_r0(m: int, N: int) -> float:
    """Core radius ample for the slowest Bessel envelope, r0 >> (mN)^2."""
    return float(max(60.0, 2.0 * (m * N) ** 2 + 20.0))


@dataclass(frozen=True)
class ProfileContext:
    """Everything needed to evaluate one ring solution at one mu.

    ``a`` holds the matching amplitudes (a_0 ... a_N); ``sign`` selects the
    pitchfork branch (the paired solution is the pointwise negative).
    ``r0`` separates the Bessel core from the Ginzburg-Landau skirt and
    ``r1`` locates the strict-mode far boundary at r1 / sqrt(mu).
    """

    m: int
    N: int
    mu: float
    a: np.ndarray
    gl: GLSolution
    turing: TuringData
    coeffs: BifCoefficients
    r0: Optional[float] = None
    r1: float = 0.5
    sign: int = 1

    def __post_init__(self):
        if self.m < 1 or self.N < 0:
            raise DomainError(f"need m >= 1 and N >= 0, got m={self.m}, N={self.N}")
        if not 0.0 < self.mu < 1.0:
            raise DomainError(f"mu must lie in (0, 1), got {self.mu}")
        a = np.asarray(self.a, dtype=float)
        if a.shape != (self.N + 1,):
            raise DimensionMismatch(
                f"amplitude vector must have length N+1={self.N + 1}, got shape {a.shape}"
            )
        object.__setattr__(self, "a", a)
        if self.r0 is None:
            object.__setattr__(self, "r0", default_r0(self.m, self.N))
        floor = 2.0 * (self.m * self.N) ** 2 + 20.0
        if self.r0 < floor:
            raise DomainError(f"r0={self.r0} below core floor {floor} for m={self.m}, N={self.N}")
        if not 0.0 < self.r1 <= 1.0:
            raise DomainError(f"r1 must lie in (0, 1], got {self.r1}")
        if self.sign not in (-1, 1):
            raise DomainError(f"sign must be +1 or -1, got {self.sign}")
        if self.r1 / np.sqrt(self.mu) <= self.r0:
            warnings.warn(
                f"far boundary r1/sqrt(mu)={self.r1 / np.sqrt(self.mu):.3g} does not "
                f"exceed r0={self.r0}; regions are not ordered at this mu and the "
                "strict three-region mode degenerates to core+far",
                stacklevel=2,
            )


def build_context(
    sys: RDSystem,
    m: int,
    N: int,
    a,
    mu: float,
    *,
    r0: Optional[float] = None,
    r1: float = 0.5,
    sign: int = 1,
    gl: Optional[GLSolution] = None,
) -> ProfileContext:
    """Run the linear analysis and far-field solve, then bundle a context.

    Raises Supercritical (from the homoclinic solver) when c3 >= 0, since
    no localised skirt exists on that side.
    """
    turing = verify_turing(sys)
    coeffs = coefficients(sys)
    if gl is None:
        gl = find_homoclinic(coeffs.c0, coeffs.c3)
    return ProfileContext(
        m=m, N=N, mu=mu, a=a, gl=gl, turing=turing, coeffs=coeffs,
        r0=r0, r1=r1, sign=sign,
    )


def _core_rows(ctx: ProfileContext, n: int, r: np.ndarray) -> np.ndarray:
    """mu^(3/4)*q0*sqrt(pi/2)*[r*J_{mn+1}U0 + 2*J_{mn}U1], without sign*2a_n."""
    mn = ctx.m * n
    tab = j_table(r, mn + 1)
    pref = ctx.mu ** 0.75 * ctx.gl.q0 * np.sqrt(np.pi / 2.0)
    out = np.empty((r.size, 2))
    out[:] = pref * (r * tab[mn + 1])[:, None] * ctx.turing.U0
    out += pref * 2.0 * tab[mn][:, None] * ctx.turing.U1
    return out


def _far_rows(ctx: ProfileContext, n: int, r: np.ndarray) -> np.ndarray:
    """mu^(1/2)*q(s)*sin(psi)U0 + 2*mu*dq(s)*cos(psi)U1, without sign*2a_n."""
    s = np.sqrt(ctx.mu) * r
    q, dq = evaluate(ctx.gl, s)
    psi = r - ctx.m * n * np.pi / 2.0 - np.pi / 4.0
    out = np.empty((r.size, 2))
    out[:] = (np.sqrt(ctx.mu) * q * np.sin(psi))[:, None] * ctx.turing.U0
    out += (2.0 * ctx.mu * dq * np.cos(psi))[:, None] * ctx.turing.U1
    return out


def _middle_rows(ctx: ProfileContext, n: int, r: np.ndarray) -> np.ndarray:
    """mu^(3/4)*q0*[sqrt(r)*sin(psi)U0 + 2*cos(psi)/sqrt(r)U1], without sign*2a_n."""
    psi = r - ctx.m * n * np.pi / 2.0 - np.pi / 4.0
    pref = ctx.mu ** 0.75 * ctx.gl.q0
    out = np.empty((r.size, 2))
    out[:] = pref * (np.sqrt(r) * np.sin(psi))[:, None] * ctx.turing.U0
    out += pref * 2.0 * (np.cos(psi) / np.sqrt(r))[:, None] * ctx.turing.U1
    return out


def radial_amplitude(ctx: ProfileContext, n: int, r, *,
                     three_region: bool = False, blend: bool = False) -> np.ndarray:
    """Evaluate u_n on radii r; shape (len(r), 2), or (2,) for a scalar r.

    Default is the two-region form (core for r <= r0, Ginzburg-Landau skirt
    beyond).  ``three_region=True`` inserts the shared oscillatory envelope
    between r0 and r1/sqrt(mu).  ``blend=True`` replaces the hard switch at
    r0 with a C0 cosine ramp over [0.95*r0, 1.05*r0].
    """
    if not 0 <= n <= ctx.N:
        raise DomainError(f"mode index {n} outside 0..{ctx.N}")
    scalar = np.isscalar(r) or np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0.0):
        raise DomainError("radii must be nonnegative")
    out = np.zeros((r.size, 2))
    amp = ctx.sign * 2.0 * ctx.a[n]
    if amp != 0.0:
        core = r <= ctx.r0
        far = ~core
        if np.any(core):
            out[core] = _core_rows(ctx, n, r[core])
        if np.any(far):
            if three_region:
                rb = ctx.r1 / np.sqrt(ctx.mu)
                mid = far & (r <= rb)
                tail = far & (r > rb)
                if np.any(mid):
                    out[mid] = _middle_rows(ctx, n, r[mid])
                if np.any(tail):
                    out[tail] = _far_rows(ctx, n, r[tail])
            else:
                out[far] = _far_rows(ctx, n, r[far])
        if blend:
            lo, hi = 0.95 * ctx.r0, 1.05 * ctx.r0
            band = (r >= lo) & (r <= hi) & (r > 0.0)
            if np.any(band):
                t = (r[band] - lo) / (hi - lo)
                w = 0.5 * (1.0 + np.cos(np.pi * t))
                out[band] = (w[:, None] * _core_rows(ctx, n, r[band])
                             + (1.0 - w)[:, None] * _far_rows(ctx, n, r[band]))
        out *= amp
    return out[0] if scalar else out


def field_values(ctx: ProfileContext, r, theta, *, three_region: bool = False,
                 blend: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Analytic point evaluation of the two adjoint projections of u(r, theta).

    Returns (proj0, proj1) with proj0 = <U0s, u> and proj1 = <U1s, u>,
    broadcast over matching r and theta arrays.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    r, theta = np.broadcast_arrays(r, theta)
    shape = r.shape
    r = r.ravel()
    theta = theta.ravel()
    proj0 = np.zeros(r.size)
    proj1 = np.zeros(r.size)
    for n in range(ctx.N + 1):
        un = radial_amplitude(ctx, n, r, three_region=three_region, blend=blend)
        weight = 1.0 if n == 0 else 2.0
        ang = weight * np.cos(ctx.m * n * theta)
        proj0 += ang * (un @ ctx.turing.U0s)
        proj1 += ang * (un @ ctx.turing.U1s)
    return proj0.reshape(shape), proj1.reshape(shape)


@dataclass(frozen=True)
class PlanarGrid:
    """Square cartesian sampling window [-extent, extent]^2.

    ``resolution`` counts samples per axis.  For disc-shaped figures pick
    extent equal to the disc radius and mask r > extent when plotting.
    """

    extent: float
    resolution: int

    def __post_init__(self):
        if self.extent <= 0.0:
            raise DomainError(f"extent must be positive, got {self.extent}")
        if self.resolution < 0:
            raise DomainError(f"resolution must be nonnegative, got {self.resolution}")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(-self.extent, self.extent, self.resolution)
        return x, x.copy()


@dataclass(frozen=True)
class RingField:
    """Sampled planar field plus the per-mode radial data that built it.

    ``values[iy, ix]`` is <U0s, u> at (x[ix], y[iy]); ``values_u1`` the
    companion <U1s, u> projection.  ``mode_amplitudes`` maps 'r' to a radial
    grid and 'modes' to an (N+1, len(r), 2) stack of u_n samples.
    """

    grid: PlanarGrid
    values: np.ndarray
    values_u1: np.ndarray
    mode_amplitudes: Optional[dict] = None
    meta: dict = field(default_factory=dict)


def synthesize_field(ctx: ProfileContext, grid: PlanarGrid, *,
                     label: str = "", three_region: bool = False) -> RingField:
    """Sample both adjoint projections of the ring field on a planar grid."""
    x, y = grid.axes()
    if grid.resolution == 0:
        vals = np.zeros((0, 0))
        proj1 = np.zeros((0, 0))
    else:
        X, Y = np.meshgrid(x, y)
        R = np.hypot(X, Y)
        TH = np.arctan2(Y, X)
        vals, proj1 = field_values(ctx, R, TH, three_region=three_region)
    r_line = np.linspace(0.0, np.sqrt(2.0) * grid.extent, max(2 * grid.resolution, 2))
    modes = np.stack([
        radial_amplitude(ctx, n, r_line, three_region=three_region)
        for n in range(ctx.N + 1)
    ])
    meta = {
        "m": ctx.m, "N": ctx.N, "mu": ctx.mu,
        "solution": label or ",".join(f"{float(v)!r}" for v in ctx.a),
        "r0": float(ctx.r0), "r1": float(ctx.r1), "sign": ctx.sign,
        "q0": ctx.gl.q0, "c0": ctx.coeffs.c0, "c3": ctx.coeffs.c3,
        "extent": grid.extent, "resolution": grid.resolution,
    }
    return RingField(grid=grid, values=vals, values_u1=proj1,
                     mode_amplitudes={"r": r_line, "modes": modes}, meta=meta)


def apply_R_rotation(ctx: ProfileContext, *, n_samples: int = 100, seed: int = 0) -> float:
    """Max |field(R a) - field(a, theta + pi/m)| over random analytic samples.

    The transform R negates odd amplitudes, and term by term
    cos(m n (theta + pi/m)) = (-1)^n cos(m n theta), so the deviation is
    floating-point noise for any context.
    """
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.0, 1.5 * ctx.r0, n_samples)
    theta = rng.uniform(-np.pi, np.pi, n_samples)
    rotated = replace(ctx, a=transform_r(ctx.a))
    f_rot, _ = field_values(rotated, r, theta)
    f_shift, _ = field_values(ctx, r, theta + np.pi / ctx.m)
    return float(np.max(np.abs(f_rot - f_shift)))


_HEADER_KEYS = ("m", "N", "mu")
_GRID_KEYS = ("extent", "resolution", "r0", "r1", "sign", "q0", "c0", "c3")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def export_field(fld: RingField, path, *, which: str = "u0") -> None:
    """Write samples as CSV: `# m=.. N=.. mu=..` headers, then x,y,value rows.

    Rows run y-row by y-row with x fastest.  Floats use shortest round-trip
    formatting so a re-import reproduces the samples bit for bit.
    """
    if which not in ("u0", "u1"):
        raise DomainError(f"which must be 'u0' or 'u1', got {which!r}")
    vals = fld.values if which == "u0" else fld.values_u1
    meta = fld.meta
    x, y = fld.grid.axes()
    lines = []
    lines.append("# " + " ".join(f"{k}={_fmt(meta[k])}" for k in _HEADER_KEYS if k in meta))
    lines.append("# " + " ".join(f"{k}={_fmt(meta[k])}" for k in _GRID_KEYS if k in meta)
                 + f" projection={which}")
    if "solution" in meta:
        lines.append(f"# solution={meta['solution']}")
    for iy in range(vals.shape[0]):
        for ix in range(vals.shape[1]):
            lines.append(f"{float(x[ix])!r},{float(y[iy])!r},{float(vals[iy, ix])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def import_field(path) -> RingField:
    """Read a CSV written by export_field; inverse up to mode_amplitudes."""
    meta: dict = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" not in tok:
                        continue
                    k, v = tok.split("=", 1)
                    if k in ("m", "N", "resolution", "sign"):
                        meta[k] = int(v)
                    elif k in ("projection", "solution"):
                        meta[k] = v
                    else:
                        meta[k] = float(v)
            else:
                rows.append([float(t) for t in line.split(",")])
    res = meta.get("resolution", 0)
    grid = PlanarGrid(extent=meta.get("extent", 1.0), resolution=res)
    vals = np.zeros((res, res))
    if rows:
        data = np.asarray(rows)
        if data.shape[0] != res * res:
            raise DimensionMismatch(
                f"expected {res * res} samples for resolution {res}, got {data.shape[0]}"
            )
        vals = data[:, 2].reshape(res, res)
    if meta.get("projection", "u0") == "u1":
        return RingField(grid=grid, values=np.full_like(vals, np.nan),
                         values_u1=vals, meta=meta)
    return RingField(grid=grid, values=vals, values_u1=np.full_like(vals, np.nan),
                     meta=meta)


def export_modes(fld: RingField, path) -> None:
    """Dump the per-mode radial amplitudes: r, then comp0,comp1 per mode."""
    if fld.mode_amplitudes is None:
        raise DomainError("field carries no mode amplitudes")
    r = fld.mode_amplitudes["r"]
    modes = fld.mode_amplitudes["modes"]
    n_modes = modes.shape[0]
    cols = ["r"] + [f"u{n}_c{c}" for n in range(n_modes) for c in (0, 1)]
    lines = ["# " + " ".join(f"{k}={_fmt(fld.meta[k])}" for k in _HEADER_KEYS if k in fld.meta),
             "# columns: " + ",".join(cols)]
    for i in range(r.size):
        parts = [repr(float(r[i]))]
        for n in range(n_modes):
            parts.append(repr(float(modes[n, i, 0])))
            parts.append(repr(float(modes[n, i, 1])))
        lines.append(",".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
