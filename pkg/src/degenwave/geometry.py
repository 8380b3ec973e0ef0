"""Domains with a boundary degeneracy at the origin.

Boundaries are closed loops of circular arcs (a twice-differentiable
parametric kind is accepted for sampling-based certification only).  Loops
are traversed with the domain on the left, so the outward normal at a point
with unit tangent t is (t_y, -t_x).  For a circular arc this means the
normal points away from the arc center on counterclockwise pieces and
toward it on clockwise pieces.

The canonical fixture is a pinched annulus: the disk B((0,1), 2) minus the
closed disk B((0, 0.25), 0.25), which is tangent to the outer region at the
origin.  Its inner circle satisfies x . nu = -x2 <= 0, the sign condition
required near the degenerate point, while the outer circle has
x . nu = (3 + x2)/2 >= 1 and forms the observation boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

CCW = "CCW"
CW = "CW"


class GeometryError(Exception):
    """Base class for geometry construction and certification failures."""


class DegeneratePointOffBoundary(GeometryError):
    """No boundary loop passes through the origin."""


class EpsilonTooLarge(GeometryError):
    """Cut parameter violates epsilon < R0/8."""


class CutDisconnectsDomain(GeometryError):
    """Removing the cut neighborhood would not leave a single domain."""


class Gamma0MeetsDegenerateBall(GeometryError):
    """A positive-sign boundary arc intersects B(0, R0)."""


class UnsupportedBoundary(GeometryError):
    """Operation requires piecewise circular-arc boundaries."""


@dataclass(frozen=True)
class Arc:
    """Circular boundary arc traversed from angle theta0 to theta1.

    The traversal is counterclockwise around ``center`` when
    ``theta1 > theta0`` and clockwise otherwise; angles are not wrapped, so
    the sweep ``theta1 - theta0`` carries the full signed extent.  Optional
    exact endpoints override the trigonometric evaluation at s = 0 and
    s = 1, which keeps constructed vertices (the origin in particular)
    bitwise exact.
    """

    center: tuple[float, float]
    radius: float
    theta0: float
    theta1: float
    p0: tuple[float, float] | None = None
    p1: tuple[float, float] | None = None

    @property
    def kind(self) -> str:
        return "CIRCULAR_ARC"

    @property
    def ccw(self) -> bool:
        return self.theta1 > self.theta0

    @property
    def orientation(self) -> str:
        return CCW if self.ccw else CW

    @property
    def sweep(self) -> float:
        return self.theta1 - self.theta0

    def length(self) -> float:
        return abs(self.sweep) * self.radius

    def angle(self, s) -> np.ndarray:
        return self.theta0 + np.asarray(s, dtype=float) * self.sweep

    def position(self, s) -> np.ndarray:
        th = self.angle(s)
        c = np.asarray(self.center, dtype=float)
        p = c + self.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
        if p.ndim == 1:
            if self.p0 is not None and float(s) == 0.0:
                return np.asarray(self.p0, dtype=float)
            if self.p1 is not None and float(s) == 1.0:
                return np.asarray(self.p1, dtype=float)
            return p
        s_arr = np.asarray(s, dtype=float)
        if self.p0 is not None:
            p[s_arr == 0.0] = np.asarray(self.p0, dtype=float)
        if self.p1 is not None:
            p[s_arr == 1.0] = np.asarray(self.p1, dtype=float)
        return p

    def tangent(self, s) -> np.ndarray:
        th = self.angle(s)
        sgn = 1.0 if self.ccw else -1.0
        return sgn * np.stack([-np.sin(th), np.cos(th)], axis=-1)

    def outward_normal(self, s) -> np.ndarray:
        # Domain on the left of the traversal: nu = (t_y, -t_x).  For arcs
        # this is +u on CCW pieces and -u on CW pieces, u radial from center.
        th = self.angle(s)
        sgn = 1.0 if self.ccw else -1.0
        return sgn * np.stack([np.cos(th), np.sin(th)], axis=-1)

    def curvature(self, s) -> np.ndarray:
        k = (1.0 if self.ccw else -1.0) / self.radius
        return np.full(np.shape(np.asarray(s, dtype=float)), k)

    def subarc(self, s0: float, s1: float, p0=None, p1=None) -> "Arc":
        a0 = self.theta0 + s0 * self.sweep
        a1 = self.theta0 + s1 * self.sweep
        q0 = p0 if p0 is not None else (self.p0 if s0 == 0.0 else None)
        q1 = p1 if p1 is not None else (self.p1 if s1 == 1.0 else None)
        return Arc(self.center, self.radius, a0, a1,
                   p0=None if q0 is None else (float(q0[0]), float(q0[1])),
                   p1=None if q1 is None else (float(q1[0]), float(q1[1])))

    def param_of_angle(self, theta: float) -> float:
        """Traversal parameter of an atan2-style angle, or nan if outside."""
        lo, hi = min(self.theta0, self.theta1), max(self.theta0, self.theta1)
        for k in (-1, 0, 1):
            t = theta + 2.0 * math.pi * k
            if lo - 1e-12 <= t <= hi + 1e-12:
                return (t - self.theta0) / self.sweep
        return float("nan")


@dataclass(frozen=True)
class ParametricCurve:
    """Twice-differentiable boundary piece given by callables.

    ``fn(s)`` maps arrays of parameters in [0, 1] to points (..., 2);
    ``dfn`` and ``ddfn`` are its first two derivatives.  Certification and
    Gamma0 extraction sample it; meshing and cutting do not support it.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    dfn: Callable[[np.ndarray], np.ndarray]
    ddfn: Callable[[np.ndarray], np.ndarray]
    arclength: float

    @property
    def kind(self) -> str:
        return "PARAMETRIC_C2"

    def length(self) -> float:
        return self.arclength

    def position(self, s) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(s, dtype=float)), dtype=float)

    def tangent(self, s) -> np.ndarray:
        d = np.asarray(self.dfn(np.asarray(s, dtype=float)), dtype=float)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def outward_normal(self, s) -> np.ndarray:
        t = self.tangent(s)
        return np.stack([t[..., 1], -t[..., 0]], axis=-1)

    def curvature(self, s) -> np.ndarray:
        d = np.asarray(self.dfn(np.asarray(s, dtype=float)), dtype=float)
        dd = np.asarray(self.ddfn(np.asarray(s, dtype=float)), dtype=float)
        cross = d[..., 0] * dd[..., 1] - d[..., 1] * dd[..., 0]
        return cross / np.linalg.norm(d, axis=-1) ** 3


Curve = Arc | ParametricCurve


@dataclass(frozen=True)
class DomainSpec:
    """Admissible domain: loops of boundary curves plus certified constants.

    ``loops[0]`` is the outer loop; the rest are holes.  ``R0`` bounds the
    neighborhood of the origin where x . nu <= 0 must hold, ``M`` dominates
    sup |x| + 1 over the closure, and ``gamma0`` lists the sub-arcs where
    x . nu > 0 (the observation boundary).
    """

    loops: tuple[tuple[Curve, ...], ...]
    R0: float
    M: float
    gamma0: tuple[Arc, ...] = ()
    name: str = ""

    def all_curves(self):
        for loop in self.loops:
            yield from loop

    def boundary_diameter_bound(self) -> float:
        out = 0.0
        for c in self.all_curves():
            if isinstance(c, Arc):
                out = max(out, float(np.linalg.norm(c.center)) + c.radius)
            else:
                s = np.linspace(0.0, 1.0, 512)
                out = max(out, float(np.max(np.linalg.norm(c.position(s), axis=-1))))
        return out


@dataclass(frozen=True)
class CutDomainSpec:
    """Regularized domain: parent minus a neighborhood of the origin.

    The artificial boundary is the circular arc |x| = 1.5 epsilon inside the
    parent, joined to the parent boundary by tangent fillet arcs.  All
    curves of the modified loop set are stored in traversal order so the
    cut domain meshes and certifies exactly like a DomainSpec.
    """

    parent: DomainSpec
    epsilon: float
    cut_arc: Arc
    blend_arcs: tuple[Arc, ...]
    loops: tuple[tuple[Curve, ...], ...]
    removed_parent_arcs: tuple[Arc, ...]

    @property
    def cut_radius(self) -> float:
        return 1.5 * self.epsilon

    @property
    def R0(self) -> float:
        return self.parent.R0

    @property
    def M(self) -> float:
        return self.parent.M

    @property
    def gamma0(self) -> tuple[Arc, ...]:
        return self.parent.gamma0

    def all_curves(self):
        for loop in self.loops:
            yield from loop


@dataclass(frozen=True)
class ClauseResult:
    clause: str
    passed: bool
    worst_value: float
    worst_location: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "clause": self.clause,
            "pass": self.passed,
            "worst_value": self.worst_value,
            "worst_location": list(self.worst_location),
        }


@dataclass(frozen=True)
class CertificationResult:
    clauses: tuple[ClauseResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def clause(self, name: str) -> ClauseResult:
        for c in self.clauses:
            if c.clause == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"pass": self.passed, "clauses": [c.to_dict() for c in self.clauses]}


def make_pinched_annulus() -> DomainSpec:
    """Canonical fixture: B((0,1), 2) minus the closed disk B((0,0.25), 0.25).

    The inner circle is tangent to the x1-axis at the origin, giving
    x . nu = -x2 <= 0 on the whole inner boundary with equality exactly at
    the degenerate point.  The outer circle has x . nu >= 1 everywhere and
    is the full observation boundary.  R0 = 0.5 and M = 4 are exact.
    """
    # Outer circle, CCW, split at bottom (0,-1) and top (0,3).
    qc = (0.0, 1.0)
    outer = (
        Arc(qc, 2.0, -0.5 * math.pi, 0.5 * math.pi, p0=(0.0, -1.0), p1=(0.0, 3.0)),
        Arc(qc, 2.0, 0.5 * math.pi, 1.5 * math.pi, p0=(0.0, 3.0), p1=(0.0, -1.0)),
    )
    # Inner circle, CW (hole), split at top (0, 0.5) and at the origin.
    pc = (0.0, 0.25)
    inner = (
        Arc(pc, 0.25, 0.5 * math.pi, -0.5 * math.pi, p0=(0.0, 0.5), p1=(0.0, 0.0)),
        Arc(pc, 0.25, -0.5 * math.pi, -1.5 * math.pi, p0=(0.0, 0.0), p1=(0.0, 0.5)),
    )
    return DomainSpec(
        loops=(outer, inner),
        R0=0.5,
        M=4.0,
        gamma0=outer,
        name="pinched_annulus",
    )


def make_convex_disk() -> DomainSpec:
    """Counterexample: the disk B((0,1), 1), origin on its boundary.

    On a circle through the origin with the domain inside, x . nu = x2 > 0
    arbitrarily close to the degenerate point, so the sign condition fails
    for every R0 > 0.
    """
    qc = (0.0, 1.0)
    loop = (
        Arc(qc, 1.0, -0.5 * math.pi, 0.5 * math.pi, p0=(0.0, 0.0), p1=(0.0, 2.0)),
        Arc(qc, 1.0, 0.5 * math.pi, 1.5 * math.pi, p0=(0.0, 2.0), p1=(0.0, 0.0)),
    )
    return DomainSpec(loops=(loop,), R0=0.5, M=3.0, gamma0=(), name="convex_disk")


_CLAUSE_ORIGIN = "ORIGIN_ON_BOUNDARY"
_CLAUSE_SIGN = "SIGN_CONDITION_NEAR_ORIGIN"
_CLAUSE_GAMMA0 = "GAMMA0_OUTSIDE_DEGENERATE_BALL"
_CLAUSE_M = "M_DOMINATES_SUP_NORM"


def _sample_curve(curve: Curve, n: int):
    s = np.linspace(0.0, 1.0, n)
    return curve.position(s), curve.outward_normal(s)


def golden_refine(f: Callable[[float], float], lo: float, hi: float,
                  tol: float = 1e-14, iters: int = 200):
    """Golden-section maximization of a unimodal scalar function.

    Returns (argmax, max).  Deterministic; used to sharpen extrema located
    first by dense sampling.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    s = 0.5 * (a + b)
    return s, f(s)


def certify_domain(domain: DomainSpec | CutDomainSpec, samples: int = 10_000,
                   sign_tol: float = 1e-9) -> CertificationResult:
    """Certify the geometric hypotheses by deterministic boundary sampling.

    Checks, per clause: the origin lies on the boundary; x . nu <= sign_tol
    on every sampled boundary point inside B(0, R0); declared gamma0 arcs
    stay outside B(0, R0); and M dominates the sampled sup of |x| plus one.
    Samples are uniform in the traversal parameter of each curve, so the
    certificate is reproducible for a fixed count.

    Parameters
    ----------
    domain : DomainSpec or CutDomainSpec
        Domain to certify (cut domains certify their modified loops).
    samples : int
        Points per boundary curve, at least 1000.
    sign_tol : float
        Slack covering floating point in the sign clause.

    Raises
    ------
    DegeneratePointOffBoundary
        If no boundary point comes within sign_tol of the origin and the
        domain is not a cut domain (cut domains exclude the origin by
        construction, so the clause is reported against the parent).
    """
    if samples < 1000:
        raise ValueError("certification requires samples >= 1000")
    if sign_tol < 0:
        raise ValueError("sign_tol must be >= 0")

    is_cut = isinstance(domain, CutDomainSpec)
    R0 = domain.R0
    curves = list(domain.all_curves())

    min_dist = math.inf
    min_loc = (math.inf, math.inf)
    worst_sign = -math.inf
    worst_sign_loc = (0.0, 0.0)
    sign_seen = False
    sup_norm = 0.0
    sup_loc = (0.0, 0.0)

    def dist_at(curve, s):
        return float(np.linalg.norm(curve.position(float(s))))

    for curve in curves:
        pts, nus = _sample_curve(curve, samples)
        r = np.linalg.norm(pts, axis=-1)
        ds = 1.0 / (samples - 1)
        i = int(np.argmin(r))
        s_min, neg = golden_refine(
            lambda s: -dist_at(curve, s),
            max(0.0, i * ds - ds), min(1.0, i * ds + ds))
        if -neg < min_dist:
            min_dist = -neg
            p = curve.position(s_min)
            min_loc = (float(p[0]), float(p[1]))
        j = int(np.argmax(r))
        s_max, top = golden_refine(
            lambda s: dist_at(curve, s),
            max(0.0, j * ds - ds), min(1.0, j * ds + ds))
        if top > sup_norm:
            sup_norm = top
            p = curve.position(s_max)
            sup_loc = (float(p[0]), float(p[1]))
        near = r < R0
        if np.any(near):
            sign_seen = True
            xdotnu = np.einsum("ij,ij->i", pts[near], nus[near])
            k = int(np.argmax(xdotnu))
            if xdotnu[k] > worst_sign:
                worst_sign = float(xdotnu[k])
                sel = pts[near]
                worst_sign_loc = (float(sel[k, 0]), float(sel[k, 1]))

    clauses = []
    origin_pass = min_dist <= max(sign_tol, 1e-12) or is_cut
    if not origin_pass:
        raise DegeneratePointOffBoundary(
            f"nearest boundary point to origin at distance {min_dist:g}")
    clauses.append(ClauseResult(_CLAUSE_ORIGIN, True, min_dist, min_loc))

    if sign_seen:
        clauses.append(ClauseResult(_CLAUSE_SIGN, worst_sign <= sign_tol,
                                    worst_sign, worst_sign_loc))
    else:
        # Empty neighborhood: the near clause holds vacuously.
        clauses.append(ClauseResult(_CLAUSE_SIGN, True, -math.inf, (0.0, 0.0)))

    g0_min = math.inf
    g0_loc = (math.inf, math.inf)
    for arc in domain.gamma0:
        pts, _ = _sample_curve(arc, samples)
        r = np.linalg.norm(pts, axis=-1)
        i = int(np.argmin(r))
        if r[i] < g0_min:
            g0_min = float(r[i])
            g0_loc = (float(pts[i, 0]), float(pts[i, 1]))
    clauses.append(ClauseResult(_CLAUSE_GAMMA0, g0_min >= R0, g0_min, g0_loc))

    m_ok = domain.M >= sup_norm + 1.0 - 1e-12
    clauses.append(ClauseResult(_CLAUSE_M, m_ok, sup_norm, sup_loc))

    return CertificationResult(tuple(clauses))


def compute_gamma0(domain: DomainSpec, samples: int = 10_000) -> list[Arc]:
    """Locate the boundary sub-arcs where x . nu > 0.

    Sign changes of x . nu along each arc are refined by bisection to 1e-10
    in the traversal parameter.  Raises Gamma0MeetsDegenerateBall if any
    found sub-arc dips inside B(0, R0), which would contradict the sign
    condition near the degenerate point.
    """
    if samples < 1000:
        raise ValueError("compute_gamma0 requires samples >= 1000")

    def f(curve, s):
        p = curve.position(s)
        nu = curve.outward_normal(s)
        return float(np.dot(np.atleast_1d(p).ravel(), np.atleast_1d(nu).ravel()))

    out: list[Arc] = []
    for loop in domain.loops:
        for curve in loop:
            if not isinstance(curve, Arc):
                raise UnsupportedBoundary(
                    "gamma0 extraction is implemented for circular arcs only")
            s = np.linspace(0.0, 1.0, samples)
            pts = curve.position(s)
            nus = curve.outward_normal(s)
            vals = np.einsum("ij,ij->i", pts, nus)
            pos = vals > 0.0
            if not np.any(pos):
                continue
            # Locate maximal positive runs; bisect each boundary crossing.
            edges = np.flatnonzero(np.diff(pos.astype(np.int8)) != 0)
            bounds = [0.0] if pos[0] else []
            for e in edges:
                lo, hi = s[e], s[e + 1]
                flo = vals[e]
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    fm = f(curve, mid)
                    if (flo > 0) == (fm > 0):
                        lo, flo = mid, fm
                    else:
                        hi = mid
                    if hi - lo < 1e-10:
                        break
                bounds.append(0.5 * (lo + hi))
            if pos[-1]:
                bounds.append(1.0)
            for s0, s1 in zip(bounds[0::2], bounds[1::2]):
                out.append(curve.subarc(s0, s1))

    for arc in out:
        pts = arc.position(np.linspace(0.0, 1.0, 4096))
        rmin = float(np.min(np.linalg.norm(pts, axis=-1)))
        if rmin < domain.R0:
            raise Gamma0MeetsDegenerateBall(
                f"positive-sign arc reaches |x| = {rmin:g} < R0 = {domain.R0:g}")
    return out


def _circle_circle_intersections(c0, r0, c1, r1):
    """Both intersection points of two circles, or [] if disjoint."""
    c0 = np.asarray(c0, dtype=float)
    c1 = np.asarray(c1, dtype=float)
    d = float(np.linalg.norm(c1 - c0))
    if d == 0.0 or d > r0 + r1 or d < abs(r0 - r1):
        return []
    a = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d)
    h2 = r0 * r0 - a * a
    h = math.sqrt(max(h2, 0.0))
    u = (c1 - c0) / d
    m = c0 + a * u
    perp = np.array([-u[1], u[0]])
    if h == 0.0:
        return [m]
    return [m + h * perp, m - h * perp]


def _short_sweep(th_from: float, th_to: float) -> float:
    d = (th_to - th_from) % (2.0 * math.pi)
    if d > math.pi:
        d -= 2.0 * math.pi
    return d


def cut_domain(domain: DomainSpec, epsilon: float, fillet_ratio: float = 0.2
               ) -> CutDomainSpec:
    """Remove a neighborhood of the origin along the arc |x| = 1.5 epsilon.

    The artificial boundary is the part of the circle of radius
    1.5 epsilon that lies in the domain, blended into the boundary loop
    through the origin by two fillet arcs (radius ``fillet_ratio * epsilon``,
    at most a quarter of epsilon) tangent to both circles.  On the cut arc
    the outward normal is -x/|x|, so x . nu = -1.5 epsilon < 0 and the sign
    condition is inherited.  The removed set stays inside
    B(0, (1.5 + 2 fillet_ratio) epsilon), within the mandated doubled ball.

    Raises
    ------
    EpsilonTooLarge
        If epsilon is not in (0, R0/8).
    CutDisconnectsDomain
        If the cut circle does not meet the boundary in exactly two points
        on the loop through the origin.
    UnsupportedBoundary
        For parametric boundary pieces near the origin.
    """
    if not 0.0 < epsilon < domain.R0 / 8.0:
        raise EpsilonTooLarge(
            f"epsilon = {epsilon:g} outside (0, R0/8 = {domain.R0 / 8.0:g})")
    if not 0.0 < fillet_ratio <= 0.25:
        raise ValueError("fillet_ratio must lie in (0, 0.25]")

    rho = 1.5 * epsilon
    r_f = fillet_ratio * epsilon

    # The loop through the origin must have the origin as an arc endpoint.
    loop_idx = None
    for i, loop in enumerate(domain.loops):
        for c in loop:
            if isinstance(c, Arc):
                for p in (c.p0, c.p1):
                    if p is not None and p[0] == 0.0 and p[1] == 0.0:
                        loop_idx = i
    if loop_idx is None:
        raise DegeneratePointOffBoundary(
            "cut_domain requires the origin to be an arc endpoint of one loop")
    loop = domain.loops[loop_idx]
    if not all(isinstance(c, Arc) for c in loop):
        raise UnsupportedBoundary("cut construction needs circular arcs near origin")

    def origin_end(arc: Arc) -> int | None:
        for which, p in ((0, arc.p0), (1, arc.p1)):
            if p is not None and p[0] == 0.0 and p[1] == 0.0:
                return which
        return None

    # Arcs of that loop crossed by the cut circle.  The supported layout is
    # the generic small-epsilon one: the loop reaches the origin between two
    # adjacent arcs (one ending there, the next starting there) and the cut
    # circle crosses each of them exactly once.
    crossings: dict[int, np.ndarray] = {}
    for j, arc in enumerate(loop):
        for q in _circle_circle_intersections((0.0, 0.0), rho, arc.center, arc.radius):
            th = math.atan2(q[1] - arc.center[1], q[0] - arc.center[0])
            s = arc.param_of_angle(th)
            if not math.isnan(s) and 0.0 < s < 1.0:
                if j in crossings:
                    raise CutDisconnectsDomain(
                        "cut circle crosses one boundary arc twice")
                crossings[j] = np.asarray(q)
    if len(crossings) != 2:
        raise CutDisconnectsDomain(
            f"cut circle meets the origin loop in {len(crossings)} arcs, need 2")
    ja = jb = None
    for j in crossings:
        if origin_end(loop[j]) == 1:
            ja = j        # traversal enters the cut along this arc
        elif origin_end(loop[j]) == 0:
            jb = j        # traversal leaves the cut along this arc
    if ja is None or jb is None:
        raise CutDisconnectsDomain(
            "cut circle crossings are not adjacent to the origin")

    def make_fillet(j: int, q: np.ndarray):
        # Fillet circle center: tangent to the cut circle from outside and
        # tangent to the parent arc circle on the domain side.
        arc = loop[j]
        th_q = math.atan2(q[1] - arc.center[1], q[0] - arc.center[0])
        s_q = arc.param_of_angle(th_q)
        nu_q = arc.outward_normal(s_q)
        u_q = (q - np.asarray(arc.center)) / arc.radius
        outward_is_radial = float(np.dot(nu_q, u_q)) > 0.0
        arc_tangency_r = arc.radius - r_f if outward_is_radial else arc.radius + r_f
        candidates = _circle_circle_intersections(
            (0.0, 0.0), rho + r_f, arc.center, arc_tangency_r)
        if not candidates:
            raise CutDisconnectsDomain("no tangent fillet circle exists")
        c = min(candidates, key=lambda z: float(np.linalg.norm(z - q)))
        t1 = c * (rho / float(np.linalg.norm(c)))           # on the cut circle
        to_arc = np.asarray(arc.center) - c
        to_arc /= float(np.linalg.norm(to_arc))
        # Tangency with the parent circle lies between the centers for
        # external tangency and beyond the fillet center for internal.
        t2 = c + (-r_f if outward_is_radial else r_f) * to_arc
        return c, t1, t2

    c_a, t1a, t2a = make_fillet(ja, crossings[ja])
    c_b, t1b, t2b = make_fillet(jb, crossings[jb])

    def fillet_arc(c, start, end) -> Arc:
        # Short sweep between the tangency angles; the domain lies locally
        # inside the fillet circle, so the traversal must leave the outward
        # normal pointing away from the center.
        th0 = math.atan2(start[1] - c[1], start[0] - c[0])
        sweep = _short_sweep(th0, math.atan2(end[1] - c[1], end[0] - c[0]))
        arc = Arc((float(c[0]), float(c[1])), r_f, th0, th0 + sweep,
                  p0=(float(start[0]), float(start[1])),
                  p1=(float(end[0]), float(end[1])))
        mid = arc.position(0.5)
        nu = arc.outward_normal(0.5)
        if float(np.dot(nu, mid - np.asarray(c, dtype=float))) <= 0.0:
            raise CutDisconnectsDomain("fillet normal points into the domain")
        return arc

    fillet_a = fillet_arc(c_a, t2a, t1a)
    fillet_b = fillet_arc(c_b, t1b, t2b)

    # Trim the crossed arcs at the fillet tangencies; the origin-adjacent
    # pieces are dropped and recorded for the containment certificate.
    def split_at(j: int, t2: np.ndarray) -> tuple[Arc, Arc]:
        arc = loop[j]
        th2 = math.atan2(t2[1] - arc.center[1], t2[0] - arc.center[0])
        s2 = arc.param_of_angle(th2)
        if math.isnan(s2) or not 0.0 < s2 < 1.0:
            raise CutDisconnectsDomain("fillet tangency left the parent arc")
        if origin_end(arc) == 1:
            return arc.subarc(0.0, s2, p1=t2), arc.subarc(s2, 1.0, p0=t2)
        return arc.subarc(s2, 1.0, p0=t2), arc.subarc(0.0, s2, p1=t2)

    kept_a, removed_a = split_at(ja, t2a)
    kept_b, removed_b = split_at(jb, t2b)

    # Cut arc from T1_a to T1_b: the outward normal is -x/|x| (toward the
    # origin), which under the domain-on-left convention means clockwise
    # traversal; the clockwise branch is the one inside the domain.
    th_a = math.atan2(t1a[1], t1a[0])
    th_b = math.atan2(t1b[1], t1b[0])
    sweep_cw = ((th_b - th_a) % (2.0 * math.pi)) - 2.0 * math.pi
    cut = Arc((0.0, 0.0), rho, th_a, th_a + sweep_cw,
              p0=(float(t1a[0]), float(t1a[1])), p1=(float(t1b[0]), float(t1b[1])))

    new_loop: list[Curve] = []
    for j, arc in enumerate(loop):
        if j == ja:
            new_loop.extend([kept_a, fillet_a, cut, fillet_b])
        elif j == jb:
            new_loop.append(kept_b)
        else:
            new_loop.append(arc)
    _check_loop_closes(new_loop)

    loops = tuple(
        tuple(new_loop) if i == loop_idx else domain.loops[i]
        for i in range(len(domain.loops))
    )
    spec = CutDomainSpec(
        parent=domain,
        epsilon=epsilon,
        cut_arc=cut,
        blend_arcs=(fillet_a, fillet_b),
        loops=loops,
        removed_parent_arcs=(removed_a, removed_b),
    )
    _verify_cut(spec)
    return spec


def _check_loop_closes(loop: list[Curve], tol: float = 1e-9) -> None:
    for a, b in zip(loop, loop[1:] + loop[:1]):
        gap = float(np.linalg.norm(
            np.asarray(a.position(1.0)) - np.asarray(b.position(0.0))))
        if gap > tol:
            raise CutDisconnectsDomain(f"cut loop does not close (gap {gap:g})")


def _verify_cut(spec: CutDomainSpec, n: int = 4096) -> None:
    eps = spec.epsilon
    s = np.linspace(0.0, 1.0, n)
    # No boundary point of the cut domain inside B(0, epsilon); since |x|
    # attains its minimum over the closure on the boundary, this certifies
    # the domain clause as well.
    rmin = math.inf
    for c in spec.all_curves():
        rmin = min(rmin, float(np.min(np.linalg.norm(c.position(s), axis=-1))))
    if rmin < eps - 1e-12:
        raise CutDisconnectsDomain(f"cut domain reaches |x| = {rmin:g} < epsilon")
    # Removed set inside B(0, 2 epsilon): |x| is convex, so its max over the
    # removed region sits on the region boundary (cut arc, fillets, dropped
    # parent pieces).
    rmax = 0.0
    for c in (spec.cut_arc, *spec.blend_arcs, *spec.removed_parent_arcs):
        rmax = max(rmax, float(np.max(np.linalg.norm(c.position(s), axis=-1))))
    if rmax > 2.0 * eps + 1e-12:
        raise CutDisconnectsDomain(
            f"removed region reaches |x| = {rmax:g} > 2 epsilon")


# ---------------------------------------------------------------------------
# Serialization

def domain_to_dict(domain: DomainSpec) -> dict:
    def arc_dict(a: Arc) -> dict:
        return {
            "kind": a.kind,
            "center": [a.center[0], a.center[1]],
            "radius": a.radius,
            "angle_start": a.theta0,
            "angle_end": a.theta1,
            "orientation": a.orientation,
            "p0": None if a.p0 is None else list(a.p0),
            "p1": None if a.p1 is None else list(a.p1),
        }

    for c in domain.all_curves():
        if not isinstance(c, Arc):
            raise UnsupportedBoundary("only circular-arc domains serialize")
    return {
        "name": domain.name,
        "R0": domain.R0,
        "M": domain.M,
        "loops": [[arc_dict(a) for a in loop] for loop in domain.loops],
        "gamma0": [arc_dict(a) for a in domain.gamma0],
    }


def domain_from_dict(data: dict) -> DomainSpec:
    def arc(d: dict) -> Arc:
        if d.get("kind", "CIRCULAR_ARC") != "CIRCULAR_ARC":
            raise UnsupportedBoundary("only circular arcs load from files")
        return Arc(
            (float(d["center"][0]), float(d["center"][1])),
            float(d["radius"]),
            float(d["angle_start"]),
            float(d["angle_end"]),
            p0=None if d.get("p0") is None else (float(d["p0"][0]), float(d["p0"][1])),
            p1=None if d.get("p1") is None else (float(d["p1"][0]), float(d["p1"][1])),
        )

    return DomainSpec(
        loops=tuple(tuple(arc(a) for a in loop) for loop in data["loops"]),
        R0=float(data["R0"]),
        M=float(data["M"]),
        gamma0=tuple(arc(a) for a in data.get("gamma0", [])),
        name=data.get("name", ""),
    )


_FIXTURES = {
    "pinched_annulus": make_pinched_annulus,
    "convex_disk": make_convex_disk,
}


def load_domain(source: str | Path) -> DomainSpec:
    """Load a domain by fixture name or from a JSON description file."""
    key = str(source)
    if key in _FIXTURES:
        return _FIXTURES[key]()
    path = Path(source)
    if not path.exists():
        raise GeometryError(f"unknown domain fixture or file: {source}")
    with open(path, "r", encoding="utf-8") as fh:
        return domain_from_dict(json.load(fh))
