"""Conforming triangulations with boundary tags and an exactly nested ladder.

The domain is triangulated region by region: the cut curves of an
epsilon-ladder partition the full domain into an outer part, annular bands
between consecutive cuts, and a core touching the origin.  Every curve is
discretized once, each region is meshed against those shared polylines, and
the full-domain mesh is the union of all regions.  A cut-domain mesh is then
literally a subset of the parent's triangles, so extension by zero of
discrete functions is exact, not interpolated.

Interior vertices come from a deterministic graded ring lattice centered at
the origin, where the weight |x|^alpha loses ellipticity; the local target
edge length is h(x) = max(h_min, h_max * min(1, |x|)^grading).  Each region
is triangulated by Delaunay of its boundary and interior points, triangles
with centroid outside the region are discarded, and the resulting boundary
is verified to coincide segment-for-segment with the input polylines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import shapely
from scipy.spatial import Delaunay
from shapely.geometry import Polygon

from .geometry import Arc, CutDomainSpec, DomainSpec, cut_domain

OUTER_GAMMA0 = "OUTER_GAMMA0"
NEAR_DEGENERATE = "NEAR_DEGENERATE"
ARTIFICIAL_CUT = "ARTIFICIAL_CUT"

_CLEARANCE = 0.58          # interior points keep this fraction of h off the boundary
_RING_SPACING = 0.82       # radial ring gap as a fraction of local h
_AREA_TOL_FACTOR = 1e-14


class MeshFailure(Exception):
    """Triangulation could not reproduce the requested boundary."""


class LadderConflict(Exception):
    """Two cut radii cannot both be resolved as mesh edge paths."""


class NoParentMap(Exception):
    """Operation requires a mesh embedded in a parent mesh."""


@dataclass(frozen=True)
class ParentMap:
    """Injection of a mesh into its parent: local index -> parent index."""

    vertex_index: np.ndarray
    triangle_index: np.ndarray


@dataclass
class TriMesh:
    """Triangulation with tagged, outward-oriented boundary facets.

    ``facets[k] = (a, b)`` is directed along the boundary traversal with the
    domain on the left, so the outward normal of facet k is the edge vector
    rotated clockwise by 90 degrees.  ``facet_tri[k]`` is the triangle the
    facet belongs to (the carrier of the one-sided gradient used for normal
    derivatives).
    """

    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3), CCW
    facets: np.ndarray            # (nf, 2), directed
    facet_tags: np.ndarray        # (nf,), unicode
    facet_tri: np.ndarray         # (nf,)
    h_max: float
    grading: float
    h_min: float
    mesh_id: str = ""
    parent_map: ParentMap | None = None

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.facets.ravel()] = True
        return mask

    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_vertex_mask())

    def facet_lengths(self) -> np.ndarray:
        e = self.vertices[self.facets[:, 1]] - self.vertices[self.facets[:, 0]]
        return np.linalg.norm(e, axis=1)

    def facet_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.facets[:, 0]]
                      + self.vertices[self.facets[:, 1]])

    def facet_normals(self) -> np.ndarray:
        e = self.vertices[self.facets[:, 1]] - self.vertices[self.facets[:, 0]]
        n = np.stack([e[:, 1], -e[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def min_angle_degrees(self) -> float:
        p = self.vertices[self.triangles]
        worst = math.inf
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            worst = min(worst, float(np.min(np.degrees(np.arccos(
                np.clip(cosang, -1.0, 1.0))))))
        return worst

    def validate(self) -> None:
        areas = self.signed_areas()
        if np.any(areas <= _AREA_TOL_FACTOR * self.h_max ** 2):
            raise MeshFailure(
                f"degenerate triangle, min area {float(np.min(areas)):.3e}")
        # Boundary facets chain into closed loops: every facet tail is
        # exactly one other facet's head.
        heads = np.sort(self.facets[:, 0])
        tails = np.sort(self.facets[:, 1])
        if not np.array_equal(heads, tails):
            raise MeshFailure("boundary facets do not form closed loops")
        if self.parent_map is not None:
            pm = self.parent_map
            if pm.vertex_index.shape[0] != self.num_vertices:
                raise MeshFailure("parent_map vertex table size mismatch")


@dataclass(frozen=True)
class SizingField:
    """Graded target edge length h(x) = max(h_min, h_max min(1, |x|)^g)."""

    h_max: float
    grading: float
    h_min: float

    def at_radius(self, r):
        r = np.asarray(r, dtype=float)
        return np.maximum(self.h_min,
                          self.h_max * np.minimum(1.0, r) ** self.grading)

    def at(self, points):
        return self.at_radius(np.linalg.norm(np.asarray(points), axis=-1))


def _discretize_arc(arc: Arc, sizing: SizingField) -> np.ndarray:
    """Polyline along an arc with spacing following the sizing field.

    Segment count is the rounded integral of 1/h along the arc, and points
    are placed at equal increments of that density integral, so two calls
    with the same arc and sizing give bitwise identical polylines.  The
    chord-error cap h_max^2 binds only for small radii.
    """
    length = arc.length()
    chord_cap = math.sqrt(8.0 * arc.radius) * sizing.h_max
    fine = max(32, int(8.0 * length / sizing.h_min) + 1)
    s = np.linspace(0.0, 1.0, fine)
    h = np.minimum(sizing.at(arc.position(s)), chord_cap)
    dens = length / h
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1])
                                           * np.diff(s))])
    n = max(1, int(round(cum[-1])))
    targets = np.linspace(0.0, cum[-1], n + 1)
    sv = np.interp(targets, cum, s)
    pts = arc.position(sv)
    pts[0] = arc.position(0.0)
    pts[-1] = arc.position(1.0)
    return pts


def _ring_lattice(sizing: SizingField, r_outer: float) -> np.ndarray:
    """Deterministic graded point lattice on circles around the origin."""
    radii = []
    r = _RING_SPACING * float(sizing.at_radius(0.0))
    while r < r_outer:
        radii.append(r)
        r += _RING_SPACING * float(sizing.at_radius(r))
    chunks = []
    for j, rj in enumerate(radii):
        n = max(6, int(round(2.0 * math.pi * rj / float(sizing.at_radius(rj)))))
        th = 2.0 * math.pi * (np.arange(n) + 0.5 * (j % 2)) / n
        chunks.append(rj * np.stack([np.cos(th), np.sin(th)], axis=1))
    if not chunks:
        return np.zeros((0, 2))
    return np.concatenate(chunks, axis=0)


@dataclass
class _Polyline:
    points: np.ndarray           # (n, 2), open chain
    tag: str

    def reversed(self) -> "_Polyline":
        return _Polyline(self.points[::-1].copy(), self.tag)


@dataclass
class _Region:
    """Closed polyline loops bounding one region (index 0 may have holes)."""

    loops: list[list[_Polyline]]

    def loop_points(self, i: int) -> np.ndarray:
        parts = [pl.points[:-1] for pl in self.loops[i]]
        return np.concatenate(parts, axis=0)

    def polygon(self) -> Polygon:
        shell = self.loop_points(0)
        holes = [self.loop_points(i) for i in range(1, len(self.loops))]
        return Polygon(shell, holes)

    def all_segments(self):
        """Yield (p, q, tag) for every boundary segment."""
        for loop in self.loops:
            for pl in loop:
                for k in range(pl.points.shape[0] - 1):
                    yield pl.points[k], pl.points[k + 1], pl.tag


def _mesh_region(region: _Region, sizing: SizingField, r_outer: float
                 ) -> tuple[np.ndarray, np.ndarray, list[tuple]]:
    """Triangulate one region; returns (points, triangles, tagged segments).

    The boundary of the kept triangle set must equal the input polylines
    segment for segment, otherwise the lattice spacing cannot support the
    boundary and the call fails rather than returning a nonconforming mesh.
    """
    poly = region.polygon()
    boundary = poly.boundary

    bpts = []
    seg_tags = {}
    index_of = {}

    def vid(p) -> int:
        key = (float(p[0]), float(p[1]))
        if key not in index_of:
            index_of[key] = len(bpts)
            bpts.append(key)
        return index_of[key]

    for p, q, tag in region.all_segments():
        a, b = vid(p), vid(q)
        if a == b:
            raise MeshFailure("zero-length boundary segment")
        seg_tags[(min(a, b), max(a, b))] = (tag, (a, b))

    bpts_arr = np.asarray(bpts, dtype=float)
    lattice = _ring_lattice(sizing, r_outer)
    if lattice.shape[0]:
        inside = shapely.contains_xy(poly, lattice[:, 0], lattice[:, 1])
        cand = lattice[inside]
        if cand.shape[0]:
            d = shapely.distance(boundary, shapely.points(cand))
            cand = cand[d >= _CLEARANCE * sizing.at(cand)]
    else:
        cand = np.zeros((0, 2))
    pts = np.concatenate([bpts_arr, cand], axis=0)

    tri = Delaunay(pts)
    simplices = tri.simplices
    p = pts[simplices]
    areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    flip = areas < 0
    simplices[flip] = simplices[flip][:, ::-1]
    centroids = pts[simplices].mean(axis=1)
    keep = shapely.contains_xy(poly, centroids[:, 0], centroids[:, 1])
    simplices = simplices[keep]
    if simplices.shape[0] == 0:
        raise MeshFailure("no triangles inside the region")

    # Structural boundary of the kept set.
    edges = {}
    for t in range(simplices.shape[0]):
        a, b, c = simplices[t]
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            edges[key] = edges.get(key, 0) + 1
    bound_edges = {k for k, cnt in edges.items() if cnt == 1}
    want = set(seg_tags.keys())
    if bound_edges != want:
        missing = want - bound_edges
        extra = bound_edges - want
        raise MeshFailure(
            f"boundary not conforming: {len(missing)} input segments missing, "
            f"{len(extra)} spurious boundary edges")

    segments = [(a, b, tag) for tag, (a, b) in seg_tags.values()]
    return pts, simplices, segments


def _tag_for_arc(arc: Arc, spec: DomainSpec | CutDomainSpec) -> str:
    if isinstance(spec, CutDomainSpec):
        if arc == spec.cut_arc or arc in spec.blend_arcs:
            return ARTIFICIAL_CUT
    mid = np.asarray(arc.position(0.5))
    nu = np.asarray(arc.outward_normal(0.5))
    return OUTER_GAMMA0 if float(mid @ nu) > 0.0 else NEAR_DEGENERATE


def _domain_loops_to_region(spec: DomainSpec | CutDomainSpec,
                            sizing: SizingField) -> _Region:
    loops = []
    for loop in spec.loops:
        pls = []
        for curve in loop:
            if not isinstance(curve, Arc):
                raise MeshFailure("meshing supports circular-arc boundaries only")
            pls.append(_Polyline(_discretize_arc(curve, sizing),
                                 _tag_for_arc(curve, spec)))
        loops.append(pls)
    return _Region(loops)


def _finalize(points: np.ndarray, triangles: np.ndarray,
              segments: list[tuple], h_max: float, grading: float,
              h_min: float, mesh_id: str,
              parent_map: ParentMap | None = None) -> TriMesh:
    """Assemble a TriMesh: oriented facets from the once-used edges."""
    seg_lookup = {}
    for a, b, tag in segments:
        seg_lookup[(min(a, b), max(a, b))] = tag

    count = {}
    owner = {}
    for t in range(triangles.shape[0]):
        a, b, c = triangles[t]
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            count[key] = count.get(key, 0) + 1
            owner[(u, v)] = t
    facets = []
    tags = []
    ftri = []
    for t in range(triangles.shape[0]):
        a, b, c = triangles[t]
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            if count[key] == 1:
                tag = seg_lookup.get(key)
                if tag is None:
                    raise MeshFailure("untagged boundary edge in final mesh")
                facets.append((u, v))   # CCW triangle: domain on the left
                tags.append(tag)
                ftri.append(t)
    mesh = TriMesh(
        vertices=points,
        triangles=triangles,
        facets=np.asarray(facets, dtype=np.int64),
        facet_tags=np.asarray(tags),
        facet_tri=np.asarray(ftri, dtype=np.int64),
        h_max=h_max,
        grading=grading,
        h_min=h_min,
        mesh_id=mesh_id,
        parent_map=parent_map,
    )
    mesh.validate()
    return mesh


def default_h_min(spec: DomainSpec | CutDomainSpec, h_max: float) -> float:
    floor = h_max / 20.0
    if isinstance(spec, CutDomainSpec):
        floor = min(floor, spec.cut_radius / 3.0)
    return floor


def triangulate(spec: DomainSpec | CutDomainSpec, h_max: float,
                grading: float = 1.0, h_min: float | None = None) -> TriMesh:
    """Triangulate a single domain (no nesting information).

    The origin is a vertex whenever it is a boundary-arc endpoint, which
    holds for every admissible DomainSpec built here; cut domains keep all
    vertices at distance >= 1.5 epsilon from the origin.
    """
    if h_max <= 0.0:
        raise MeshFailure("h_max must be positive")
    if not 0.0 <= grading <= 2.0:
        raise MeshFailure("grading must lie in [0, 2]")
    if h_min is None:
        h_min = default_h_min(spec, h_max)
    sizing = SizingField(h_max, grading, h_min)
    region = _domain_loops_to_region(spec, sizing)
    r_outer = _outer_radius(spec)
    pts, tris, segments = _mesh_region(region, sizing, r_outer)
    base = spec.parent.name if isinstance(spec, CutDomainSpec) else spec.name
    if isinstance(spec, CutDomainSpec):
        mesh_id = f"{base}_eps{spec.epsilon:g}_h{h_max:g}"
    else:
        mesh_id = f"{base}_h{h_max:g}"
    return _finalize(pts, tris, segments, h_max, grading, h_min, mesh_id)


def _outer_radius(spec: DomainSpec | CutDomainSpec) -> float:
    dom = spec.parent if isinstance(spec, CutDomainSpec) else spec
    return dom.boundary_diameter_bound() + 2.0 * 0.87


@dataclass
class MeshLadder:
    """Nested meshes for an epsilon sweep: cut meshes plus their parent."""

    epsilons: tuple[float, ...]
    cut_meshes: list[TriMesh]
    parent: TriMesh
    cuts: list[CutDomainSpec]

    def __iter__(self):
        return iter(self.cut_meshes)


def build_epsilon_ladder(domain: DomainSpec, epsilons, h_max: float,
                         grading: float = 1.0) -> MeshLadder:
    """Mesh the domain and every cut domain so that all meshes nest exactly.

    ``epsilons`` must be strictly descending.  The parent mesh conforms to
    every cut curve, and each cut mesh's parent_map sends vertices and
    triangles to bitwise identical objects in the parent.

    Raises LadderConflict when two cut radii are closer than the local mesh
    size at that radius (the cuts could not both be resolved by disjoint
    edge paths), or when the blend zones of consecutive cuts overlap.
    """
    eps = [float(e) for e in epsilons]
    if len(eps) == 0:
        raise LadderConflict("empty epsilon list")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise LadderConflict("epsilon list must be strictly descending")

    h_min = min(h_max / 20.0, 1.5 * eps[-1] / 3.0)
    sizing = SizingField(h_max, grading, h_min)

    cuts = [cut_domain(domain, e) for e in eps]
    for a, b in zip(cuts, cuts[1:]):
        gap = a.cut_radius - b.cut_radius
        if gap < float(sizing.at_radius(b.cut_radius)):
            raise LadderConflict(
                f"cut radii {a.cut_radius:g} and {b.cut_radius:g} closer "
                f"than local mesh size")
        reach = max(float(np.max(np.linalg.norm(c.position(
            np.linspace(0, 1, 256)), axis=-1)))
            for c in (b.cut_arc, *b.blend_arcs))
        if reach >= a.cut_radius:
            raise LadderConflict(
                f"blend zone of epsilon={b.epsilon:g} reaches the cut of "
                f"epsilon={a.epsilon:g}")

    regions = _ladder_regions(domain, cuts, sizing)

    # Mesh every region against the shared polylines, then merge into the
    # parent with a global vertex table keyed by exact coordinates.
    r_outer = _outer_radius(domain)
    global_index = {}
    global_pts = []
    region_tris = []
    region_segments = []
    for region in regions:
        pts, tris, segments = _mesh_region(region, sizing, r_outer)
        gids = np.empty(pts.shape[0], dtype=np.int64)
        for k in range(pts.shape[0]):
            key = (float(pts[k, 0]), float(pts[k, 1]))
            if key not in global_index:
                global_index[key] = len(global_pts)
                global_pts.append(key)
            gids[k] = global_index[key]
        region_tris.append(gids[tris])
        region_segments.append([(int(gids[a]), int(gids[b]), tag)
                                for a, b, tag in segments])

    all_pts = np.asarray(global_pts, dtype=float)
    all_tris = np.concatenate(region_tris, axis=0)
    all_segments = [s for segs in region_segments for s in segs]
    parent, parent_local_of = _extract(all_pts, all_tris, all_segments,
                                       None, None, h_max, grading, h_min,
                                       f"{domain.name}_h{h_max:g}")

    cut_meshes = []
    for i, cut in enumerate(cuts):
        tris = np.concatenate(region_tris[:i + 1], axis=0)
        segs = [s for segs in region_segments[:i + 1] for s in segs]
        mesh, _ = _extract(all_pts, tris, segs, parent, parent_local_of,
                           h_max, grading, h_min,
                           f"{domain.name}_eps{cut.epsilon:g}_h{h_max:g}")
        cut_meshes.append(mesh)
    return MeshLadder(tuple(eps), cut_meshes, parent, cuts)


def _extract(all_pts, tris, segments, parent: TriMesh | None,
             parent_local_of, h_max, grading, h_min, mesh_id):
    """Compact a triangle subset into its own mesh, mapping into the parent."""
    used = np.unique(tris)
    local_of = np.full(all_pts.shape[0], -1, dtype=np.int64)
    local_of[used] = np.arange(used.shape[0])
    pts = all_pts[used]
    ltris = local_of[tris]
    lsegs = []
    for a, b, tag in segments:
        if local_of[a] >= 0 and local_of[b] >= 0:
            lsegs.append((int(local_of[a]), int(local_of[b]), tag))
    pm = None
    if parent is not None:
        vmap = parent_local_of[used]
        if np.any(vmap < 0):
            raise MeshFailure("ladder vertex missing from parent mesh")
        tri_parent = _match_triangles(parent.triangles, ltris, vmap)
        pm = ParentMap(vertex_index=vmap, triangle_index=tri_parent)
    mesh = _finalize(pts, ltris, lsegs, h_max, grading, h_min, mesh_id, pm)
    return mesh, local_of


def _match_triangles(parent_tris: np.ndarray, local_tris: np.ndarray,
                     vertex_map: np.ndarray) -> np.ndarray:
    """Index of each local triangle inside the parent's triangle list."""
    key_of = {}
    for t in range(parent_tris.shape[0]):
        key_of[tuple(sorted(parent_tris[t]))] = t
    out = np.empty(local_tris.shape[0], dtype=np.int64)
    for t in range(local_tris.shape[0]):
        key = tuple(sorted(vertex_map[local_tris[t]]))
        if key not in key_of:
            raise MeshFailure("ladder triangle missing from parent mesh")
        out[t] = key_of[key]
    return out


def _ladder_regions(domain: DomainSpec, cuts: list[CutDomainSpec],
                    sizing: SizingField):
    """Split the domain into outer region, inter-cut bands, and origin core.

    All polylines are discretized here exactly once and shared by reference
    between adjacent regions, which is what makes the merged parent mesh
    conform to every cut.
    """
    # Identify, on the loop through the origin, the kept pieces per cut.
    # cut.loops differ from domain.loops in exactly one loop; within it the
    # pieces are [..., kept_a, fillet_a, cut_arc, fillet_b, kept_b, ...].
    first = cuts[0]
    loop_idx = next(i for i in range(len(domain.loops))
                    if domain.loops[i] != first.loops[i])

    def pieces(cut: CutDomainSpec):
        loop = cut.loops[loop_idx]
        k = loop.index(cut.cut_arc)
        kept_a, fillet_a = loop[k - 2], loop[k - 1]
        fillet_b, kept_b = loop[k + 1], loop[(k + 2) % len(loop)]
        rest = [a for j, a in enumerate(loop)
                if j not in {k, (k - 1) % len(loop), (k - 2) % len(loop),
                             (k + 1) % len(loop), (k + 2) % len(loop)}]
        return kept_a, fillet_a, fillet_b, kept_b, rest

    # Discretize shared curve pieces once.
    def pl(arc: Arc, tag: str) -> _Polyline:
        return _Polyline(_discretize_arc(arc, sizing), tag)

    cut_curve_pls = []       # per cut: [fillet_a, cut_arc, fillet_b]
    kept_bounds = []         # per cut: (kept_a arc, kept_b arc)
    for cut in cuts:
        kept_a, fillet_a, fillet_b, kept_b, _ = pieces(cut)
        cut_curve_pls.append([
            pl(fillet_a, ARTIFICIAL_CUT),
            pl(cut.cut_arc, ARTIFICIAL_CUT),
            pl(fillet_b, ARTIFICIAL_CUT),
        ])
        kept_bounds.append((kept_a, kept_b))

    # Parent arc pieces between consecutive junctions.  kept arcs shrink as
    # epsilon decreases: kept_a(eps_i) is a sub-arc of kept_a(eps_{i+1}).
    def arc_diff(longer: Arc, shorter: Arc, at_start: bool) -> Arc:
        # Piece of ``longer`` not covered by ``shorter``; they share the
        # circle and one endpoint (the far-from-origin one).
        s = longer.param_of_angle(
            shorter.theta1 if at_start else shorter.theta0)
        if math.isnan(s):
            raise MeshFailure("ladder junctions out of order")
        if at_start:
            return longer.subarc(s, 1.0, p0=shorter.p1)
        return longer.subarc(0.0, s, p1=shorter.p0)

    near_tag = NEAR_DEGENERATE

    # Region 0: the outermost, bounded by the largest cut.
    outer_loops = []
    for i, loop in enumerate(first.loops):
        if i == loop_idx:
            # Preserve traversal order of the modified loop, substituting
            # the shared cut-curve polylines.
            pls = []
            for a in loop:
                if a == first.cut_arc:
                    pls.append(cut_curve_pls[0][1])
                elif a in first.blend_arcs:
                    pls.append(cut_curve_pls[0][0] if a == first.blend_arcs[0]
                               else cut_curve_pls[0][2])
                else:
                    pls.append(pl(a, _tag_for_arc(a, first)))
            outer_loops.append(pls)
        else:
            outer_loops.append([pl(a, _tag_for_arc(a, domain))
                                for a in loop])
    regions = [_Region(outer_loops)]

    # Bands between consecutive cuts, then the core.
    for i in range(len(cuts)):
        inner_is_core = i == len(cuts) - 1
        kept_a_i, kept_b_i = kept_bounds[i]
        if inner_is_core:
            # Piece of the parent loop from junction a(i) through the origin
            # to junction b(i): exactly the arcs removed by cut i.
            side_a = _Polyline(_discretize_arc(cuts[i].removed_parent_arcs[0],
                                               sizing), near_tag)
            side_b = _Polyline(_discretize_arc(cuts[i].removed_parent_arcs[1],
                                               sizing), near_tag)
            loop = [side_a, side_b,
                    cut_curve_pls[i][2].reversed(),
                    cut_curve_pls[i][1].reversed(),
                    cut_curve_pls[i][0].reversed()]
        else:
            kept_a_n, kept_b_n = kept_bounds[i + 1]
            side_a = _Polyline(
                _discretize_arc(arc_diff(kept_a_n, kept_a_i, at_start=True),
                                sizing), near_tag)
            side_b = _Polyline(
                _discretize_arc(arc_diff(kept_b_n, kept_b_i, at_start=False),
                                sizing), near_tag)
            loop = [side_a] + cut_curve_pls[i + 1] + [side_b,
                    cut_curve_pls[i][2].reversed(),
                    cut_curve_pls[i][1].reversed(),
                    cut_curve_pls[i][0].reversed()]
        _require_chained(loop)
        regions.append(_Region([loop]))
    return regions


def _require_chained(loop: list[_Polyline]) -> None:
    for a, b in zip(loop, loop[1:] + loop[:1]):
        if not np.array_equal(a.points[-1], b.points[0]):
            gap = float(np.linalg.norm(a.points[-1] - b.points[0]))
            raise MeshFailure(f"region loop does not chain (gap {gap:g})")


# ---------------------------------------------------------------------------
# Plain-text serialization: VERTICES / TRIANGLES / FACETS(tag) sections.

def save_mesh(mesh: TriMesh, path: str | Path) -> None:
    lines = [f"# degenwave mesh {mesh.mesh_id}",
             f"H_MAX {mesh.h_max!r}",
             f"GRADING {mesh.grading!r}",
             f"H_MIN {mesh.h_min!r}",
             "VERTICES"]
    for v in mesh.vertices:
        lines.append(f"{float(v[0])!r} {float(v[1])!r}")
    lines.append("TRIANGLES")
    for t in mesh.triangles:
        lines.append(f"{t[0]} {t[1]} {t[2]}")
    for tag in (OUTER_GAMMA0, NEAR_DEGENERATE, ARTIFICIAL_CUT):
        sel = mesh.facet_tags == tag
        if not np.any(sel):
            continue
        lines.append(f"FACETS({tag})")
        for (a, b), t in zip(mesh.facets[sel], mesh.facet_tri[sel]):
            lines.append(f"{a} {b} {t}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mesh(path: str | Path) -> TriMesh:
    text = Path(path).read_text(encoding="utf-8").strip().split("\n")
    mesh_id = text[0].split("mesh", 1)[1].strip() if text[0].startswith("#") else ""
    h_max = grading = h_min = None
    verts = []
    tris = []
    facets = []
    tags = []
    ftri = []
    section = None
    for line in text:
        if line.startswith("#") or not line.strip():
            continue
        if line.startswith("H_MAX"):
            h_max = float(line.split()[1])
        elif line.startswith("GRADING"):
            grading = float(line.split()[1])
        elif line.startswith("H_MIN"):
            h_min = float(line.split()[1])
        elif line == "VERTICES":
            section = "v"
        elif line == "TRIANGLES":
            section = "t"
        elif line.startswith("FACETS("):
            section = line[7:-1]
        elif section == "v":
            a, b = line.split()
            verts.append((float(a), float(b)))
        elif section == "t":
            tris.append(tuple(int(x) for x in line.split()))
        else:
            a, b, t = line.split()
            facets.append((int(a), int(b)))
            tags.append(section)
            ftri.append(int(t))
    mesh = TriMesh(
        vertices=np.asarray(verts, dtype=float),
        triangles=np.asarray(tris, dtype=np.int64),
        facets=np.asarray(facets, dtype=np.int64),
        facet_tags=np.asarray(tags),
        facet_tri=np.asarray(ftri, dtype=np.int64),
        h_max=h_max, grading=grading, h_min=h_min, mesh_id=mesh_id)
    mesh.validate()
    return mesh
