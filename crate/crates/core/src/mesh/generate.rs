//! Meshes for tests and the built-in benchmark geometries.

use std::collections::HashMap;
use std::f64::consts::PI;

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{edge_key, Mesh, Point};

/// Unit square split along the diagonal from (0,0) to (1,1).
pub fn unit_square() -> Mesh {
    Mesh::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
        vec![0, 0],
        &[(0, 1, 1), (1, 2, 2), (2, 3, 3), (3, 0, 4)],
    )
    .expect("valid square")
}

/// Structured `nx` x `ny` rectangle, each quad split along its rising diagonal.
/// Boundary tags: 1 bottom, 2 right, 3 top, 4 left.
pub fn rectangle(lo: Point, hi: Point, nx: usize, ny: usize, region: i32) -> Mesh {
    structured(lo, hi, nx, ny, |_| region)
}

/// Unit square with region 1 for `x < 1/2` and region 2 for `x > 1/2`.
/// Outer boundary edges are tagged by the region of the adjacent cell.
pub fn two_subdomain_square(n: usize) -> Mesh {
    assert!(n % 2 == 0, "n must be even so the interface is resolved");
    let m = structured([0.0, 0.0], [1.0, 1.0], n, n, |c| if c[0] < 0.5 { 1 } else { 2 });
    let mut bnd = Vec::new();
    for (e, sides) in (0..m.n_edges()).map(|e| (e, m.edge_sides(e))) {
        if let [Some(s), None] = sides {
            let [a, b] = m.edges()[e];
            bnd.push((a, b, m.region(s.cell)));
        }
    }
    Mesh::new(m.vertices().to_vec(), m.cells().to_vec(), m.regions().to_vec(), &bnd)
        .expect("valid split square")
}

fn structured(lo: Point, hi: Point, nx: usize, ny: usize, region: impl Fn(Point) -> i32) -> Mesh {
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            v.push([
                lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64,
            ]);
        }
    }
    let mut cells = Vec::new();
    let mut regions = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            for t in [[a, b, c], [a, c, d]] {
                let cen = [
                    (v[t[0]][0] + v[t[1]][0] + v[t[2]][0]) / 3.0,
                    (v[t[0]][1] + v[t[1]][1] + v[t[2]][1]) / 3.0,
                ];
                cells.push(t);
                regions.push(region(cen));
            }
        }
    }
    let mut bnd = Vec::new();
    for i in 0..nx {
        bnd.push((idx(i, 0), idx(i + 1, 0), 1));
        bnd.push((idx(i + 1, ny), idx(i, ny), 3));
    }
    for j in 0..ny {
        bnd.push((idx(nx, j), idx(nx, j + 1), 2));
        bnd.push((idx(0, j + 1), idx(0, j), 4));
    }
    Mesh::new(v, cells, regions, &bnd).expect("valid structured mesh")
}

/// Region and boundary tags of [`artery_proxy`].
pub struct ArteryTags;

impl ArteryTags {
    pub const FIBROSIS: i32 = 1;
    pub const NECROTIC_CORE: i32 = 2;
    pub const MEDIA: i32 = 3;
    /// Fibrous cap between lumen and necrotic core; the goal region.
    pub const CAP: i32 = 4;
    pub const FIXED: i32 = 1;
    pub const OUTER_FREE: i32 = 2;
    pub const LUMEN: i32 = 3;

    pub const OUTER_RADIUS: f64 = 2.5;
    /// Lumen centre before the rotation by [`ArteryTags::ROTATION_DEG`].
    pub const LUMEN_CENTER: Point = [-0.6, 0.0];
    pub const LUMEN_RADIUS: f64 = 0.9;
    pub const RADIAL: usize = 9;
    pub const ANGULAR: usize = 69;
    /// The plaque axis lies on the diagonal `y = x`.
    pub const ROTATION_DEG: f64 = 45.0;
}

// layers counted from the lumen; half-angles in degrees around the plaque axis
const CAP_LAYERS: usize = 2;
const CORE_LAYERS: usize = 4;
const MEDIA_LAYERS: usize = 2;
const CORE_HALF_ANGLE: f64 = 35.0;
const CAP_HALF_ANGLE: f64 = 20.0;

fn artery_layer_region(i: usize, j: usize) -> i32 {
    let th = 2.0 * PI * (j as f64 + 0.5) / ArteryTags::ANGULAR as f64;
    let deg = if th > PI { th - 2.0 * PI } else { th }.to_degrees().abs();
    if i + MEDIA_LAYERS >= ArteryTags::RADIAL {
        ArteryTags::MEDIA
    } else if (CAP_LAYERS..CAP_LAYERS + CORE_LAYERS).contains(&i) && deg < CORE_HALF_ANGLE {
        ArteryTags::NECROTIC_CORE
    } else if i < CAP_LAYERS && deg < CAP_HALF_ANGLE {
        ArteryTags::CAP
    } else {
        ArteryTags::FIBROSIS
    }
}

/// Eccentric annulus standing in for the diseased artery cross-section.
///
/// The wall between an off-centre circular lumen and the 5 mm outer circle is
/// meshed by a structured polar grid (9 layers, 69 sectors, 1242 cells) whose
/// cells are fitted to the tissue regions. On the thick side of the wall an
/// annular-sector necrotic core sits behind a thin fibrous cap facing the
/// lumen; the two outermost layers form the media carrying the active fibres.
/// The outer boundary is clamped on the side opposite to the plaque. The whole
/// section is rotated so the plaque axis is the diagonal `y = x`.
pub fn artery_proxy() -> Mesh {
    let nr = ArteryTags::RADIAL;
    let na = ArteryTags::ANGULAR;
    let c = ArteryTags::LUMEN_CENTER;
    let (ro, rl) = (ArteryTags::OUTER_RADIUS, ArteryTags::LUMEN_RADIUS);
    let idx = |i: usize, j: usize| i * na + (j % na);
    let (rs, rc) = ArteryTags::ROTATION_DEG.to_radians().sin_cos();
    let mut v = Vec::with_capacity((nr + 1) * na);
    for i in 0..=nr {
        let s = i as f64 / nr as f64;
        for j in 0..na {
            let th = 2.0 * PI * j as f64 / na as f64;
            let (sn, cs) = th.sin_cos();
            let inner = [c[0] + rl * cs, c[1] + rl * sn];
            let outer = [ro * cs, ro * sn];
            let p = [
                inner[0] + s * (outer[0] - inner[0]),
                inner[1] + s * (outer[1] - inner[1]),
            ];
            v.push([rc * p[0] - rs * p[1], rs * p[0] + rc * p[1]]);
        }
    }
    let mut cells = Vec::with_capacity(2 * nr * na);
    let mut regions = Vec::with_capacity(2 * nr * na);
    for i in 0..nr {
        for j in 0..na {
            let (a, b, cc, d) = (idx(i, j), idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j));
            // alternate diagonals to avoid a preferred direction
            let tris = if (i + j) % 2 == 0 {
                [[a, d, cc], [a, cc, b]]
            } else {
                [[a, d, b], [b, d, cc]]
            };
            for t in tris {
                cells.push(t);
                regions.push(artery_layer_region(i, j));
            }
        }
    }
    let mut bnd = Vec::new();
    for j in 0..na {
        bnd.push((idx(0, j + 1), idx(0, j), ArteryTags::LUMEN));
        let mid = 2.0 * PI * (j as f64 + 0.5) / na as f64;
        let fixed = (mid - PI).abs() < PI / 3.0;
        let tag = if fixed {
            ArteryTags::FIXED
        } else {
            ArteryTags::OUTER_FREE
        };
        bnd.push((idx(nr, j), idx(nr, j + 1), tag));
    }
    Mesh::new(v, cells, regions, &bnd).expect("valid artery proxy")
}

/// Region and boundary tags of [`silicone_proxy`].
pub struct SiliconeTags;

impl SiliconeTags {
    pub const BOTTOM: i32 = 1;
    pub const TOP: i32 = 2;
    pub const SIDES: i32 = 3;
    pub const HOLES: i32 = 4;
    pub const WIDTH: f64 = 62.0;
    pub const HEIGHT: f64 = 82.5;
    pub const THICKNESS: f64 = 1.75;
    pub const HOLE_RADIUS: f64 = 10.0;
    pub const CENTERS: [Point; 5] = [
        [-47.5, -21.4],
        [-14.0, -23.0],
        [-31.5, -41.0],
        [-47.7, -59.1],
        [-14.5, -58.0],
    ];
    pub const SLOT_WIDTH: f64 = 1.0;
}

fn arc(c: Point, r: f64, from: f64, to: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let t = from + (to - from) * k as f64 / n as f64;
            [c[0] + r * t.cos(), c[1] + r * t.sin()]
        })
        .collect()
}

fn subdivide(a: Point, b: Point, n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
        })
        .collect()
}

/// Perforated silicone sheet: the `62 x 82.5` mm rectangle with five holes of
/// diameter 20 mm and a narrow cut joining holes 1 and 3, meshed by refined
/// constrained Delaunay triangulation. `max_area` controls the density
/// (about 1300 cells at 4.0 mm^2). Boundary tags: bottom, top, sides, holes.
pub fn silicone_proxy(max_area: f64, hole_segments: usize) -> Mesh {
    let (w, h) = (SiliconeTags::WIDTH, SiliconeTags::HEIGHT);
    let r = SiliconeTags::HOLE_RADIUS;
    let cs = SiliconeTags::CENTERS;
    let mut loops: Vec<Vec<Point>> = Vec::new();
    let seg = |len: f64| ((len / (2.0 * PI * r / hole_segments as f64)).ceil() as usize).max(1);
    let mut outer = Vec::new();
    outer.extend(subdivide([0.0, 0.0], [-w, 0.0], seg(w)));
    outer.extend(subdivide([-w, 0.0], [-w, -h], seg(h)));
    outer.extend(subdivide([-w, -h], [0.0, -h], seg(w)));
    outer.extend(subdivide([0.0, -h], [0.0, 0.0], seg(h)));
    loops.push(outer);
    for k in [1, 3, 4] {
        loops.push(arc(cs[k], r, 0.0, 2.0 * PI, hole_segments));
    }

    // holes 1 and 3 merged through a straight slot of width SLOT_WIDTH
    let (c1, c3) = (cs[0], cs[2]);
    let d = [c3[0] - c1[0], c3[1] - c1[1]];
    let len = d[0].hypot(d[1]);
    let d = [d[0] / len, d[1] / len];
    let n = [-d[1], d[0]];
    let hw = 0.5 * SiliconeTags::SLOT_WIDTH;
    let t = (r * r - hw * hw).sqrt();
    let at = |s: f64, o: f64| [c1[0] + s * d[0] + o * n[0], c1[1] + s * d[1] + o * n[1]];
    let ang = |p: Point, c: Point| (p[1] - c[1]).atan2(p[0] - c[0]);
    let (p1p, p3p, p3m, p1m) = (at(t, hw), at(len - t, hw), at(len - t, -hw), at(t, -hw));
    let mut merged = Vec::new();
    merged.extend(subdivide(p1p, p3p, seg(len - 2.0 * t)));
    let (a0, mut a1) = (ang(p3p, c3), ang(p3m, c3));
    while a1 >= a0 {
        a1 -= 2.0 * PI;
    }
    let m3 = ((a0 - a1) / (2.0 * PI) * hole_segments as f64).ceil() as usize;
    merged.extend(arc(c3, r, a0, a1, m3));
    merged.extend(subdivide(p3m, p1m, seg(len - 2.0 * t)));
    let (b0, mut b1) = (ang(p1m, c1), ang(p1p, c1));
    while b1 >= b0 {
        b1 -= 2.0 * PI;
    }
    let m1 = ((b0 - b1) / (2.0 * PI) * hole_segments as f64).ceil() as usize;
    merged.extend(arc(c1, r, b0, b1, m1));
    loops.push(merged);

    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    for l in &loops {
        cdt.add_constraint_edges(l.iter().map(|p| Point2::new(p[0], p[1])), true)
            .expect("constraint loops do not intersect");
    }
    let result = cdt.refine(
        RefinementParameters::new()
            .exclude_outer_faces(true)
            .with_max_allowed_area(max_area)
            .with_angle_limit(AngleLimit::from_deg(28.0))
            .with_max_additional_vertices(200_000),
    );
    let excluded: std::collections::HashSet<_> = result.excluded_faces.into_iter().collect();

    let mut vid: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for f in cdt.inner_faces() {
        if excluded.contains(&f.fix()) {
            continue;
        }
        let mut tri = [0usize; 3];
        for (k, vh) in f.vertices().iter().enumerate() {
            let key = vh.fix().index();
            tri[k] = *vid.entry(key).or_insert_with(|| {
                let p = vh.position();
                vertices.push([p.x, p.y]);
                vertices.len() - 1
            });
        }
        cells.push(tri);
    }
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &cells {
        for i in 0..3 {
            *count.entry(edge_key(t[i], t[(i + 1) % 3])).or_default() += 1;
        }
    }
    let eps = 1e-9;
    let mut bnd: Vec<(usize, usize, i32)> = count
        .into_iter()
        .filter(|&(_, n)| n == 1)
        .map(|((a, b), _)| {
            let pa = vertices[a];
            let pb = vertices[b];
            let my = 0.5 * (pa[1] + pb[1]);
            let mx = 0.5 * (pa[0] + pb[0]);
            let tag = if my.abs() < eps && pa[1].abs() < eps && pb[1].abs() < eps {
                SiliconeTags::TOP
            } else if (my + h).abs() < eps && (pa[1] + h).abs() < eps && (pb[1] + h).abs() < eps {
                SiliconeTags::BOTTOM
            } else if mx.abs() < eps || (mx + w).abs() < eps {
                SiliconeTags::SIDES
            } else {
                SiliconeTags::HOLES
            };
            (a, b, tag)
        })
        .collect();
    bnd.sort_unstable();
    let regions = vec![1; cells.len()];
    Mesh::new(vertices, cells, regions, &bnd).expect("valid silicone proxy")
}
