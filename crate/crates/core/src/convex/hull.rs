use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::linalg::{inverse, null_space, rref};
use super::lp::{LinearProgram, LpStatus, Relation};
use super::{ConvexError, Facet, HRep, RVector, DEFAULT_FACET_CAP};
use crate::rational::{primitive, primitive_integer_vector, Rational};

fn check_dims(vertices: &[RVector], dim: usize) -> Result<(), ConvexError> {
    for v in vertices {
        if v.dim() != dim {
            return Err(ConvexError::DimensionMismatch { expected: dim, found: v.dim() });
        }
    }
    Ok(())
}

/// Decides whether `point` is a convex combination of `vertices`. On success
/// the combination weights are returned as a certificate.
pub fn hull_member(point: &RVector, vertices: &[RVector]) -> Result<Option<Vec<Rational>>, ConvexError> {
    if vertices.is_empty() {
        return Err(ConvexError::EmptyVertexSet);
    }
    check_dims(vertices, point.dim())?;
    let n = vertices.len();
    let mut lp = LinearProgram::new(vec![Rational::zero(); n]);
    lp.add(vec![Rational::from_integer(1.into()); n], Relation::Eq, Rational::from_integer(1.into()));
    for j in 0..point.dim() {
        let row: Vec<Rational> = vertices.iter().map(|v| v.coords()[j].clone()).collect();
        lp.add(row, Relation::Eq, point.coords()[j].clone());
    }
    match lp.solve()? {
        LpStatus::Optimal { point, .. } => Ok(Some(point)),
        _ => Ok(None),
    }
}

pub fn hrep(vertices: &[RVector]) -> Result<HRep, ConvexError> {
    hrep_capped(vertices, DEFAULT_FACET_CAP)
}

#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, o: &Bits) -> Bits {
        Bits(self.0.iter().zip(&o.0).map(|(a, b)| a & b).collect())
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn is_superset(&self, o: &Bits) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a & b == *b)
    }
}

struct Ray {
    h: Vec<BigInt>,
    zeros: Bits,
}

fn idot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Facet description of the convex hull of `vertices`, by double description
/// inside the affine hull. Lower-dimensional hulls carry explicit equalities.
pub fn hrep_capped(vertices: &[RVector], cap: usize) -> Result<HRep, ConvexError> {
    let first = vertices.first().ok_or(ConvexError::EmptyVertexSet)?;
    let dim = first.dim();
    check_dims(vertices, dim)?;
    let points: Vec<&RVector> = vertices.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let v0 = points[0];

    let diffs: Vec<Vec<Rational>> = points[1..]
        .iter()
        .map(|v| v.coords().iter().zip(v0.coords()).map(|(a, b)| a - b).collect())
        .collect();
    let (basis, pivots) = rref(diffs, dim);
    let r = pivots.len();

    let mut equalities = Vec::new();
    let ns = null_space(&basis, &pivots, dim);
    if !ns.is_empty() {
        let (canon, _) = rref(ns, dim);
        for row in canon {
            let normal: Vec<Rational> =
                primitive_integer_vector(&row).into_iter().map(Rational::from_integer).collect();
            let normal = RVector::new(normal);
            let offset = normal.dot(v0);
            equalities.push(Facet::new(normal, offset));
        }
    }
    if r == 0 {
        return Ok(HRep { dim, equalities, inequalities: Vec::new() });
    }

    // Homogenized intrinsic points w_i = (1, y_i), scaled to integers.
    let ws: Vec<Vec<BigInt>> = points
        .iter()
        .map(|v| {
            let mut w = vec![Rational::from_integer(1.into())];
            w.extend(pivots.iter().map(|&p| v.coords()[p].clone()));
            primitive_integer_vector(&w)
        })
        .collect();
    let d = r + 1;
    let npts = ws.len();

    // Greedily pick d independent generators for the initial cone.
    let mut chosen: Vec<usize> = Vec::new();
    let mut span: Vec<Vec<Rational>> = Vec::new();
    for (i, w) in ws.iter().enumerate() {
        let mut trial = span.clone();
        trial.push(w.iter().cloned().map(Rational::from_integer).collect());
        let (_, p) = rref(trial.clone(), d);
        if p.len() == trial.len() {
            span = trial;
            chosen.push(i);
            if chosen.len() == d {
                break;
            }
        }
    }
    debug_assert_eq!(chosen.len(), d);
    let inv = inverse(&span).expect("independent generators");
    let mut rays: Vec<Ray> = (0..d)
        .map(|j| {
            let col: Vec<Rational> = inv.iter().map(|row| row[j].clone()).collect();
            let h = primitive_integer_vector(&col);
            let mut zeros = Bits::new(npts);
            for &c in &chosen {
                if idot(&h, &ws[c]).is_zero() {
                    zeros.set(c);
                }
            }
            Ray { h, zeros }
        })
        .collect();

    let chosen_set: BTreeSet<usize> = chosen.iter().copied().collect();
    for i in (0..npts).filter(|i| !chosen_set.contains(i)) {
        let w = &ws[i];
        let vals: Vec<BigInt> = rays.iter().map(|ray| idot(&ray.h, w)).collect();
        if vals.iter().all(|v| !v.is_negative()) {
            for (ray, v) in rays.iter_mut().zip(&vals) {
                if v.is_zero() {
                    ray.zeros.set(i);
                }
            }
            continue;
        }
        let pos: Vec<usize> = (0..rays.len()).filter(|&j| vals[j].is_positive()).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&j| vals[j].is_negative()).collect();
        let mut next: Vec<Ray> = Vec::new();
        for p in &pos {
            for n in &neg {
                let common = rays[*p].zeros.and(&rays[*n].zeros);
                if common.count() + 2 < d {
                    continue;
                }
                let adjacent = (0..rays.len())
                    .all(|j| j == *p || j == *n || !rays[j].zeros.is_superset(&common));
                if !adjacent {
                    continue;
                }
                let h: Vec<BigInt> = rays[*n]
                    .h
                    .iter()
                    .zip(&rays[*p].h)
                    .map(|(hn, hp)| &vals[*p] * hn - &vals[*n] * hp)
                    .collect();
                let mut zeros = common;
                zeros.set(i);
                next.push(Ray { h: primitive(h), zeros });
            }
        }
        let old = std::mem::take(&mut rays);
        for (j, mut ray) in old.into_iter().enumerate() {
            if vals[j].is_zero() {
                ray.zeros.set(i);
                rays.push(ray);
            } else if vals[j].is_positive() {
                rays.push(ray);
            }
        }
        rays.extend(next);
        if rays.len() > cap {
            return Err(ConvexError::FacetCapExceeded { cap });
        }
    }

    // Ray (h0, h') encodes h0 + h'·y ≥ 0, i.e. −h'·y ≤ h0.
    let mut inequalities: Vec<Facet> = rays
        .into_iter()
        .map(|ray| {
            let mut normal = vec![Rational::zero(); dim];
            for (k, &p) in pivots.iter().enumerate() {
                normal[p] = Rational::from_integer(-ray.h[k + 1].clone());
            }
            Facet::new(RVector::new(normal), Rational::from_integer(ray.h[0].clone()))
        })
        .collect();
    inequalities.sort();
    inequalities.dedup();
    if inequalities.len() > cap {
        return Err(ConvexError::FacetCapExceeded { cap });
    }
    Ok(HRep { dim, equalities, inequalities })
}

/// `hull(vertices) ∩ constraints`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrainedHull {
    pub vertices: Vec<RVector>,
    pub constraints: HRep,
}

impl ConstrainedHull {
    pub fn new(vertices: Vec<RVector>, constraints: HRep) -> Self {
        ConstrainedHull { vertices, constraints }
    }

    pub fn hull(vertices: Vec<RVector>) -> Self {
        let dim = vertices.first().map(RVector::dim).unwrap_or(0);
        ConstrainedHull { vertices, constraints: HRep::unconstrained(dim) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Containment {
    Contained,
    /// `point` lies in P but violates `facet` (index into `Q.halfspaces()`).
    Violated { point: RVector, facet: Facet, facet_index: usize, excess: Rational },
}

impl Containment {
    pub fn is_contained(&self) -> bool {
        matches!(self, Containment::Contained)
    }
}

/// Decides `P ⊆ Q` facet by facet, reporting the first violated halfspace of
/// `Q` with a point of `P` that violates it.
pub fn contains(p: &ConstrainedHull, q: &HRep) -> Result<Containment, ConvexError> {
    if p.vertices.is_empty() {
        return Err(ConvexError::EmptyVertexSet);
    }
    let dim = q.dim;
    check_dims(&p.vertices, dim)?;
    if p.constraints.dim != dim {
        return Err(ConvexError::DimensionMismatch { expected: dim, found: p.constraints.dim });
    }
    let extras = p.constraints.halfspaces();
    // Coefficients of the extra constraints in terms of the vertex weights.
    let extra_rows: Vec<(Vec<Rational>, Rational)> = extras
        .iter()
        .map(|g| (p.vertices.iter().map(|v| g.normal.dot(v)).collect(), g.offset.clone()))
        .collect();

    for (index, f) in q.halfspaces().into_iter().enumerate() {
        let vals: Vec<Rational> = p.vertices.iter().map(|v| f.normal.dot(v)).collect();
        let (best, max) = vals.iter().enumerate().fold((0, &vals[0]), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        if *max <= f.offset {
            continue;
        }
        let candidate = &p.vertices[best];
        if extras.iter().all(|g| g.holds(candidate)) {
            return Ok(Containment::Violated {
                point: candidate.clone(),
                excess: max - &f.offset,
                facet: f,
                facet_index: index,
            });
        }
        let mut lp = LinearProgram::new(vals);
        let n = p.vertices.len();
        lp.add(vec![Rational::from_integer(1.into()); n], Relation::Eq, Rational::from_integer(1.into()));
        for (row, rhs) in &extra_rows {
            lp.add(row.clone(), Relation::Le, rhs.clone());
        }
        match lp.solve()? {
            LpStatus::Infeasible => return Ok(Containment::Contained),
            LpStatus::Unbounded => unreachable!("weights are bounded"),
            LpStatus::Optimal { value, point: lambda } => {
                if value > f.offset {
                    let mut x = vec![Rational::zero(); dim];
                    for (l, v) in lambda.iter().zip(&p.vertices) {
                        if l.is_zero() {
                            continue;
                        }
                        for (xi, vi) in x.iter_mut().zip(v.coords()) {
                            *xi += l * vi;
                        }
                    }
                    return Ok(Containment::Violated {
                        point: RVector::new(x),
                        excess: value - &f.offset,
                        facet: f,
                        facet_index: index,
                    });
                }
            }
        }
    }
    Ok(Containment::Contained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn pt(xs: &[i64]) -> RVector {
        RVector::new(xs.iter().map(|&x| int(x)).collect())
    }

    fn facet(n: &[i64], b: i64) -> Facet {
        Facet::new(pt(n), int(b))
    }

    #[test]
    fn triangle_facets() {
        let h = hrep(&[pt(&[0, 0]), pt(&[1, 0]), pt(&[0, 1])]).unwrap();
        assert!(h.equalities.is_empty());
        let mut expect = vec![facet(&[-1, 0], 0), facet(&[0, -1], 0), facet(&[1, 1], 1)];
        expect.sort();
        assert_eq!(h.inequalities, expect);
    }

    #[test]
    fn single_vertex_is_pinned() {
        let h = hrep(&[pt(&[3, -2])]).unwrap();
        assert!(h.inequalities.is_empty());
        assert_eq!(h.equalities, vec![facet(&[1, 0], 3), facet(&[0, 1], -2)]);
    }

    #[test]
    fn segment_has_one_equality() {
        let h = hrep(&[pt(&[1, 0]), pt(&[0, 1])]).unwrap();
        assert_eq!(h.equalities, vec![facet(&[1, 1], 1)]);
        let mut expect = vec![facet(&[1, 0], 1), facet(&[-1, 0], 0)];
        expect.sort();
        assert_eq!(h.inequalities, expect);
    }

    #[test]
    fn cube_and_interior_points() {
        let mut vs = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    vs.push(pt(&[x, y, z]));
                }
            }
        }
        vs.push(RVector::new(vec![ratio(1, 2), ratio(1, 2), ratio(1, 2)]));
        let h = hrep(&vs).unwrap();
        assert_eq!(h.inequalities.len(), 6);
    }

    #[test]
    fn membership_certificates() {
        let vs = [pt(&[1, 0]), pt(&[0, 1])];
        let half = RVector::new(vec![ratio(1, 2), ratio(1, 2)]);
        assert_eq!(hull_member(&half, &vs).unwrap(), Some(vec![ratio(1, 2), ratio(1, 2)]));
        let off = RVector::new(vec![ratio(3, 5), ratio(1, 2)]);
        assert_eq!(hull_member(&off, &vs).unwrap(), None);
        assert_eq!(hull_member(&half, &[]), Err(ConvexError::EmptyVertexSet));
    }

    #[test]
    fn containment() {
        let tri = vec![pt(&[0, 0]), pt(&[1, 0]), pt(&[0, 1])];
        let q = hrep(&tri).unwrap();
        assert!(contains(&ConstrainedHull::hull(tri.clone()), &q).unwrap().is_contained());
        let seg = ConstrainedHull::hull(vec![pt(&[0, 0]), pt(&[2, 0])]);
        match contains(&seg, &q).unwrap() {
            Containment::Violated { point, .. } => assert_eq!(point, pt(&[2, 0])),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extra_constraints_cut_the_hull() {
        let q = hrep(&[pt(&[0, 0]), pt(&[1, 0]), pt(&[0, 1])]).unwrap();
        // The segment (0,0)-(2,0) cut by x <= 1 fits in the triangle.
        let cut = HRep { dim: 2, equalities: vec![], inequalities: vec![facet(&[1, 0], 1)] };
        let p = ConstrainedHull::new(vec![pt(&[0, 0]), pt(&[2, 0])], cut);
        assert!(contains(&p, &q).unwrap().is_contained());
        // Cut by x <= 3/2: the LP finds (3/2, 0).
        let cut = HRep { dim: 2, equalities: vec![], inequalities: vec![Facet::new(pt(&[2, 0]), int(3))] };
        let p = ConstrainedHull::new(vec![pt(&[0, 0]), pt(&[2, 0])], cut);
        match contains(&p, &q).unwrap() {
            Containment::Violated { point, excess, .. } => {
                assert_eq!(point, RVector::new(vec![ratio(3, 2), int(0)]));
                assert_eq!(excess, ratio(1, 2));
            }
            other => panic!("{other:?}"),
        }
        // An empty P is contained in anything.
        let cut = HRep { dim: 2, equalities: vec![], inequalities: vec![facet(&[1, 0], -1)] };
        let p = ConstrainedHull::new(vec![pt(&[0, 0]), pt(&[2, 0])], cut);
        assert!(contains(&p, &q).unwrap().is_contained());
    }
}
