//! Exact convex geometry: linear programming, hull membership, facet
//! enumeration and polytope containment.

mod hull;
pub mod linalg;
pub mod lp;

use std::fmt;

use num_traits::Zero;

use crate::rational::Rational;

pub use hull::{contains, hrep, hrep_capped, hull_member, ConstrainedHull, Containment};
pub use lp::{Bound, Constraint, LinearProgram, LpStatus, Relation};

/// Default bound on the number of facets produced by [`hrep`].
pub const DEFAULT_FACET_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConvexError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty vertex set")]
    EmptyVertexSet,
    #[error("facet enumeration exceeded the cap of {cap}")]
    FacetCapExceeded { cap: usize },
}

/// A point with exact rational coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RVector(Vec<Rational>);

impl RVector {
    pub fn new(coords: Vec<Rational>) -> Self {
        RVector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        RVector(vec![Rational::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Rational] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<Rational> {
        self.0
    }

    pub fn dot(&self, other: &RVector) -> Rational {
        linalg::dot(&self.0, &other.0)
    }
}

impl From<Vec<Rational>> for RVector {
    fn from(v: Vec<Rational>) -> Self {
        RVector(v)
    }
}

impl fmt::Display for RVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// The halfspace `normal·x ≤ offset`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Facet {
    pub normal: RVector,
    pub offset: Rational,
}

impl Facet {
    pub fn new(normal: RVector, offset: Rational) -> Self {
        Facet { normal, offset }
    }

    /// `normal·x − offset`; positive means violated.
    pub fn excess(&self, x: &RVector) -> Rational {
        self.normal.dot(x) - &self.offset
    }

    pub fn holds(&self, x: &RVector) -> bool {
        self.normal.dot(x) <= self.offset
    }

    pub fn negated(&self) -> Facet {
        Facet {
            normal: RVector(self.normal.0.iter().map(|v| -v.clone()).collect()),
            offset: -self.offset.clone(),
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, c) in self.normal.0.iter().enumerate() {
            if !c.is_zero() {
                terms.push(format!("{c}·x{i}"));
            }
        }
        if terms.is_empty() {
            terms.push("0".into());
        }
        write!(f, "{} <= {}", terms.join(" + "), self.offset)
    }
}

/// Halfspace representation. Equalities are stored as `normal·x = offset`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HRep {
    pub dim: usize,
    pub equalities: Vec<Facet>,
    pub inequalities: Vec<Facet>,
}

impl HRep {
    /// The whole space.
    pub fn unconstrained(dim: usize) -> Self {
        HRep { dim, equalities: Vec::new(), inequalities: Vec::new() }
    }

    pub fn is_unconstrained(&self) -> bool {
        self.equalities.is_empty() && self.inequalities.is_empty()
    }

    /// All constraints as `≤` halfspaces in canonical order: each equality
    /// yields its `≤` and `≥` halves, followed by the inequalities.
    pub fn halfspaces(&self) -> Vec<Facet> {
        let mut out = Vec::with_capacity(2 * self.equalities.len() + self.inequalities.len());
        for e in &self.equalities {
            out.push(e.clone());
            out.push(e.negated());
        }
        out.extend(self.inequalities.iter().cloned());
        out
    }

    pub fn contains_point(&self, x: &RVector) -> bool {
        self.equalities.iter().all(|e| e.normal.dot(x) == e.offset) && self.inequalities.iter().all(|f| f.holds(x))
    }

    /// Re-expresses constraints over a subset of coordinates in a larger
    /// space: coordinate `i` of `self` becomes coordinate `positions[i]`.
    pub fn lift(&self, positions: &[usize], dim: usize) -> HRep {
        let lift = |f: &Facet| {
            let mut n = vec![Rational::zero(); dim];
            for (i, c) in f.normal.0.iter().enumerate() {
                n[positions[i]] = c.clone();
            }
            Facet::new(RVector(n), f.offset.clone())
        };
        HRep {
            dim,
            equalities: self.equalities.iter().map(lift).collect(),
            inequalities: self.inequalities.iter().map(lift).collect(),
        }
    }
}

impl fmt::Display for HRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.equalities {
            writeln!(f, "{}", e.to_string().replace("<=", "="))?;
        }
        for i in &self.inequalities {
            writeln!(f, "{i}")?;
        }
        Ok(())
    }
}

/// A polytope given by its vertices, optionally with a facet description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polytope {
    pub vertices: Vec<RVector>,
    pub facets: Option<HRep>,
}

impl Polytope {
    pub fn from_vertices(vertices: Vec<RVector>) -> Self {
        Polytope { vertices, facets: None }
    }

    /// Computes and stores the facet description.
    pub fn with_facets(mut self, cap: usize) -> Result<Self, ConvexError> {
        self.facets = Some(hrep_capped(&self.vertices, cap)?);
        Ok(self)
    }
}
