//! Exact two-phase simplex with Bland's rule.

use num_traits::{One, Signed, Zero};

use super::ConvexError;
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// Variable bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl Bound {
    pub fn nonnegative() -> Self {
        Bound { lower: Some(Rational::zero()), upper: None }
    }

    pub fn free() -> Self {
        Bound { lower: None, upper: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal { value: Rational, point: Vec<Rational> },
    Infeasible,
    Unbounded,
}

/// `maximize objective·x` subject to the constraints and bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bound>,
}

impl LinearProgram {
    /// All variables default to `x ≥ 0`.
    pub fn new(objective: Vec<Rational>) -> Self {
        let n = objective.len();
        LinearProgram { objective, constraints: Vec::new(), bounds: vec![Bound::nonnegative(); n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn solve(&self) -> Result<LpStatus, ConvexError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(ConvexError::DimensionMismatch { expected: n, found: self.bounds.len() });
        }
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(ConvexError::DimensionMismatch { expected: n, found: c.coeffs.len() });
            }
        }

        // x_j = offset_j + Σ sign·y_col over the substituted nonnegative columns.
        let mut subst: Vec<(Rational, Vec<(usize, bool)>)> = Vec::with_capacity(n);
        let mut ncols = 0;
        let mut rows: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
        let mut bound_rows = Vec::new();
        for b in &self.bounds {
            match (&b.lower, &b.upper) {
                (Some(l), up) => {
                    if let Some(u) = up {
                        bound_rows.push((ncols, u - l));
                    }
                    subst.push((l.clone(), vec![(ncols, true)]));
                    ncols += 1;
                }
                (None, Some(u)) => {
                    subst.push((u.clone(), vec![(ncols, false)]));
                    ncols += 1;
                }
                (None, None) => {
                    subst.push((Rational::zero(), vec![(ncols, true), (ncols + 1, false)]));
                    ncols += 2;
                }
            }
        }
        let transform = |coeffs: &[Rational]| -> (Vec<Rational>, Rational) {
            let mut out = vec![Rational::zero(); ncols];
            let mut constant = Rational::zero();
            for (a, (off, terms)) in coeffs.iter().zip(&subst) {
                if a.is_zero() {
                    continue;
                }
                constant += a * off;
                for &(col, positive) in terms {
                    if positive {
                        out[col] += a;
                    } else {
                        out[col] -= a;
                    }
                }
            }
            (out, constant)
        };
        for c in &self.constraints {
            let (coeffs, constant) = transform(&c.coeffs);
            rows.push((coeffs, c.relation, &c.rhs - constant));
        }
        for (col, cap) in bound_rows {
            let mut coeffs = vec![Rational::zero(); ncols];
            coeffs[col] = Rational::one();
            rows.push((coeffs, Relation::Le, cap));
        }
        let (cost, cost_constant) = transform(&self.objective);

        let Some((value, y)) = solve_standard(rows, &cost, ncols)? else {
            return Ok(LpStatus::Infeasible);
        };
        let Some(value) = value else { return Ok(LpStatus::Unbounded) };
        let point = subst
            .iter()
            .map(|(off, terms)| {
                let mut x = off.clone();
                for &(col, positive) in terms {
                    if positive {
                        x += &y[col];
                    } else {
                        x -= &y[col];
                    }
                }
                x
            })
            .collect();
        Ok(LpStatus::Optimal { value: value + cost_constant, point })
    }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [Rational], value: &mut Rational) {
        let inv = Rational::one() / &self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        self.rhs[r] *= &inv;
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r].clone();
        let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for &j in &nz {
                let d = &f * &prow[j];
                self.rows[i][j] -= d;
            }
            self.rhs[i] -= &f * &prhs;
        }
        if !reduced[c].is_zero() {
            let f = reduced[c].clone();
            for &j in &nz {
                reduced[j] -= &f * &prow[j];
            }
            *value += &f * &prhs;
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost` over the allowed columns. Returns false when unbounded.
    fn optimize(&mut self, cost: &[Rational], allowed: &[bool]) -> (bool, Rational) {
        let ncols = allowed.len();
        let mut reduced: Vec<Rational> = cost.to_vec();
        let mut value = Rational::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for j in 0..ncols {
                if !self.rows[i][j].is_zero() {
                    reduced[j] -= cb * &self.rows[i][j];
                }
            }
            value += cb * &self.rhs[i];
        }
        loop {
            let Some(c) = (0..ncols).find(|&j| allowed[j] && reduced[j].is_positive()) else {
                return (true, value);
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, _)) = best else { return (false, value) };
            self.pivot(r, c, &mut reduced, &mut value);
        }
    }
}

/// Solves `max c·y, rows, y ≥ 0`. Outer `None`: infeasible; inner `None`: unbounded.
#[allow(clippy::type_complexity)]
fn solve_standard(
    rows: Vec<(Vec<Rational>, Relation, Rational)>,
    cost: &[Rational],
    n: usize,
) -> Result<Option<(Option<Rational>, Vec<Rational>)>, ConvexError> {
    let m = rows.len();
    let mut slack_count = 0;
    let mut art_count = 0;
    let mut norm = Vec::with_capacity(m);
    for (mut coeffs, mut rel, mut rhs) in rows {
        if rhs.is_negative() {
            for v in coeffs.iter_mut() {
                *v = -v.clone();
            }
            rhs = -rhs;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        match rel {
            Relation::Le => slack_count += 1,
            Relation::Ge => {
                slack_count += 1;
                art_count += 1
            }
            Relation::Eq => art_count += 1,
        }
        norm.push((coeffs, rel, rhs));
    }
    let total = n + slack_count + art_count;
    let art_start = n + slack_count;
    let mut tab = Tableau { rows: Vec::with_capacity(m), rhs: Vec::with_capacity(m), basis: Vec::with_capacity(m) };
    let (mut next_slack, mut next_art) = (n, art_start);
    for (coeffs, rel, rhs) in norm {
        let mut row = coeffs;
        row.resize(total, Rational::zero());
        match rel {
            Relation::Le => {
                row[next_slack] = Rational::one();
                tab.basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -Rational::one();
                next_slack += 1;
                row[next_art] = Rational::one();
                tab.basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = Rational::one();
                tab.basis.push(next_art);
                next_art += 1;
            }
        }
        tab.rows.push(row);
        tab.rhs.push(rhs);
    }

    if art_count > 0 {
        let mut phase1 = vec![Rational::zero(); total];
        for c in phase1.iter_mut().skip(art_start) {
            *c = -Rational::one();
        }
        let allowed = vec![true; total];
        let (_, value) = tab.optimize(&phase1, &allowed);
        if value.is_negative() {
            return Ok(None);
        }
        // Drive artificial variables out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= art_start {
                if let Some(c) = (0..art_start).find(|&j| !tab.rows[i][j].is_zero()) {
                    let mut dummy = vec![Rational::zero(); total];
                    let mut dv = Rational::zero();
                    tab.pivot(i, c, &mut dummy, &mut dv);
                } else {
                    tab.rows.remove(i);
                    tab.rhs.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
            i += 1;
        }
    }

    let mut phase2 = cost.to_vec();
    phase2.resize(total, Rational::zero());
    let allowed: Vec<bool> = (0..total).map(|j| j < art_start).collect();
    let (bounded, value) = tab.optimize(&phase2, &allowed);
    let mut y = vec![Rational::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            y[b] = tab.rhs[i].clone();
        }
    }
    Ok(Some((bounded.then_some(value), y)))
}
