//! Real-valued cone programs.
//!
//! A [`ConicProgram`] maximizes a linear objective over variables `z` subject to
//! linear rows and cone memberships of affine expressions in `z`:
//!
//! * second-order cone: `||tail|| <= head`
//! * rotated second-order cone: `2 a b >= ||tail||^2`, `a, b >= 0`
//! * exponential cone: `v exp(u / v) <= w`, `v > 0`
//!
//! Complex quantities enter through [`ComplexBlock`], which lays out a complex
//! vector as interleaved `(re, im)` pairs. [`ConicProgram::solve`] hands the
//! program to an interior-point backend.

mod backend;
mod embed;

pub use embed::{embed_complex, extract_complex, ComplexBlock};

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Default bound on the recomputed primal residual of an optimal solution.
pub const DEFAULT_SOLVE_TOL: f64 = 1e-7;

/// `constant + sum_j coeff_j * z_j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        Self::term(index, 1.0)
    }

    pub fn term(index: usize, coeff: f64) -> Self {
        Self {
            terms: vec![(index, coeff)],
            constant: 0.0,
        }
    }

    pub fn add_term(mut self, index: usize, coeff: f64) -> Self {
        self.terms.push((index, coeff));
        self
    }

    pub fn add_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_expr(mut self, other: &AffineExpr, scale: f64) -> Self {
        self.terms
            .extend(other.terms.iter().map(|&(i, c)| (i, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self::default().add_expr(self, scale)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * z[i]).sum::<f64>()
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `expr <= rhs`
    Le,
    /// `expr = rhs`
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub expr: AffineExpr,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocBlock {
    pub head: AffineExpr,
    pub tail: Vec<AffineExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsocBlock {
    pub a: AffineExpr,
    pub b: AffineExpr,
    pub tail: Vec<AffineExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpBlock {
    pub u: AffineExpr,
    pub v: AffineExpr,
    pub w: AffineExpr,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    names: Vec<String>,
    objective: Vec<f64>,
    linear: Vec<LinearRow>,
    soc: Vec<SocBlock>,
    rsoc: Vec<RsocBlock>,
    exp: Vec<ExpBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalTrouble => "numerical_trouble",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Largest scaled constraint violation at `z`.
    pub primal_residual: f64,
    pub duality_gap: Option<f64>,
    pub iterations: u32,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.objective.push(0.0);
        self.names.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn var_name(&self, index: usize) -> &str {
        &self.names[index]
    }

    /// Adds `coeff * z[var]` to the maximized objective.
    pub fn maximize(&mut self, var: usize, coeff: f64) {
        self.objective[var] += coeff;
    }

    pub fn objective_coeffs(&self) -> &[f64] {
        &self.objective
    }

    pub fn add_le(&mut self, expr: AffineExpr, rhs: f64) {
        self.linear.push(LinearRow {
            expr,
            relation: Relation::Le,
            rhs,
        });
    }

    pub fn add_ge(&mut self, expr: AffineExpr, rhs: f64) {
        self.add_le(expr.scaled(-1.0), -rhs);
    }

    pub fn add_eq(&mut self, expr: AffineExpr, rhs: f64) {
        self.linear.push(LinearRow {
            expr,
            relation: Relation::Eq,
            rhs,
        });
    }

    pub fn add_soc(&mut self, head: AffineExpr, tail: Vec<AffineExpr>) {
        self.soc.push(SocBlock { head, tail });
    }

    pub fn add_rsoc(&mut self, a: AffineExpr, b: AffineExpr, tail: Vec<AffineExpr>) {
        self.rsoc.push(RsocBlock { a, b, tail });
    }

    /// `v exp(u / v) <= w`. With `v = 1` this is `u <= ln(w)`.
    pub fn add_exp(&mut self, u: AffineExpr, v: AffineExpr, w: AffineExpr) {
        self.exp.push(ExpBlock { u, v, w });
    }

    pub fn linear_rows(&self) -> &[LinearRow] {
        &self.linear
    }

    pub fn soc_blocks(&self) -> &[SocBlock] {
        &self.soc
    }

    pub fn rsoc_blocks(&self) -> &[RsocBlock] {
        &self.rsoc
    }

    pub fn exp_blocks(&self) -> &[ExpBlock] {
        &self.exp
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, x)| c * x).sum()
    }

    fn exprs(&self) -> impl Iterator<Item = &AffineExpr> {
        self.linear
            .iter()
            .map(|r| &r.expr)
            .chain(self.soc.iter().flat_map(|b| std::iter::once(&b.head).chain(&b.tail)))
            .chain(
                self.rsoc
                    .iter()
                    .flat_map(|b| [&b.a, &b.b].into_iter().chain(&b.tail)),
            )
            .chain(self.exp.iter().flat_map(|b| [&b.u, &b.v, &b.w]))
    }

    /// Checks index ranges, finiteness, and that every variable is used.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if n == 0 {
            return Err(Error::MalformedProgram("program has no variables".into()));
        }
        let mut used: Vec<bool> = self.objective.iter().map(|&c| c != 0.0).collect();
        for e in self.exprs() {
            if let Some(max) = e.max_index() {
                if max >= n {
                    return Err(Error::MalformedProgram(format!(
                        "expression references variable {max} of {n}"
                    )));
                }
            }
            if !e.constant.is_finite() || e.terms.iter().any(|(_, c)| !c.is_finite()) {
                return Err(Error::MalformedProgram("non-finite coefficient".into()));
            }
            for &(i, _) in &e.terms {
                used[i] = true;
            }
        }
        if self.linear.iter().any(|r| !r.rhs.is_finite())
            || self.objective.iter().any(|c| !c.is_finite())
        {
            return Err(Error::MalformedProgram("non-finite data".into()));
        }
        if let Some(unused) = used.iter().position(|&u| !u) {
            return Err(Error::MalformedProgram(format!(
                "variable {} ({}) appears nowhere",
                unused, self.names[unused]
            )));
        }
        Ok(())
    }

    /// Largest constraint violation at `z`, each scaled by `1 +` the magnitude
    /// of the quantities involved.
    pub fn violation(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.linear {
            let lhs = row.expr.eval(z);
            let v = match row.relation {
                Relation::Le => (lhs - row.rhs).max(0.0),
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v / (1.0 + lhs.abs().max(row.rhs.abs())));
        }
        for b in &self.soc {
            let head = b.head.eval(z);
            let norm = b.tail.iter().map(|e| e.eval(z).powi(2)).sum::<f64>().sqrt();
            worst = worst.max((norm - head).max(0.0) / (1.0 + head.abs().max(norm)));
        }
        for b in &self.rsoc {
            let a = b.a.eval(z);
            let bb = b.b.eval(z);
            let head = (a + bb) * std::f64::consts::FRAC_1_SQRT_2;
            let first = (a - bb) * std::f64::consts::FRAC_1_SQRT_2;
            let norm = (first * first + b.tail.iter().map(|e| e.eval(z).powi(2)).sum::<f64>()).sqrt();
            worst = worst.max((norm - head).max(0.0) / (1.0 + head.abs().max(norm)));
        }
        for b in &self.exp {
            let (u, v, w) = (b.u.eval(z), b.v.eval(z), b.w.eval(z));
            let raw = if v > 0.0 {
                // compare in the log domain to avoid overflow
                if w > 0.0 {
                    (u - v * (w / v).ln()).max(0.0)
                } else {
                    v.max(-w).max(1.0)
                }
            } else {
                (-v).max(u.max(0.0)).max((-w).max(0.0))
            };
            worst = worst.max(raw / (1.0 + u.abs().max(w.abs())));
        }
        worst
    }

    /// Solves the program. Malformed input is an error; infeasibility and
    /// solver trouble are reported through [`ConicSolution::status`].
    pub fn solve(&self, tol: f64) -> Result<ConicSolution> {
        if !(tol > 0.0) {
            return Err(Error::invalid("solve tolerance must be positive"));
        }
        self.validate()?;
        Ok(backend::solve(self, tol))
    }

    /// Human-readable listing of variables, objective, rows and cones.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let fmt_expr = |e: &AffineExpr| -> String {
            let mut s = String::new();
            for (n, &(i, c)) in e.terms.iter().enumerate() {
                if n > 0 {
                    s.push_str(" + ");
                }
                let _ = write!(s, "{c}*{}", self.names[i]);
            }
            if e.constant != 0.0 || e.terms.is_empty() {
                if !e.terms.is_empty() {
                    s.push_str(" + ");
                }
                let _ = write!(s, "{}", e.constant);
            }
            s
        };
        let _ = writeln!(out, "variables {}", self.n_vars());
        for (i, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "  [{i}] {name}");
        }
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, c)| format!("{c}*{}", self.names[i]))
            .collect();
        let _ = writeln!(out, "maximize {}", obj.join(" + "));
        for (i, r) in self.linear.iter().enumerate() {
            let rel = match r.relation {
                Relation::Le => "<=",
                Relation::Eq => "==",
            };
            let _ = writeln!(out, "linear {i}: {} {rel} {}", fmt_expr(&r.expr), r.rhs);
        }
        for (i, b) in self.soc.iter().enumerate() {
            let tail: Vec<String> = b.tail.iter().map(fmt_expr).collect();
            let _ = writeln!(out, "soc {i}: || [{}] || <= {}", tail.join("; "), fmt_expr(&b.head));
        }
        for (i, b) in self.rsoc.iter().enumerate() {
            let tail: Vec<String> = b.tail.iter().map(fmt_expr).collect();
            let _ = writeln!(
                out,
                "rsoc {i}: || [{}] ||^2 <= 2 ({}) ({})",
                tail.join("; "),
                fmt_expr(&b.a),
                fmt_expr(&b.b)
            );
        }
        for (i, b) in self.exp.iter().enumerate() {
            let _ = writeln!(
                out,
                "exp {i}: ({}) exp(({}) / ({})) <= {}",
                fmt_expr(&b.v),
                fmt_expr(&b.u),
                fmt_expr(&b.v),
                fmt_expr(&b.w)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lp_sanity() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.maximize(x, 1.0);
        p.add_le(AffineExpr::var(x), 3.0);
        let sol = p.solve(DEFAULT_SOLVE_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.z[x], 3.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-7);
    }

    #[test]
    fn pythagoras_via_soc() {
        // minimize t with ||(3, 4)|| <= t
        let mut p = ConicProgram::new();
        let t = p.add_var("t");
        p.maximize(t, -1.0);
        p.add_soc(
            AffineExpr::var(t),
            vec![AffineExpr::constant(3.0), AffineExpr::constant(4.0)],
        );
        let sol = p.solve(DEFAULT_SOLVE_TOL).unwrap();
        assert!(sol.is_optimal());
        assert_abs_diff_eq!(sol.z[t], 5.0, epsilon = 1e-6);
    }

    #[test]
    fn log_via_exp_cone() {
        // maximize r with r <= ln(1 + g), g <= 1
        let mut p = ConicProgram::new();
        let r = p.add_var("r");
        let g = p.add_var("g");
        p.maximize(r, 1.0);
        p.add_le(AffineExpr::var(g), 1.0);
        p.add_exp(
            AffineExpr::var(r),
            AffineExpr::constant(1.0),
            AffineExpr::var(g).add_constant(1.0),
        );
        let sol = p.solve(DEFAULT_SOLVE_TOL).unwrap();
        assert!(sol.is_optimal());
        assert_abs_diff_eq!(sol.z[r], std::f64::consts::LN_2, epsilon = 1e-6);
    }

    #[test]
    fn exp_cone_grid() {
        for gamma in [0.0, 0.5, 1.0, 10.0] {
            let mut p = ConicProgram::new();
            let r = p.add_var("r");
            p.maximize(r, 1.0);
            p.add_exp(
                AffineExpr::var(r),
                AffineExpr::constant(1.0),
                AffineExpr::constant(1.0 + gamma),
            );
            let sol = p.solve(DEFAULT_SOLVE_TOL).unwrap();
            assert!(sol.is_optimal());
            assert_abs_diff_eq!(sol.z[r], (1.0f64 + gamma).ln(), epsilon = 1e-6);
        }
    }

    #[test]
    fn rotated_cone_boundary() {
        // maximize x with x^2 <= s, s = 2.25 given by a linear row
        for total in [0.25, 1.0, 2.25, 9.0] {
            let mut p = ConicProgram::new();
            let x = p.add_var("x");
            let s = p.add_var("s");
            p.maximize(x, 1.0);
            p.add_eq(AffineExpr::var(s), total);
            p.add_rsoc(AffineExpr::var(s), AffineExpr::constant(0.5), vec![AffineExpr::var(x)]);
            let sol = p.solve(DEFAULT_SOLVE_TOL).unwrap();
            assert!(sol.is_optimal());
            assert_abs_diff_eq!(sol.z[x], f64::sqrt(total), epsilon = 1e-6);
        }
    }

    #[test]
    fn infeasible_is_reported() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.maximize(x, 1.0);
        p.add_le(AffineExpr::var(x), 1.0);
        p.add_ge(AffineExpr::var(x), 2.0);
        let sol = p.solve(DEFAULT_SOLVE_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.maximize(x, 1.0);
        p.add_ge(AffineExpr::var(x), 0.0);
        let sol = p.solve(DEFAULT_SOLVE_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn solve_is_deterministic() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.maximize(x, 1.0);
        p.maximize(y, 0.5);
        p.add_soc(AffineExpr::constant(2.0), vec![AffineExpr::var(x), AffineExpr::var(y)]);
        let a = p.solve(DEFAULT_SOLVE_TOL).unwrap();
        let b = p.solve(DEFAULT_SOLVE_TOL).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.z, b.z);
    }

    #[test]
    fn malformed_programs_are_rejected() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        p.add_var("orphan");
        p.maximize(x, 1.0);
        p.add_le(AffineExpr::var(x), 1.0);
        assert!(matches!(p.solve(1e-8), Err(Error::MalformedProgram(_))));

        let mut q = ConicProgram::new();
        let x = q.add_var("x");
        q.maximize(x, 1.0);
        q.add_le(AffineExpr::var(7), 1.0);
        assert!(matches!(q.validate(), Err(Error::MalformedProgram(_))));
        assert!(ConicProgram::new().validate().is_err());
    }

    #[test]
    fn violation_measures() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let r = p.add_var("r");
        p.maximize(x, 1.0);
        p.add_le(AffineExpr::var(x), 1.0);
        p.add_soc(AffineExpr::constant(1.0), vec![AffineExpr::var(x)]);
        p.add_exp(AffineExpr::var(r), AffineExpr::constant(1.0), AffineExpr::constant(2.0));
        assert_eq!(p.violation(&[0.5, 0.5]), 0.0);
        assert!(p.violation(&[1.5, 0.0]) > 0.0);
        assert!(p.violation(&[0.0, 1.0]) > 0.0);
    }

    #[test]
    fn dump_lists_everything() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let r = p.add_var("r");
        p.maximize(r, 1.0);
        p.add_le(AffineExpr::var(x), 1.0);
        p.add_soc(AffineExpr::constant(1.0), vec![AffineExpr::var(x)]);
        p.add_rsoc(AffineExpr::var(x), AffineExpr::constant(0.5), vec![AffineExpr::var(r)]);
        p.add_exp(AffineExpr::var(r), AffineExpr::constant(1.0), AffineExpr::var(x));
        let text = p.dump();
        assert!(text.contains("variables 2"));
        assert!(text.contains("maximize 1*r"));
        assert!(text.contains("linear 0"));
        assert!(text.contains("soc 0"));
        assert!(text.contains("rsoc 0"));
        assert!(text.contains("exp 0"));
    }
}
