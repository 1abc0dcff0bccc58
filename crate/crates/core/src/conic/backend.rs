use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{AffineExpr, ConicProgram, ConicSolution, Relation, SolveStatus};

/// Accumulates `A z + s = b` rows in Clarabel's convention.
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Adds a row whose slack equals `expr(z)`.
    fn push_cone_entry(&mut self, expr: &AffineExpr) {
        let row = self.b.len();
        for &(j, c) in &expr.terms {
            self.i.push(row);
            self.j.push(j);
            self.v.push(-c);
        }
        self.b.push(expr.constant);
    }

    /// Adds a row whose slack equals `rhs - expr(z)`.
    fn push_linear(&mut self, expr: &AffineExpr, rhs: f64) {
        let row = self.b.len();
        for &(j, c) in &expr.terms {
            self.i.push(row);
            self.j.push(j);
            self.v.push(c);
        }
        self.b.push(rhs - expr.constant);
    }
}

/// Internal stopping tolerance and static regularization of each attempt,
/// relative to the requested tolerance. The second attempt tightens the stop
/// when the first one misses the residual check; the third loosens it and
/// regularizes more for factorization trouble.
const LADDER: [(f64, f64); 3] = [(0.1, 1e-8), (0.01, 1e-9), (1.0, 1e-6)];

fn settings_for(tol: f64, attempt: usize) -> DefaultSettings<f64> {
    let (scale, reg) = LADDER[attempt];
    DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .tol_gap_abs(tol * scale)
        .tol_gap_rel(tol * scale)
        .tol_feas(tol * scale)
        .static_regularization_constant(reg)
        .iterative_refinement_max_iter(10 * (attempt as u32 + 1))
        .build()
        .expect("valid solver settings")
}

/// Solves with each setting of [`LADDER`] in turn until an attempt ends
/// `Solved` with a recomputed residual of at most `tol`. An acceptable
/// `AlmostSolved` attempt is kept in case no later attempt does better.
pub(super) fn solve(program: &ConicProgram, tol: f64) -> ConicSolution {
    let n = program.n_vars();
    let mut rows = Rows {
        i: Vec::new(),
        j: Vec::new(),
        v: Vec::new(),
        b: Vec::new(),
    };
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    let eq: Vec<_> = program
        .linear
        .iter()
        .filter(|r| r.relation == Relation::Eq)
        .collect();
    if !eq.is_empty() {
        for r in &eq {
            rows.push_linear(&r.expr, r.rhs);
        }
        cones.push(SupportedConeT::ZeroConeT(eq.len()));
    }
    let le: Vec<_> = program
        .linear
        .iter()
        .filter(|r| r.relation == Relation::Le)
        .collect();
    if !le.is_empty() {
        for r in &le {
            rows.push_linear(&r.expr, r.rhs);
        }
        cones.push(SupportedConeT::NonnegativeConeT(le.len()));
    }
    for blk in &program.soc {
        rows.push_cone_entry(&blk.head);
        for t in &blk.tail {
            rows.push_cone_entry(t);
        }
        cones.push(SupportedConeT::SecondOrderConeT(1 + blk.tail.len()));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for blk in &program.rsoc {
        let head = blk.a.scaled(h).add_expr(&blk.b, h);
        let first = blk.a.scaled(h).add_expr(&blk.b, -h);
        rows.push_cone_entry(&head);
        rows.push_cone_entry(&first);
        for t in &blk.tail {
            rows.push_cone_entry(t);
        }
        cones.push(SupportedConeT::SecondOrderConeT(2 + blk.tail.len()));
    }
    for blk in &program.exp {
        rows.push_cone_entry(&blk.u);
        rows.push_cone_entry(&blk.v);
        rows.push_cone_entry(&blk.w);
        cones.push(SupportedConeT::ExponentialConeT());
    }

    let m = rows.b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
    let p = CscMatrix::zeros((n, n));
    let q: Vec<f64> = program.objective.iter().map(|c| -c).collect();
    let mut fallback: Option<ConicSolution> = None;
    let mut last = None;
    for attempt in 0..LADDER.len() {
        let mut solver = DefaultSolver::new(&p, &q, &a, &rows.b, &cones, settings_for(tol, attempt));
        solver.solve();
        let candidate = classify(program, &solver.solution, tol);
        match solver.solution.status {
            SolverStatus::Solved if candidate.is_optimal() => return candidate,
            SolverStatus::AlmostSolved if candidate.is_optimal() && fallback.is_none() => {
                fallback = Some(candidate)
            }
            SolverStatus::PrimalInfeasible
            | SolverStatus::AlmostPrimalInfeasible
            | SolverStatus::DualInfeasible
            | SolverStatus::AlmostDualInfeasible => return candidate,
            _ => last = Some(candidate),
        }
    }
    fallback.or(last).expect("at least one attempt")
}

fn classify(program: &ConicProgram, sol: &clarabel::solver::DefaultSolution<f64>, accept: f64) -> ConicSolution {
    let z = sol.x.clone();
    let finite = z.iter().all(|v| v.is_finite());
    let residual = if finite {
        program.violation(&z)
    } else {
        f64::INFINITY
    };
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved if finite && residual <= accept => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalTrouble,
    };
    let gap = (sol.obj_val - sol.obj_val_dual).abs();
    ConicSolution {
        objective: if finite { program.objective_value(&z) } else { f64::NAN },
        z,
        status,
        primal_residual: residual,
        duality_gap: gap.is_finite().then_some(gap),
        iterations: sol.iterations,
    }
}
