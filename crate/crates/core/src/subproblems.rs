//! Convex subproblems solved at each SCA step.
//!
//! Every builder takes the current expansion point ([`ScaState`]) and returns a
//! [`Subproblem`]: the cone program plus the variable layout needed to read the
//! next precoder back out of the solver output.

use std::f64::consts::LN_2;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Scenario;
use crate::conic::{AffineExpr, ComplexBlock, ConicProgram, ConicSolution};
use crate::error::{Error, Result};
use crate::model::{check_weight, scalarized_objective_with, Approach, PrecoderSet, RateReport};
use crate::surrogate::{lb1_coeffs, lb2_coeffs, phi_coeffs, Stream};
use crate::{CMatrix, CVector};

/// Which rate minorant the subproblem uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Whole-rate minorant; second-order cones only.
    Lb1,
    /// SINR minorant inside an exact logarithm; needs exponential cones.
    Lb2,
}

/// With or without the common stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "rs")]
    Rs,
    #[serde(rename = "nors")]
    NoRs,
}

impl Strategy {
    pub fn has_common(self) -> bool {
        self == Strategy::Rs
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rs => "RS",
            Strategy::NoRs => "NoRS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSpec {
    pub approach: Approach,
    pub bound: Bound,
    pub strategy: Strategy,
    pub w: f64,
    /// Constant dividing SE in the weighted-sum objective; `None` means `P_c`.
    pub normalization: Option<f64>,
}

impl SubproblemSpec {
    pub fn new(approach: Approach, bound: Bound, strategy: Strategy, w: f64) -> Result<Self> {
        check_weight(w)?;
        Ok(Self {
            approach,
            bound,
            strategy,
            w,
            normalization: None,
        })
    }

    pub fn with_normalization(mut self, norm: f64) -> Result<Self> {
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("normalization must be positive"));
        }
        self.normalization = Some(norm);
        Ok(self)
    }

    fn norm(&self, s: &Scenario) -> f64 {
        self.normalization.unwrap_or_else(|| s.p_circuit())
    }

    /// Value of `y` that makes the power row tight.
    fn tight_y(&self, f: &PrecoderSet, s: &Scenario, se_bits: f64) -> f64 {
        match self.approach {
            Approach::WeightedSum => f.frobenius_sq() + s.p_circuit() + s.chi() * se_bits,
            Approach::WeightedPower => {
                self.w * (f.frobenius_sq() + s.chi() * se_bits) + s.p_circuit()
            }
        }
    }

    /// Scalarized objective of this subproblem evaluated on the true model.
    pub fn true_objective(&self, f: &PrecoderSet, s: &Scenario) -> Result<f64> {
        scalarized_objective_with(self.approach, self.w, f, s, Some(self.norm(s)))
    }
}

/// Expansion point of one SCA iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaState {
    pub precoders: PrecoderSet,
    /// Square root of the sum rate in bit/s/Hz.
    pub x: f64,
    /// Power surrogate; total power or its weighted form.
    pub y: f64,
    /// `[r_c, r_1, ..., r_K]` in nats.
    pub rates: Vec<f64>,
    /// Optimal value of the subproblem that produced this state; for the
    /// initial state, the objective at the expansion point.
    pub surrogate_objective: f64,
    pub true_objective: f64,
}

impl ScaState {
    /// Builds the state whose `x`, `y` and rates are tight at `f`.
    pub fn tight(spec: &SubproblemSpec, s: &Scenario, f: PrecoderSet) -> Result<Self> {
        let report = RateReport::evaluate(&f, s)?;
        let mut rates = report.rate_vector();
        if !spec.strategy.has_common() {
            rates[0] = 0.0;
        }
        let se = rates.iter().sum::<f64>() / LN_2;
        let true_objective = spec.true_objective(&f, s)?;
        Ok(Self {
            x: se.sqrt(),
            y: spec.tight_y(&f, s, se),
            rates,
            surrogate_objective: true_objective,
            true_objective,
            precoders: f,
        })
    }

    pub fn se_bits(&self) -> f64 {
        self.rates.iter().sum::<f64>() / LN_2
    }
}

/// Matched-filter start at full power, split equally over the active streams.
pub fn matched_filter_start(s: &Scenario, strategy: Strategy) -> PrecoderSet {
    let nt = s.nt();
    let k = s.users();
    let streams = if strategy.has_common() { k + 1 } else { k };
    let amp = (s.p_max() / streams as f64).sqrt();
    let unit = |v: DVector<Complex64>| -> DVector<Complex64> {
        let n = v.norm();
        if n > 0.0 {
            v / Complex64::from(n)
        } else {
            let mut e = DVector::zeros(nt);
            e[0] = Complex64::from(1.0);
            e
        }
    };
    let mut f = CMatrix::zeros(nt, k + 1);
    let mut sum = DVector::<Complex64>::zeros(nt);
    for u in 0..k {
        let dir = unit(s.channel(u).into_owned());
        sum += &dir;
        f.set_column(u + 1, &(dir * Complex64::from(amp)));
    }
    if strategy.has_common() {
        f.set_column(0, &(unit(sum) * Complex64::from(amp)));
    }
    PrecoderSet::new(f).expect("finite matched-filter start")
}

/// Initial SCA state: matched-filter precoders with `x` and `y` tight.
pub fn initialize(spec: &SubproblemSpec, s: &Scenario) -> Result<ScaState> {
    check_weight(spec.w)?;
    ScaState::tight(spec, s, matched_filter_start(s, spec.strategy))
}

/// Variable positions inside a built program.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// Embedded precoder columns; `None` for an eliminated common stream.
    pub columns: Vec<Option<ComplexBlock>>,
    pub eta: Option<usize>,
    /// `[r_c, r_1, ..., r_K]`; `None` where eliminated.
    pub rates: Vec<Option<usize>>,
    pub x: Option<usize>,
    pub y: Option<usize>,
    /// Private SINR variables of the log-domain form.
    pub gamma: Vec<usize>,
    /// Per-user common SINR variables of the log-domain form.
    pub gamma_common: Vec<usize>,
    /// Transmit power epigraph used by the parametric program.
    pub power: Option<usize>,
}

impl Layout {
    fn new(program: &mut ConicProgram, s: &Scenario, strategy: Strategy) -> Self {
        let nt = s.nt();
        let mut columns = Vec::with_capacity(s.users() + 1);
        for c in 0..=s.users() {
            if c == 0 && !strategy.has_common() {
                columns.push(None);
                continue;
            }
            let offset = program.n_vars();
            for i in 0..nt {
                program.add_var(format!("f[{c}][{i}].re"));
                program.add_var(format!("f[{c}][{i}].im"));
            }
            columns.push(Some(ComplexBlock { offset, len: nt }));
        }
        Self {
            columns,
            eta: None,
            rates: Vec::new(),
            x: None,
            y: None,
            gamma: Vec::new(),
            gamma_common: Vec::new(),
            power: None,
        }
    }

    fn add_rates(&mut self, program: &mut ConicProgram, users: usize, strategy: Strategy) {
        self.rates.push(strategy.has_common().then(|| program.add_var("r_c")));
        for k in 0..users {
            self.rates.push(Some(program.add_var(format!("r[{k}]"))));
        }
    }

    fn active_rates(&self) -> impl Iterator<Item = usize> + '_ {
        self.rates.iter().flatten().copied()
    }

    /// `sum r / ln 2`, the rate sum in bits.
    fn rate_sum_bits(&self, scale: f64) -> AffineExpr {
        let mut e = AffineExpr::default();
        for r in self.active_rates() {
            e.terms.push((r, scale / LN_2));
        }
        e
    }

    /// All real coordinates of `F`, each times `scale`.
    fn frobenius_tail(&self, scale: f64) -> Vec<AffineExpr> {
        self.columns.iter().flatten().flat_map(|b| b.coordinates(scale)).collect()
    }

    /// `scale * Re{c^H f_col}` and `scale * Im{c^H f_col}`, or `None` when the
    /// column is eliminated.
    fn inner(&self, col: usize, c: &CVector, scale: f64) -> Option<(AffineExpr, AffineExpr)> {
        self.columns[col]
            .map(|b| (b.inner_re(c.iter()).scaled(scale), b.inner_im(c.iter()).scaled(scale)))
    }

    pub fn read_precoders(&self, z: &[f64], nt: usize) -> Result<PrecoderSet> {
        let mut f = CMatrix::zeros(nt, self.columns.len());
        for (c, block) in self.columns.iter().enumerate() {
            if let Some(b) = block {
                f.set_column(c, &DVector::from_vec(b.read(z)));
            }
        }
        PrecoderSet::new(f)
    }

    fn write_precoders(&self, z: &mut [f64], f: &PrecoderSet) {
        for (c, block) in self.columns.iter().enumerate() {
            if let Some(b) = block {
                let col: Vec<Complex64> = f.matrix().column(c).iter().copied().collect();
                b.write(z, &col);
            }
        }
    }
}

/// A built program together with the data needed to interpret its solution.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub layout: Layout,
}

impl Subproblem {
    pub fn exp_cone_count(&self) -> usize {
        self.program.exp_blocks().len()
    }
}

fn validate_state(spec: &SubproblemSpec, s: &Scenario, state: &ScaState) -> Result<()> {
    let f = &state.precoders;
    if f.nt() != s.nt() || f.users() != s.users() {
        return Err(Error::Contract(format!(
            "state precoders are {}x{} but the scenario has Nt={} and K={}",
            f.nt(),
            f.users() + 1,
            s.nt(),
            s.users()
        )));
    }
    if !(state.y > 0.0) || !(state.x >= 0.0) || !state.x.is_finite() || !state.y.is_finite() {
        return Err(Error::Contract(format!(
            "state needs x >= 0 and y > 0, got x={} y={}",
            state.x, state.y
        )));
    }
    if !spec.strategy.has_common() && f.common().iter().any(|z| *z != Complex64::from(0.0)) {
        return Err(Error::Contract("NoRS state carries a nonzero common precoder".into()));
    }
    check_weight(spec.w)
}

fn streams(s: &Scenario, strategy: Strategy) -> Vec<Stream> {
    let k = s.users();
    let mut out: Vec<Stream> = (0..k).map(Stream::Private).collect();
    if strategy.has_common() {
        out.extend((0..k).map(Stream::Common));
    }
    out
}

fn rate_var(layout: &Layout, stream: Stream) -> usize {
    let idx = match stream {
        Stream::Private(k) => k + 1,
        Stream::Common(_) => 0,
    };
    layout.rates[idx].expect("rate variable exists for active stream")
}

/// `r <= const + 2 a Re{b^H f_s} - a sum_i |b^H f_i|^2` as a rotated cone,
/// written in MSE form `r <= (const + a) - a (|1 - b^H f_s|^2 + sum_{i != s} |b^H f_i|^2)`
/// so every cone entry stays O(1) when `a` is large.
fn add_lb1_rows(program: &mut ConicProgram, layout: &Layout, s: &Scenario, f_n: &PrecoderSet, strategy: Strategy) {
    for stream in streams(s, strategy) {
        let c = lb1_coeffs(f_n, s, stream);
        let r = rate_var(layout, stream);
        let root_a = c.a.sqrt();
        let head = AffineExpr::constant(c.constant + c.a).add_term(r, -1.0);
        let (re_s, im_s) = layout
            .inner(stream.column(), &c.b, root_a)
            .expect("stream column is active");
        let mut tail = vec![re_s.scaled(-1.0).add_constant(root_a), im_s];
        for col in stream.mse_columns(s.users()).filter(|&col| col != stream.column()) {
            if let Some((re, im)) = layout.inner(col, &c.b, root_a) {
                tail.push(re);
                tail.push(im);
            }
        }
        program.add_rsoc(head, AffineExpr::constant(0.5), tail);
    }
}

/// `r <= ln(1 + gamma)` and `gamma <= Gamma(F)`.
fn add_lb2_rows(program: &mut ConicProgram, layout: &mut Layout, s: &Scenario, f_n: &PrecoderSet, strategy: Strategy) {
    for stream in streams(s, strategy) {
        let gamma = match stream {
            Stream::Private(k) => {
                let g = program.add_var(format!("gamma[{k}]"));
                layout.gamma.push(g);
                g
            }
            Stream::Common(k) => {
                let g = program.add_var(format!("gamma_c[{k}]"));
                layout.gamma_common.push(g);
                g
            }
        };
        let r = rate_var(layout, stream);
        program.add_exp(
            AffineExpr::var(r),
            AffineExpr::constant(1.0),
            AffineExpr::var(gamma).add_constant(1.0),
        );

        let c = lb2_coeffs(f_n, s, stream);
        let (re_s, _) = layout
            .inner(stream.column(), &c.lin, 2.0)
            .expect("stream column is active");
        let head = re_s
            .add_constant(-c.quad_weight * c.noise)
            .add_term(gamma, -1.0);
        let root_q = c.quad_weight.sqrt();
        let mut tail = Vec::new();
        for col in stream.interference_columns(s.users()) {
            if let Some((re, im)) = layout.inner(col, &c.channel, root_q) {
                tail.push(re);
                tail.push(im);
            }
        }
        program.add_rsoc(head, AffineExpr::constant(0.5), tail);
    }
}

/// Builds the convex subproblem around `state`.
pub fn build(spec: &SubproblemSpec, s: &Scenario, state: &ScaState) -> Result<Subproblem> {
    validate_state(spec, s, state)?;
    let mut program = ConicProgram::new();
    let mut layout = Layout::new(&mut program, s, spec.strategy);
    let eta = program.add_var("eta");
    layout.eta = Some(eta);
    layout.add_rates(&mut program, s.users(), spec.strategy);
    let x = program.add_var("x");
    let y = program.add_var("y");
    layout.x = Some(x);
    layout.y = Some(y);

    match spec.approach {
        Approach::WeightedSum => {
            program.maximize(eta, spec.w);
            let c = (1.0 - spec.w) / spec.norm(s) / LN_2;
            for r in layout.active_rates().collect::<Vec<_>>() {
                program.maximize(r, c);
            }
        }
        Approach::WeightedPower => program.maximize(eta, 1.0),
    }

    // eta <= phi(x, y)
    let phi = phi_coeffs(state.x, state.y)?;
    program.add_le(
        AffineExpr::var(eta)
            .add_term(x, -phi.slope_x)
            .add_term(y, -phi.slope_y),
        0.0,
    );
    // x^2 <= sum r / ln 2
    program.add_rsoc(
        layout.rate_sum_bits(1.0),
        AffineExpr::constant(0.5),
        vec![AffineExpr::var(x)],
    );
    // power accounting: ||F||^2 <= y - P_c - chi sum r, weighted by w for the
    // weighted-power form
    let (rate_weight, frob_scale) = match spec.approach {
        Approach::WeightedSum => (s.chi(), 1.0),
        Approach::WeightedPower => (spec.w * s.chi(), spec.w.sqrt()),
    };
    program.add_rsoc(
        AffineExpr::var(y)
            .add_constant(-s.p_circuit())
            .add_expr(&layout.rate_sum_bits(1.0), -rate_weight),
        AffineExpr::constant(0.5),
        layout.frobenius_tail(frob_scale),
    );
    // power budget
    program.add_soc(AffineExpr::constant(s.p_max().sqrt()), layout.frobenius_tail(1.0));
    for r in layout.active_rates().collect::<Vec<_>>() {
        program.add_ge(AffineExpr::var(r), 0.0);
    }
    // y <= P_c + chi sum r + p_max (weighted as above) and eta >= phi(0, that
    // cap). Both hold at every optimum with w > 0 and keep the optimal set
    // bounded when the objective ignores eta.
    let cap = s.p_circuit() + frob_scale * frob_scale * s.p_max();
    program.add_le(
        AffineExpr::var(y).add_expr(&layout.rate_sum_bits(1.0), -rate_weight),
        cap,
    );
    program.add_ge(
        AffineExpr::var(eta).add_expr(&layout.rate_sum_bits(1.0), -phi.slope_y * rate_weight),
        phi.slope_y * cap,
    );

    match spec.bound {
        Bound::Lb1 => add_lb1_rows(&mut program, &layout, s, &state.precoders, spec.strategy),
        Bound::Lb2 => add_lb2_rows(&mut program, &mut layout, s, &state.precoders, spec.strategy),
    }
    Ok(Subproblem { program, layout })
}

/// The expansion point written as a program vector. It is feasible for the
/// program built at `state`.
pub fn expansion_point(s: &Scenario, state: &ScaState, sub: &Subproblem) -> Result<Vec<f64>> {
    let layout = &sub.layout;
    let mut z = vec![0.0; sub.program.n_vars()];
    layout.write_precoders(&mut z, &state.precoders);
    let phi = phi_coeffs(state.x, state.y)?;
    if let Some(i) = layout.eta {
        z[i] = phi.eval(state.x, state.y);
    }
    for (slot, r) in layout.rates.iter().zip(&state.rates) {
        if let Some(i) = slot {
            z[*i] = *r;
        }
    }
    if let Some(i) = layout.x {
        z[i] = state.x;
    }
    if let Some(i) = layout.y {
        z[i] = state.y;
    }
    for (k, &g) in layout.gamma.iter().enumerate() {
        z[g] = Stream::Private(k).sinr(&state.precoders, s);
    }
    for (k, &g) in layout.gamma_common.iter().enumerate() {
        z[g] = Stream::Common(k).sinr(&state.precoders, s);
    }
    if let Some(i) = layout.power {
        z[i] = state.precoders.frobenius_sq();
    }
    Ok(z)
}

/// Reads the next precoder from an optimal solution and re-derives `x`, `y`
/// and the rates on the true model.
pub fn extract(spec: &SubproblemSpec, s: &Scenario, sub: &Subproblem, solution: &ConicSolution) -> Result<ScaState> {
    if !solution.is_optimal() {
        return Err(Error::Solver {
            status: solution.status.to_string(),
            detail: format!("residual {:.3e}", solution.primal_residual),
        });
    }
    let f = feasible_precoders(sub, solution, s)?;
    let mut state = ScaState::tight(spec, s, f)?;
    state.surrogate_objective = solution.objective;
    Ok(state)
}

/// Precoders from a solution, pulled back onto the power budget if the solver
/// overshot it by round-off.
pub fn feasible_precoders(sub: &Subproblem, solution: &ConicSolution, s: &Scenario) -> Result<PrecoderSet> {
    let f = sub.layout.read_precoders(&solution.z, s.nt())?;
    let power = f.frobenius_sq();
    if power > s.p_max() {
        Ok(f.scaled((s.p_max() / power).sqrt()))
    } else {
        Ok(f)
    }
}

/// Parametric program of the fractional-programming baseline:
/// `max c_r sum r / ln 2 - w lambda ||F||^2` with rate-minorant rows, where
/// `c_r = w (1 - lambda chi) + (1 - w) / norm`.
pub fn build_parametric(
    strategy: Strategy,
    w: f64,
    lambda: f64,
    normalization: f64,
    s: &Scenario,
    f_n: &PrecoderSet,
) -> Result<Subproblem> {
    check_weight(w)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Contract(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if f_n.nt() != s.nt() || f_n.users() != s.users() {
        return Err(Error::Contract("precoder shape does not match scenario".into()));
    }
    let mut program = ConicProgram::new();
    let mut layout = Layout::new(&mut program, s, strategy);
    layout.add_rates(&mut program, s.users(), strategy);
    let t = program.add_var("p_tx");
    layout.power = Some(t);

    let c_r = parametric_rate_weight(w, lambda, normalization, s.chi());
    for r in layout.active_rates().collect::<Vec<_>>() {
        program.maximize(r, c_r / LN_2);
        program.add_ge(AffineExpr::var(r), 0.0);
    }
    program.maximize(t, -w * lambda);
    program.add_rsoc(AffineExpr::var(t), AffineExpr::constant(0.5), layout.frobenius_tail(1.0));
    program.add_le(AffineExpr::var(t), s.p_max());
    program.add_soc(AffineExpr::constant(s.p_max().sqrt()), layout.frobenius_tail(1.0));
    add_lb1_rows(&mut program, &layout, s, f_n, strategy);
    Ok(Subproblem { program, layout })
}

pub fn parametric_rate_weight(w: f64, lambda: f64, normalization: f64, chi: f64) -> f64 {
    w * (1.0 - lambda * chi) + (1.0 - w) / normalization
}
