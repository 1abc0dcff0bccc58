use serde::Serialize;

/// One point of an SE-EE tradeoff curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub w: f64,
    pub se: f64,
    pub ee: f64,
}

/// Points of one method swept over `w`, kept in sweep order.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub label: String,
    pub points: Vec<FrontierPoint>,
}

impl Frontier {
    pub fn new(label: impl Into<String>, points: Vec<FrontierPoint>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }

    /// Vertices sorted by SE, with coincident SE values merged to the higher EE.
    fn sorted(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self.points.iter().map(|p| (p.se, p.ee)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (se, ee) in v {
            match out.last_mut() {
                Some(last) if (se - last.0).abs() <= 1e-9 * se.abs().max(1.0) => last.1 = last.1.max(ee),
                _ => out.push((se, ee)),
            }
        }
        out
    }

    pub fn se_range(&self) -> Option<(f64, f64)> {
        let v = self.sorted();
        Some((v.first()?.0, v.last()?.0))
    }

    /// EE of the polyline at `se`, interpolating linearly between vertices.
    /// `None` outside the SE range.
    pub fn ee_at(&self, se: f64) -> Option<f64> {
        let v = self.sorted();
        let (lo, hi) = (v.first()?.0, v.last()?.0);
        if se < lo || se > hi {
            return None;
        }
        if v.len() == 1 {
            return Some(v[0].1);
        }
        let i = v.partition_point(|p| p.0 < se).clamp(1, v.len() - 1);
        let (a, b) = (v[i - 1], v[i]);
        let t = if b.0 > a.0 { (se - a.0) / (b.0 - a.0) } else { 1.0 };
        Some(a.1 + t * (b.1 - a.1))
    }

    /// Best EE reachable at SE of at least `se`: the upper boundary of the
    /// region the polyline dominates.
    pub fn envelope_at(&self, se: f64) -> Option<f64> {
        let v = self.sorted();
        let vertex_best = v
            .iter()
            .filter(|p| p.0 >= se)
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let on_curve = self.ee_at(se).unwrap_or(f64::NEG_INFINITY);
        let best = vertex_best.max(on_curve);
        best.is_finite().then_some(best)
    }

    /// Area of the region `{(s, e) : e <= envelope(s), 0 <= s}`.
    pub fn dominated_area(&self) -> f64 {
        let v = self.sorted();
        let Some(&(first_se, _)) = v.first() else {
            return 0.0;
        };
        let top = v.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let mut area = first_se * top;
        const STEPS: usize = 512;
        for pair in v.windows(2) {
            let (a, b) = (pair[0].0, pair[1].0);
            let h = (b - a) / STEPS as f64;
            let mut acc = 0.0;
            for j in 0..STEPS {
                let mid = a + (j as f64 + 0.5) * h;
                acc += self.envelope_at(mid).unwrap_or(0.0);
            }
            area += acc * h;
        }
        area
    }
}

/// Largest relative EE difference between the two polylines at matched SE,
/// taken over every vertex of either curve that lies inside the other's SE
/// range. `None` when the ranges do not overlap.
pub fn max_relative_gap(a: &Frontier, b: &Frontier) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for (x, y) in [(a, b), (b, a)] {
        for p in &x.points {
            if let Some(ee) = y.ee_at(p.se) {
                let gap = (p.ee - ee).abs() / ee.abs().max(f64::MIN_POSITIVE);
                worst = Some(worst.map_or(gap, |w: f64| w.max(gap)));
            }
        }
    }
    worst
}

/// How far the worst point of `lower` sits above the region dominated by
/// `upper`, after granting `slack` in SE. Non-positive means every point of
/// `lower` is dominated.
pub fn dominance_excess(upper: &Frontier, lower: &Frontier, slack: f64) -> f64 {
    lower
        .points
        .iter()
        .map(|p| match upper.envelope_at(p.se - slack) {
            Some(ee) => p.ee - ee,
            None => f64::INFINITY,
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `|A_a - A_b| / max(A_a, A_b)` for the dominated areas.
pub fn relative_area_difference(a: &Frontier, b: &Frontier) -> f64 {
    let (x, y) = (a.dominated_area(), b.dominated_area());
    (x - y).abs() / x.max(y).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn frontier(points: &[(f64, f64)]) -> Frontier {
        Frontier::new(
            "f",
            points
                .iter()
                .enumerate()
                .map(|(i, &(se, ee))| FrontierPoint { w: i as f64, se, ee })
                .collect(),
        )
    }

    #[test]
    fn interpolation() {
        let f = frontier(&[(3.0, 1.0), (1.0, 2.0)]);
        assert_eq!(f.ee_at(2.0), Some(1.5));
        assert_eq!(f.ee_at(0.5), None);
        assert_eq!(f.se_range(), Some((1.0, 3.0)));
    }

    #[test]
    fn area_of_a_segment() {
        // rectangle 1x2 plus a trapezoid of width 2 between heights 2 and 1
        let f = frontier(&[(1.0, 2.0), (3.0, 1.0)]);
        assert_abs_diff_eq!(f.dominated_area(), 2.0 + 3.0, epsilon = 1e-9);
    }

    #[test]
    fn identical_curves_have_no_gap() {
        let f = frontier(&[(1.0, 2.0), (2.0, 1.8), (3.0, 1.0)]);
        assert_eq!(max_relative_gap(&f, &f), Some(0.0));
        assert!(dominance_excess(&f, &f, 1e-9) <= 0.0);
        assert_eq!(relative_area_difference(&f, &f), 0.0);
    }

    #[test]
    fn dominance_detects_escaping_points() {
        let upper = frontier(&[(1.0, 2.0), (3.0, 1.0)]);
        let inside = frontier(&[(0.5, 1.9), (2.0, 1.4)]);
        let outside = frontier(&[(2.0, 1.6)]);
        let beyond = frontier(&[(4.0, 0.1)]);
        assert!(dominance_excess(&upper, &inside, 0.0) <= 0.0);
        assert!(dominance_excess(&upper, &outside, 0.0) > 0.0);
        assert!(dominance_excess(&upper, &beyond, 0.0) > 0.0);
    }
}
