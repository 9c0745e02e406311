use std::fmt;

use crate::pipa::TraceRecord;

/// Lower bound on the step size along the counterexample trajectory.
pub const TAU_LOWER: f64 = 5.0 / 9.0;

pub const LEMMA_BOUNDS: [&str; 5] = [
    "1 <= y_k <= y_k+1",
    "w_k+1 <= w_k/2 <= 0.02",
    "x_k+1 >= x_k - sqrt(y_k w_k) > -1",
    "y_k+1 w_k+1 <= y_k w_k / 2",
    "5/9 <= tau_k <= 1",
];

/// `(x_limit, y_limit) = (-2/(10(√2-1)), 1 + 2/(10(√2-1)))`.
pub fn limit_bound_constants() -> (f64, f64) {
    let shift = 2.0 / (10.0 * (std::f64::consts::SQRT_2 - 1.0));
    (-shift, 1.0 + shift)
}

/// Result of the five bounds for the pair of rows `(k, k+1)`. A margin is
/// nonnegative exactly when the bound holds (strict parts require a positive
/// margin).
#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub k: usize,
    pub passed: [bool; 5],
    pub margins: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundFailure {
    /// 1-based bound number.
    pub bound: usize,
    pub k: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub pairs: Vec<PairCheck>,
    /// Worst pair for each bound that failed anywhere.
    pub failures: Vec<BoundFailure>,
    pub x_limit_ok: bool,
    pub y_limit_ok: bool,
    pub min_tau: Option<f64>,
    pub table1_max_rel_dev: Option<f64>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.x_limit_ok && self.y_limit_ok
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,ind1,ind2,ind3,ind4,ind5\n");
        for pair in &self.pairs {
            let flags: Vec<&str> = pair.passed.iter().map(|p| if *p { "pass" } else { "fail" }).collect();
            out.push_str(&format!("{},{}\n", pair.k, flags.join(",")));
        }
        out
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pairs checked: {}", self.pairs.len())?;
        for (i, name) in LEMMA_BOUNDS.iter().enumerate() {
            match self.failures.iter().find(|fl| fl.bound == i + 1) {
                None => writeln!(f, "  ind{}  pass  {name}", i + 1)?,
                Some(fl) => writeln!(
                    f,
                    "  ind{}  FAIL  {name}  (worst at k={}, margin {:e})",
                    i + 1,
                    fl.k,
                    fl.margin
                )?,
            }
        }
        let (x_lim, y_lim) = limit_bound_constants();
        writeln!(
            f,
            "  x in [{x_lim:.10}, 0]: {}",
            if self.x_limit_ok { "pass" } else { "FAIL" }
        )?;
        writeln!(
            f,
            "  y in [1, {y_lim:.10}]: {}",
            if self.y_limit_ok { "pass" } else { "FAIL" }
        )?;
        if let Some(t) = self.min_tau {
            writeln!(f, "  observed min tau: {t:.8}")?;
        }
        if let Some(d) = self.table1_max_rel_dev {
            writeln!(f, "  max relative deviation from reference table: {d:e}")?;
        }
        Ok(())
    }
}

fn pair_margins(a: &TraceRecord, b: &TraceRecord) -> ([f64; 5], [bool; 5]) {
    let (xa, ya, wa) = (a.point.x[0], a.point.y[0], a.point.w[0]);
    let (xb, yb, wb) = (b.point.x[0], b.point.y[0], b.point.w[0]);
    let s = (ya * wa).sqrt();

    let m1 = (ya - 1.0).min(yb - ya);
    let m2 = (wa / 2.0 - wb).min(0.02 - wa / 2.0);
    let m3_weak = xb - (xa - s);
    let m3_strict = (xa - s) + 1.0;
    let m3 = m3_weak.min(m3_strict);
    let m4 = ya * wa / 2.0 - yb * wb;
    let (m5, ok5) = match b.tau {
        Some(t) => {
            let m = (t - TAU_LOWER).min(1.0 - t);
            (m, m >= 0.0)
        }
        None => (0.0, true),
    };
    (
        [m1, m2, m3, m4, m5],
        [m1 >= 0.0, m2 >= 0.0, m3_weak >= 0.0 && m3_strict > 0.0, m4 >= 0.0, ok5],
    )
}

/// Checks every consecutive pair of a scalar (`n_x = m = 1`) trace. The step
/// size of pair `(k, k+1)` is read from row `k+1`; a missing step size is not
/// checked.
pub fn verify_lemma_bounds(trace: &[TraceRecord]) -> VerificationReport {
    let mut pairs = Vec::new();
    let mut failures: Vec<BoundFailure> = Vec::new();
    for w in trace.windows(2) {
        let (margins, passed) = pair_margins(&w[0], &w[1]);
        for i in 0..5 {
            if passed[i] {
                continue;
            }
            match failures.iter_mut().find(|f| f.bound == i + 1) {
                Some(f) if margins[i] < f.margin => {
                    f.k = w[0].k;
                    f.margin = margins[i];
                }
                Some(_) => {}
                None => failures.push(BoundFailure {
                    bound: i + 1,
                    k: w[0].k,
                    margin: margins[i],
                }),
            }
        }
        pairs.push(PairCheck {
            k: w[0].k,
            passed,
            margins,
        });
    }
    failures.sort_by_key(|f| f.bound);

    let (x_lim, y_lim) = limit_bound_constants();
    let x_limit_ok = trace.iter().all(|r| r.point.x[0] >= x_lim && r.point.x[0] <= 0.0);
    let y_limit_ok = trace.iter().all(|r| r.point.y[0] >= 1.0 && r.point.y[0] <= y_lim);
    let min_tau = trace.iter().filter_map(|r| r.tau).reduce(f64::min);

    VerificationReport {
        pairs,
        failures,
        x_limit_ok,
        y_limit_ok,
        min_tau,
        table1_max_rel_dev: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::table1_trace;

    #[test]
    fn limit_constants() {
        let (x, y) = limit_bound_constants();
        assert!((x + 0.4828427125).abs() < 1e-10);
        assert!((y - 1.4828427125).abs() < 1e-10);
        assert!((x + y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reference_table_passes() {
        let report = verify_lemma_bounds(&table1_trace());
        assert_eq!(report.pairs.len(), 9);
        assert!(report.all_passed(), "{report}");
        assert!(report.min_tau.unwrap() >= TAU_LOWER);
    }

    #[test]
    fn planted_short_step_is_flagged() {
        let mut trace = table1_trace();
        trace[4].tau = Some(0.5);
        let report = verify_lemma_bounds(&trace);
        assert!(!report.all_passed());
        assert_eq!(
            report.failures,
            vec![BoundFailure {
                bound: 5,
                k: 4,
                margin: 0.5 - TAU_LOWER
            }]
        );
        assert!(!report.pairs[3].passed[4]);
        assert!(report.to_string().contains("ind5  FAIL"));
        assert!(report.to_csv().lines().nth(4).unwrap().ends_with("fail"));
    }

    #[test]
    fn csv_has_one_line_per_pair() {
        let report = verify_lemma_bounds(&table1_trace());
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 10);
        assert_eq!(csv.lines().next(), Some("k,ind1,ind2,ind3,ind4,ind5"));
    }
}
