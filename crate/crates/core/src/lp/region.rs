//! Throughput regions as parametric linear-program feasibility: balance
//! equalities whose right-hand side is linear in the rate pair, per-state
//! (or time-budget) simplex rows, boundary bisection along rays and the
//! proportional-fair point.

use super::simplex::{solve_feasibility, LinearSystem, SimplexOutcome, SolverError};
use crate::channel::RaCombo;
use crate::spn::SpnSpec;
use crate::vnet;

/// Absolute tolerance of boundary bisection.
pub const BOUNDARY_TOL: f64 = 1e-7;

/// A pair of arrival rates, packets per slot (or per second in
/// rate-adaptation regions).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
}

impl RatePoint {
    pub fn new(r1: f64, r2: f64) -> Self {
        assert!(r1 >= 0.0 && r2 >= 0.0, "rates must be nonnegative");
        RatePoint { r1, r2 }
    }

    pub fn sum(&self) -> f64 {
        self.r1 + self.r2
    }

    pub fn scale(&self, theta: f64) -> RatePoint {
        RatePoint {
            r1: self.r1 * theta,
            r2: self.r2 * theta,
        }
    }
}

/// One balance equality: `coeffs · x = r1 · R1 + r2 · R2 + constant`.
#[derive(Clone, Debug)]
struct EqRow {
    coeffs: Vec<f64>,
    r1: f64,
    r2: f64,
    constant: f64,
}

/// A throughput region described by nonnegative variables, rate-parametric
/// equalities and simplex/budget rows.
#[derive(Clone, Debug)]
pub struct RegionLp {
    pub var_names: Vec<String>,
    eq: Vec<EqRow>,
    ub: Vec<(Vec<f64>, f64)>,
    /// Upper bound on either flow's achievable rate; brackets the bisection.
    rate_cap: f64,
}

impl RegionLp {
    pub(crate) fn from_parts(
        var_names: Vec<String>,
        eq: Vec<(Vec<f64>, f64, f64, f64)>,
        ub: Vec<(Vec<f64>, f64)>,
        rate_cap: f64,
    ) -> Self {
        RegionLp {
            var_names,
            eq: eq
                .into_iter()
                .map(|(coeffs, r1, r2, constant)| EqRow {
                    coeffs,
                    r1,
                    r2,
                    constant,
                })
                .collect(),
            ub,
            rate_cap,
        }
    }

    pub(crate) fn push_eq(&mut self, coeffs: Vec<f64>, r1: f64, r2: f64, constant: f64) {
        self.eq.push(EqRow {
            coeffs,
            r1,
            r2,
            constant,
        });
    }

    pub(crate) fn push_ub(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.ub.push((coeffs, rhs));
    }

    fn system(&self, r: RatePoint) -> LinearSystem {
        let mut sys = LinearSystem::new(self.var_names.len());
        for row in &self.eq {
            sys.push_eq(
                row.coeffs.clone(),
                row.r1 * r.r1 + row.r2 * r.r2 + row.constant,
            );
        }
        for (coeffs, rhs) in &self.ub {
            sys.push_ub(coeffs.clone(), *rhs);
        }
        sys
    }

    /// Is the rate pair supportable?
    pub fn feasible(&self, r: RatePoint) -> Result<bool, SolverError> {
        Ok(matches!(
            solve_feasibility(&self.system(r))?,
            SimplexOutcome::Feasible(_)
        ))
    }

    /// A service-fraction witness for a feasible rate pair.
    pub fn witness(&self, r: RatePoint) -> Result<Option<Vec<f64>>, SolverError> {
        match solve_feasibility(&self.system(r))? {
            SimplexOutcome::Feasible(x) => Ok(Some(x)),
            SimplexOutcome::Infeasible(_) => Ok(None),
        }
    }

    /// Maximum violation of the region's constraints by a candidate point.
    pub fn residual(&self, x: &[f64], r: RatePoint) -> f64 {
        self.system(r).residual(x)
    }

    /// For an infeasible rate pair, verify the solver's dual certificate
    /// independently. `Ok(None)` means the point was feasible after all.
    pub fn certify_infeasible(&self, r: RatePoint) -> Result<Option<bool>, SolverError> {
        let sys = self.system(r);
        match solve_feasibility(&sys)? {
            SimplexOutcome::Feasible(_) => Ok(None),
            SimplexOutcome::Infeasible(y) => Ok(Some(
                super::simplex::verify_infeasibility_certificate(&sys, &y),
            )),
        }
    }

    /// Largest `theta` with `theta * direction` feasible, to within
    /// [`BOUNDARY_TOL`]. The region is convex and contains the origin, so
    /// feasibility is monotone along the ray.
    pub fn boundary(&self, direction: RatePoint) -> Result<f64, SolverError> {
        self.boundary_with_tol(direction, BOUNDARY_TOL)
    }

    fn boundary_with_tol(&self, direction: RatePoint, tol: f64) -> Result<f64, SolverError> {
        let dmax = direction.r1.max(direction.r2);
        assert!(dmax > 0.0, "direction must be nonzero");
        debug_assert!(
            self.feasible(RatePoint::new(0.0, 0.0))?,
            "origin must be feasible"
        );
        let mut hi = 2.0 * self.rate_cap / dmax;
        let mut doublings = 0;
        while self.feasible(direction.scale(hi))? {
            hi *= 2.0;
            doublings += 1;
            assert!(
                doublings < 60,
                "region appears unbounded along {direction:?}"
            );
        }
        let mut lo = 0.0;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.feasible(direction.scale(mid))? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Maximizer of `log R1 + log R2` over the region, via golden-section
    /// search on the boundary's direction angle (the objective is concave
    /// along the boundary of a convex region).
    pub fn prop_fair(&self) -> Result<RatePoint, SolverError> {
        // tighter bisection keeps boundary noise below the objective's
        // curvature scale near the (flat) optimum
        let rate_at = |angle: f64| -> Result<RatePoint, SolverError> {
            let dir = RatePoint::new(angle.cos(), angle.sin());
            Ok(dir.scale(self.boundary_with_tol(dir, 1e-9)?))
        };
        let objective = |r: RatePoint| -> f64 {
            if r.r1 <= 0.0 || r.r2 <= 0.0 {
                f64::NEG_INFINITY
            } else {
                r.r1.ln() + r.r2.ln()
            }
        };
        let golden = 0.618_033_988_749_894_8;
        let mut a = 1e-3f64;
        let mut b = std::f64::consts::FRAC_PI_2 - 1e-3;
        assert!(
            self.boundary(RatePoint::new(1.0, 1.0))? > 1e-9,
            "region has empty interior"
        );
        let mut c1 = b - golden * (b - a);
        let mut c2 = a + golden * (b - a);
        let mut f1 = objective(rate_at(c1)?);
        let mut f2 = objective(rate_at(c2)?);
        while b - a > 1e-6 {
            if f1 < f2 {
                a = c1;
                c1 = c2;
                f1 = f2;
                c2 = a + golden * (b - a);
                f2 = objective(rate_at(c2)?);
            } else {
                b = c2;
                c2 = c1;
                f2 = f1;
                c1 = b - golden * (b - a);
                f1 = objective(rate_at(c1)?);
            }
        }
        rate_at(0.5 * (a + b))
    }
}

/// Feasibility of an arbitrary-rate vector in a generic SPN: balance
/// equalities over the per-state service fractions with the per-state
/// simplex constraint.
pub fn spn_feasible(spec: &SpnSpec, rates: &[f64]) -> Result<bool, SolverError> {
    assert_eq!(rates.len(), spec.inputs, "one rate per input activity");
    let states = spec.state_freqs.len();
    let nvar = spec.allowed.len() * states;
    let mut sys = LinearSystem::new(nvar);
    for k in 0..spec.queues {
        let mut row = vec![0.0; nvar];
        for c in 0..states {
            for (vi, &n) in spec.allowed.iter().enumerate() {
                row[c * spec.allowed.len() + vi] =
                    spec.state_freqs[c] * (spec.b_in[c].get(k, n) - spec.b_out[c].get(k, n));
            }
        }
        let rhs: f64 = (0..spec.inputs)
            .map(|m| spec.input_matrix.get(k, m) * rates[m])
            .sum();
        sys.push_eq(row, rhs);
    }
    for c in 0..states {
        let mut row = vec![0.0; nvar];
        for vi in 0..spec.allowed.len() {
            row[c * spec.allowed.len() + vi] = 1.0;
        }
        sys.push_ub(row, 1.0);
    }
    Ok(matches!(
        solve_feasibility(&sys)?,
        SimplexOutcome::Feasible(_)
    ))
}

/// The two-flow throughput region of an SPN (requires exactly two input
/// activities).
pub fn spn_region(spec: &SpnSpec) -> RegionLp {
    assert_eq!(spec.inputs, 2, "two-flow region needs two input activities");
    let states = spec.state_freqs.len();
    let per_state = spec.allowed.len();
    let nvar = per_state * states;
    let mut var_names = Vec::with_capacity(nvar);
    for c in 0..states {
        for &n in &spec.allowed {
            var_names.push(format!("x_{n}^{c}"));
        }
    }
    let mut eq = Vec::with_capacity(spec.queues);
    for k in 0..spec.queues {
        let mut coeffs = vec![0.0; nvar];
        for c in 0..states {
            for (vi, &n) in spec.allowed.iter().enumerate() {
                coeffs[c * per_state + vi] =
                    spec.state_freqs[c] * (spec.b_in[c].get(k, n) - spec.b_out[c].get(k, n));
            }
        }
        eq.push(EqRow {
            coeffs,
            r1: spec.input_matrix.get(k, 0),
            r2: spec.input_matrix.get(k, 1),
            constant: 0.0,
        });
    }
    let mut ub = Vec::with_capacity(states);
    for c in 0..states {
        let mut coeffs = vec![0.0; nvar];
        for vi in 0..per_state {
            coeffs[c * per_state + vi] = 1.0;
        }
        ub.push((coeffs, 1.0));
    }
    // one transmission per slot bounds each flow's delivery rate by one
    RegionLp {
        var_names,
        eq,
        ub,
        rate_cap: 1.0,
    }
}

/// Scheme choice for a rate-adaptation region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RaScheme {
    /// All seven operations, free choice of combo per transmission.
    SevenOp,
    /// Five operations locked to one combo.
    FiveOpFixed(usize),
    /// Uncoded routing, free choice of combo.
    Routing,
}

/// Throughput region (packets per second) of a rate-adaptation scheme:
/// every (combo, operation) pair is a schedulable mode whose per-second use
/// is a variable, under the time budget
/// `sum_i duration_i * (total use of combo i) <= 1`.
pub fn rate_adaptation_region(combos: &[RaCombo], scheme: RaScheme) -> RegionLp {
    assert!(!combos.is_empty());
    assert!(combos.iter().all(|c| c.duration > 0.0));
    let min_t = combos
        .iter()
        .map(|c| c.duration)
        .fold(f64::INFINITY, f64::min);
    let rate_cap = 1.0 / min_t;

    let (queues, ops, used): (usize, usize, Vec<usize>) = match scheme {
        RaScheme::SevenOp => (5, 7, (0..combos.len()).collect()),
        RaScheme::FiveOpFixed(i) => {
            assert!(i < combos.len(), "no such combo");
            (4, 5, vec![i])
        }
        RaScheme::Routing => (2, 2, (0..combos.len()).collect()),
    };
    let per_mode = ops;
    let nvar = per_mode * used.len();

    let mut var_names = Vec::with_capacity(nvar);
    for &i in &used {
        for op in 0..ops {
            var_names.push(format!("x_{op}^({i})"));
        }
    }

    let matrices: Vec<(crate::mat::Mat, crate::mat::Mat)> = used
        .iter()
        .map(|&i| match scheme {
            RaScheme::SevenOp => vnet::build_matrices(&combos[i].p),
            RaScheme::FiveOpFixed(_) => vnet::build_matrices_5op(&combos[i].p),
            RaScheme::Routing => {
                let mut b_in = crate::mat::Mat::zeros(2, 2);
                b_in.set(0, 0, combos[i].p.p_d1());
                b_in.set(1, 1, combos[i].p.p_d2());
                (b_in, crate::mat::Mat::zeros(2, 2))
            }
        })
        .collect();

    let mut eq = Vec::with_capacity(queues);
    for k in 0..queues {
        let mut coeffs = vec![0.0; nvar];
        for (mi, (b_in, b_out)) in matrices.iter().enumerate() {
            for op in 0..ops {
                coeffs[mi * per_mode + op] = b_in.get(k, op) - b_out.get(k, op);
            }
        }
        // arrivals enter the first queue of each flow
        eq.push(EqRow {
            coeffs,
            r1: f64::from(k == 0),
            r2: f64::from(k == 1),
            constant: 0.0,
        });
    }

    let mut budget = vec![0.0; nvar];
    for (mi, &i) in used.iter().enumerate() {
        for op in 0..ops {
            budget[mi * per_mode + op] = combos[i].duration;
        }
    }
    RegionLp {
        var_names,
        eq,
        ub: vec![(budget, 1.0)],
        rate_cap,
    }
}
