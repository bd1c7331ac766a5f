//! Generic (0,1) random stochastic processing network and its
//! deficit-max-weight scheduler.
//!
//! A service activity (SA) consumes at most one packet from each of its input
//! queues and emits at most one packet into each of its output queues per
//! activation; consumption and emission are Bernoulli with known per-state
//! expectations. The scheduler ranks SAs by expected backpressure over
//! *virtual* queue lengths, executes the preferred SA only when every input
//! queue actually holds a packet, and otherwise idles while the bookkeeping
//! ledgers still advance as if the preferred SA had run.
//!
//! Four per-queue ledgers are maintained:
//!
//! * `q_virtual`: signed, advanced by *expected* service rates;
//! * `q_inter_virtual`: signed, advanced by *realized* 0/1 service;
//! * `q_inter_actual`: realized service, clamped at zero;
//! * `q_actual`: true packet counts, advanced only when the executed SA ran.
//!
//! The deficit `D = q_inter_actual − q_inter_virtual` is non-decreasing, and
//! the null-activity counter bounds it from below; both are kept as runtime
//! diagnostics.

use crate::mat::Mat;
use rand::Rng;
use thiserror::Error;

/// Absolute tolerance for ledger comparisons (entries are exact multiples of
/// probabilities; this guards accumulation error only).
pub const LEDGER_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SpnError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("activation vector {0} has more than one nonzero coordinate")]
    MultiActivation(usize),
    #[error("activation set must contain the all-zero vector")]
    MissingIdle,
    #[error("expected input rate {value} for queue {queue}, SA {sa}, state {state} not in (0,1]")]
    BadInputRate {
        queue: usize,
        sa: usize,
        state: usize,
        value: f64,
    },
    #[error("rate {value} outside [0,1] at queue {queue}, SA {sa}, state {state}")]
    RateOutOfRange {
        queue: usize,
        sa: usize,
        state: usize,
        value: f64,
    },
    #[error("nonzero rate off the declared support: queue {queue}, SA {sa}")]
    OffSupport { queue: usize, sa: usize },
    #[error("queue graph has a cycle")]
    Cyclic,
    #[error("state frequencies must be positive and sum to 1")]
    BadFrequencies,
    #[error("input matrix entry must be a nonnegative integer, got {0}")]
    BadInputMatrix(f64),
}

/// Static description of a (0,1) random SPN.
#[derive(Clone, Debug)]
pub struct SpnSpec {
    /// K queues.
    pub queues: usize,
    /// M input activities.
    pub inputs: usize,
    /// N service activities.
    pub activities: usize,
    /// K×M input matrix; entry (k, m) is the packet count IA m injects into
    /// queue k per activation.
    pub input_matrix: Mat,
    /// Long-run frequency of each channel state.
    pub state_freqs: Vec<f64>,
    /// Expected input service matrix per channel state, K×N.
    pub b_in: Vec<Mat>,
    /// Expected output service matrix per channel state, K×N.
    pub b_out: Vec<Mat>,
    /// Input queues of each SA.
    pub sa_inputs: Vec<Vec<usize>>,
    /// Output queues of each SA.
    pub sa_outputs: Vec<Vec<usize>>,
    /// SAs usable as singleton activations; the idle vector is always allowed.
    pub allowed: Vec<usize>,
}

impl SpnSpec {
    /// Accepts the activation set as explicit binary vectors and checks every
    /// structural invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        input_matrix: Mat,
        state_freqs: Vec<f64>,
        b_in: Vec<Mat>,
        b_out: Vec<Mat>,
        sa_inputs: Vec<Vec<usize>>,
        sa_outputs: Vec<Vec<usize>>,
        activation_vectors: Vec<Vec<u8>>,
    ) -> Result<Self, SpnError> {
        let queues = input_matrix.rows();
        let inputs = input_matrix.cols();
        let activities = sa_inputs.len();

        let mut allowed = Vec::new();
        let mut has_idle = false;
        for (i, v) in activation_vectors.iter().enumerate() {
            if v.len() != activities {
                return Err(SpnError::Dimension(format!("activation vector {i}")));
            }
            let nz: Vec<usize> = (0..activities).filter(|&n| v[n] != 0).collect();
            match nz.len() {
                0 => has_idle = true,
                1 => allowed.push(nz[0]),
                _ => return Err(SpnError::MultiActivation(i)),
            }
        }
        if !has_idle {
            return Err(SpnError::MissingIdle);
        }
        allowed.sort_unstable();
        allowed.dedup();

        let spec = SpnSpec {
            queues,
            inputs,
            activities,
            input_matrix,
            state_freqs,
            b_in,
            b_out,
            sa_inputs,
            sa_outputs,
            allowed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpnError> {
        let (k, m, n) = (self.queues, self.inputs, self.activities);
        if self.input_matrix.rows() != k || self.input_matrix.cols() != m {
            return Err(SpnError::Dimension("input matrix".into()));
        }
        for r in 0..k {
            for c in 0..m {
                let v = self.input_matrix.get(r, c);
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(SpnError::BadInputMatrix(v));
                }
            }
        }
        if self.sa_inputs.len() != n || self.sa_outputs.len() != n {
            return Err(SpnError::Dimension("SA support sets".into()));
        }
        let freq_sum: f64 = self.state_freqs.iter().sum();
        if self.state_freqs.is_empty()
            || self.state_freqs.iter().any(|f| !f.is_finite() || *f <= 0.0)
            || (freq_sum - 1.0).abs() > 1e-9
        {
            return Err(SpnError::BadFrequencies);
        }
        if self.b_in.len() != self.state_freqs.len() || self.b_out.len() != self.state_freqs.len() {
            return Err(SpnError::Dimension("per-state matrices".into()));
        }
        for (c, (bi, bo)) in self.b_in.iter().zip(&self.b_out).enumerate() {
            if bi.rows() != k || bi.cols() != n || bo.rows() != k || bo.cols() != n {
                return Err(SpnError::Dimension(format!("service matrices, state {c}")));
            }
            for sa in 0..n {
                for q in 0..k {
                    let vin = bi.get(q, sa);
                    let vout = bo.get(q, sa);
                    let in_support_in = self.sa_inputs[sa].contains(&q);
                    let in_support_out = self.sa_outputs[sa].contains(&q);
                    if !(0.0..=1.0).contains(&vin) {
                        return Err(SpnError::RateOutOfRange {
                            queue: q,
                            sa,
                            state: c,
                            value: vin,
                        });
                    }
                    if !(0.0..=1.0).contains(&vout) {
                        return Err(SpnError::RateOutOfRange {
                            queue: q,
                            sa,
                            state: c,
                            value: vout,
                        });
                    }
                    if vin != 0.0 && !in_support_in {
                        return Err(SpnError::OffSupport { queue: q, sa });
                    }
                    if vout != 0.0 && !in_support_out {
                        return Err(SpnError::OffSupport { queue: q, sa });
                    }
                    // expected consumption on the support must be strictly positive
                    if in_support_in && vin <= 0.0 {
                        return Err(SpnError::BadInputRate {
                            queue: q,
                            sa,
                            state: c,
                            value: vin,
                        });
                    }
                }
            }
        }
        self.check_acyclic()
    }

    /// Queue→SA→queue graph must be a DAG.
    fn check_acyclic(&self) -> Result<(), SpnError> {
        let k = self.queues;
        let mut adj = vec![Vec::new(); k];
        for sa in 0..self.activities {
            for &src in &self.sa_inputs[sa] {
                for &dst in &self.sa_outputs[sa] {
                    adj[src].push(dst);
                }
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; k];
        fn dfs(v: usize, adj: &[Vec<usize>], mark: &mut [u8]) -> bool {
            mark[v] = 1;
            for &w in &adj[v] {
                if mark[w] == 1 || (mark[w] == 0 && dfs(w, adj, mark)) {
                    return true;
                }
            }
            mark[v] = 2;
            false
        }
        for v in 0..k {
            if mark[v] == 0 && dfs(v, &adj, &mut mark) {
                return Err(SpnError::Cyclic);
            }
        }
        Ok(())
    }
}

/// The four queue-length ledgers plus diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerState {
    /// Virtual queue lengths (signed; expected-rate updates).
    pub q_virtual: Vec<f64>,
    /// Intermediate virtual queue lengths (signed; realized-rate updates).
    pub q_inter_virtual: Vec<f64>,
    /// Intermediate actual queue lengths (realized, clamped at zero).
    pub q_inter_actual: Vec<f64>,
    /// Actual packet counts.
    pub q_actual: Vec<u64>,
    /// Null-activity counter per queue.
    pub null_activity: Vec<u64>,
    /// Deficit per queue; non-decreasing.
    pub deficit: Vec<f64>,
    /// Slots elapsed.
    pub t: u64,
}

impl SchedulerState {
    pub fn new(queues: usize) -> Self {
        SchedulerState {
            q_virtual: vec![0.0; queues],
            q_inter_virtual: vec![0.0; queues],
            q_inter_actual: vec![0.0; queues],
            q_actual: vec![0; queues],
            null_activity: vec![0; queues],
            deficit: vec![0.0; queues],
            t: 0,
        }
    }

    pub fn backlog(&self) -> u64 {
        self.q_actual.iter().sum()
    }
}

/// Realized 0/1 service indicators for the single activated SA, as full
/// per-queue columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceRealization {
    pub bin: Vec<u8>,
    pub bout: Vec<u8>,
}

impl ServiceRealization {
    pub fn idle(queues: usize) -> Self {
        ServiceRealization {
            bin: vec![0; queues],
            bout: vec![0; queues],
        }
    }
}

/// Supplies the realized service indicators when an SA is activated under a
/// given channel state. Realizations must be independent across slots; within
/// a slot the source may be queried for at most two SAs (preferred and
/// executed) and both views must describe the same underlying random outcome.
pub trait RealizationSource {
    fn realize(&mut self, spec: &SpnSpec, state_idx: usize, sa: usize) -> ServiceRealization;
}

/// Independent Bernoulli realization of every support entry; used by
/// synthetic SPNs whose transitions are not tied to one broadcast event.
pub struct BernoulliSource<'a, R: Rng> {
    pub rng: &'a mut R,
}

impl<R: Rng> RealizationSource for BernoulliSource<'_, R> {
    fn realize(&mut self, spec: &SpnSpec, state_idx: usize, sa: usize) -> ServiceRealization {
        let mut real = ServiceRealization::idle(spec.queues);
        for &k in &spec.sa_inputs[sa] {
            let p = spec.b_in[state_idx].get(k, sa);
            real.bin[k] = u8::from(self.rng.gen::<f64>() < p);
        }
        for &k in &spec.sa_outputs[sa] {
            let p = spec.b_out[state_idx].get(k, sa);
            real.bout[k] = u8::from(self.rng.gen::<f64>() < p);
        }
        real
    }
}

/// Which ledger feeds the backpressure computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackpressureMode {
    /// Expected-rate virtual queues.
    Virtual,
    /// Realized-rate intermediate virtual queues; same stability region in
    /// practice but markedly smaller actual backlog.
    InterVirtual,
}

/// What to do when the preferred SA lacks packets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InfeasiblePolicy {
    /// Idle for the slot (the analyzed variant).
    Idle,
    /// Execute the lowest-indexed feasible SA instead.
    FirstFeasible,
}

/// Backpressure vector `d = (B̄in − B̄out)ᵀ q`.
pub fn backpressure(b_in: &Mat, b_out: &Mat, q: &[f64]) -> Vec<f64> {
    b_in.sub(b_out).tr_matvec(q)
}

/// Maximizer of `d · x` over singleton activations plus idle. Ties break
/// toward the lowest SA index; idle wins whenever the maximum is ≤ 0.
pub fn select_preferred(d: &[f64], allowed: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &n in allowed {
        // strict improvement keeps the lowest index on ties (allowed is sorted)
        if best.is_none_or(|(_, bv)| d[n] > bv) {
            best = Some((n, d[n]));
        }
    }
    match best {
        Some((n, v)) if v > 0.0 => Some(n),
        _ => None,
    }
}

/// An SA is feasible when every one of its input queues holds a packet; idle
/// is always feasible.
pub fn is_feasible(spec: &SpnSpec, sa: Option<usize>, actual: &[u64]) -> bool {
    match sa {
        None => true,
        Some(n) => spec.sa_inputs[n].iter().all(|&k| actual[k] >= 1),
    }
}

/// Lowest-indexed feasible SA, if any.
pub fn first_feasible(spec: &SpnSpec, actual: &[u64]) -> Option<usize> {
    spec.allowed
        .iter()
        .copied()
        .find(|&n| is_feasible(spec, Some(n), actual))
}

/// Virtual-queue update `q += A·a + (B̄out − B̄in)·x*`, applied whether or not
/// the preferred SA was feasible.
pub fn update_virtual(
    spec: &SpnSpec,
    state_idx: usize,
    q: &mut [f64],
    arrivals: &[u32],
    preferred: Option<usize>,
) {
    let arr: Vec<f64> = arrivals.iter().map(|&a| a as f64).collect();
    let inject = spec.input_matrix.matvec(&arr);
    for k in 0..spec.queues {
        q[k] += inject[k];
        if let Some(n) = preferred {
            q[k] += spec.b_out[state_idx].get(k, n) - spec.b_in[state_idx].get(k, n);
        }
    }
}

/// Per-slot realized packet flows: `mu_out[k]` leaves queue k toward the
/// preferred SA, `mu_in[k]` enters queue k (external arrivals plus SA
/// output).
pub fn service_flows(
    spec: &SpnSpec,
    arrivals: &[u32],
    real: &ServiceRealization,
) -> (Vec<f64>, Vec<f64>) {
    let arr: Vec<f64> = arrivals.iter().map(|&a| a as f64).collect();
    let mut mu_in = spec.input_matrix.matvec(&arr);
    for (m, b) in mu_in.iter_mut().zip(&real.bout) {
        *m += *b as f64;
    }
    let mu_out = real.bin.iter().map(|&b| b as f64).collect();
    (mu_out, mu_in)
}

/// Signed intermediate update `q_inter += mu_in − mu_out`.
pub fn update_inter_virtual(q_inter: &mut [f64], mu_out: &[f64], mu_in: &[f64]) {
    for k in 0..q_inter.len() {
        q_inter[k] += mu_in[k] - mu_out[k];
    }
}

/// Clamped intermediate update `Q_inter = (Q_inter − mu_out)⁺ + mu_in`.
pub fn update_inter_actual(q_inter_actual: &mut [f64], mu_out: &[f64], mu_in: &[f64]) {
    for k in 0..q_inter_actual.len() {
        q_inter_actual[k] = (q_inter_actual[k] - mu_out[k]).max(0.0) + mu_in[k];
    }
}

/// Null-activity and deficit bookkeeping; must run on the pre-update
/// `q_inter_actual` values.
pub fn record_diagnostics(
    state: &mut SchedulerState,
    spec: &SpnSpec,
    preferred: Option<usize>,
    real: &ServiceRealization,
    mu_out: &[f64],
) {
    if let Some(n) = preferred {
        for &k in &spec.sa_inputs[n] {
            if state.q_inter_actual[k] < real.bin[k] as f64 - LEDGER_TOL {
                state.null_activity[k] += 1;
            }
        }
    }
    for ((d, out), inter) in state
        .deficit
        .iter_mut()
        .zip(mu_out)
        .zip(&state.q_inter_actual)
    {
        *d += (out - inter).max(0.0);
    }
}

/// Everything one scheduler slot produced.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    /// SA ranked first by backpressure (`None` = idle preferred).
    pub preferred: Option<usize>,
    /// SA actually executed against the packet queues.
    pub executed: Option<usize>,
    /// Realization of the preferred SA's column (zeros when idle).
    pub realization: ServiceRealization,
    /// Realization of the executed SA when it differs from the preferred.
    pub executed_realization: Option<ServiceRealization>,
}

/// One full scheduler slot: rank, check feasibility, advance all four
/// ledgers and the diagnostics. Arrivals become available at the end of the
/// slot (they cannot be transmitted within their arrival slot).
pub fn step(
    state: &mut SchedulerState,
    spec: &SpnSpec,
    state_idx: usize,
    arrivals: &[u32],
    source: &mut dyn RealizationSource,
    mode: BackpressureMode,
    policy: InfeasiblePolicy,
) -> StepOutcome {
    let lens = match mode {
        BackpressureMode::Virtual => &state.q_virtual,
        BackpressureMode::InterVirtual => &state.q_inter_virtual,
    };
    let d = backpressure(&spec.b_in[state_idx], &spec.b_out[state_idx], lens);
    let preferred = select_preferred(&d, &spec.allowed);
    let executed = if is_feasible(spec, preferred, &state.q_actual) {
        preferred
    } else {
        match policy {
            InfeasiblePolicy::Idle => None,
            InfeasiblePolicy::FirstFeasible => first_feasible(spec, &state.q_actual),
        }
    };
    advance_ledgers(
        state, spec, state_idx, arrivals, preferred, executed, source,
    )
}

/// Ledger updates shared by [`step`] and callers that pick `preferred`
/// themselves (custom policies, the packet-level engine).
pub fn advance_ledgers(
    state: &mut SchedulerState,
    spec: &SpnSpec,
    state_idx: usize,
    arrivals: &[u32],
    preferred: Option<usize>,
    executed: Option<usize>,
    source: &mut dyn RealizationSource,
) -> StepOutcome {
    let real = match preferred {
        Some(n) => source.realize(spec, state_idx, n),
        None => ServiceRealization::idle(spec.queues),
    };
    let executed_real = match executed {
        Some(n) if preferred != executed => Some(source.realize(spec, state_idx, n)),
        _ => None,
    };

    let (mu_out, mu_in) = service_flows(spec, arrivals, &real);
    record_diagnostics(state, spec, preferred, &real, &mu_out);
    update_virtual(spec, state_idx, &mut state.q_virtual, arrivals, preferred);
    update_inter_virtual(&mut state.q_inter_virtual, &mu_out, &mu_in);
    update_inter_actual(&mut state.q_inter_actual, &mu_out, &mu_in);

    if let Some(_n) = executed {
        let er = executed_real.as_ref().unwrap_or(&real);
        for k in 0..spec.queues {
            state.q_actual[k] -= er.bin[k] as u64;
            state.q_actual[k] += er.bout[k] as u64;
        }
    }
    let arr: Vec<f64> = arrivals.iter().map(|&a| a as f64).collect();
    let inject = spec.input_matrix.matvec(&arr);
    for (q, inj) in state.q_actual.iter_mut().zip(&inject) {
        *q += *inj as u64;
    }
    state.t += 1;

    StepOutcome {
        preferred,
        executed,
        realization: real,
        executed_realization: executed_real,
    }
}

/// The canonical irreducibly-random example: one mandatory arrival per slot
/// into `Q1`, a splitting SA that moves the packet to exactly one of
/// `Q2`/`Q3` with equal probability, and a joining SA that consumes one from
/// each. The difference `|Q2 - Q3|` performs a ±1 random walk per split, so
/// no policy keeps both queues bounded even though the expected flow
/// balance admits the arrival rate.
pub fn split_network_spec() -> SpnSpec {
    let b_in = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]]);
    let b_out = Mat::from_rows(&[&[0.0, 0.0], &[0.5, 0.0], &[0.5, 0.0]]);
    SpnSpec::new(
        Mat::from_rows(&[&[1.0], &[0.0], &[0.0]]),
        vec![1.0],
        vec![b_in],
        vec![b_out],
        vec![vec![0], vec![1, 2]],
        vec![vec![1, 2], vec![]],
        vec![vec![0, 0], vec![1, 0], vec![0, 1]],
    )
    .expect("fixture is valid")
}

/// Realization source of the split network: the splitting SA routes its
/// packet to one output drawn by a fair coin; the joining SA is
/// deterministic.
pub struct SplitSource<'a, R: Rng> {
    pub rng: &'a mut R,
}

impl<R: Rng> RealizationSource for SplitSource<'_, R> {
    fn realize(&mut self, spec: &SpnSpec, _state_idx: usize, sa: usize) -> ServiceRealization {
        let mut real = ServiceRealization::idle(spec.queues);
        if sa == 0 {
            real.bin[0] = 1;
            if self.rng.gen::<bool>() {
                real.bout[1] = 1;
            } else {
                real.bout[2] = 1;
            }
        } else {
            real.bin[1] = 1;
            real.bin[2] = 1;
        }
        real
    }
}

/// CSV export of the diagnostic time series, columns
/// `t,q_K,q_inter_K,Q_inter_K,Q_K,N_NA_K,D_K` repeated per queue.
#[derive(Clone, Debug, Default)]
pub struct DiagnosticsLog {
    rows: Vec<DiagRow>,
}

/// One sampled row: slot plus the four ledgers and both diagnostics.
type DiagRow = (
    u64,
    Vec<f64>,
    Vec<f64>,
    Vec<f64>,
    Vec<u64>,
    Vec<u64>,
    Vec<f64>,
);

impl DiagnosticsLog {
    pub fn record(&mut self, state: &SchedulerState) {
        self.rows.push((
            state.t,
            state.q_virtual.clone(),
            state.q_inter_virtual.clone(),
            state.q_inter_actual.clone(),
            state.q_actual.clone(),
            state.null_activity.clone(),
            state.deficit.clone(),
        ));
    }

    pub fn to_csv(&self, queues: usize) -> String {
        let mut out = String::from("t");
        for k in 0..queues {
            out.push_str(&format!(
                ",q_{k},q_inter_{k},Q_inter_{k},Q_{k},N_NA_{k},D_{k}"
            ));
        }
        out.push('\n');
        for (t, q, qi, qia, qa, nna, d) in &self.rows {
            out.push_str(&t.to_string());
            for k in 0..queues {
                out.push_str(&format!(
                    ",{},{},{},{},{},{}",
                    q[k], qi[k], qia[k], qa[k], nna[k], d[k]
                ));
            }
            out.push('\n');
        }
        out
    }
}
