//! Discrete-event simulation of `n` FCFS servers with cancel-on-start redundancy.
//!
//! Each arriving job is copied to the `r` servers its policy selects. If
//! one of them is idle the job starts there immediately (lowest index
//! wins) and no copies are queued. Otherwise a copy joins every selected
//! queue, and the first copy to reach a server removes all the others at
//! zero cost. Service times are exponential with rate `mu1` for short jobs
//! and `mu1 / q` for long ones; a job is long with probability `p`.
//!
//! Every replication draws its arrival process (inter-arrival gaps, job
//! classes and service requirements) from a stream that depends only on
//! the seed and replication index, so runs that differ only in the policy
//! see the same jobs.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use smallvec::SmallVec;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};
use crate::policies::{PolicyKind, PolicyState};
use crate::rng::{stream_rng, ARRIVAL_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobClass {
    Short,
    Long,
}

/// Exponential service duration for a job of `class`: mean `1/mu1` when
/// short, `q/mu1` when long. Always strictly positive.
pub fn sample_service<R: Rng + ?Sized>(class: JobClass, mu1: f64, q: f64, rng: &mut R) -> f64 {
    let mean = match class {
        JobClass::Short => 1.0 / mu1,
        JobClass::Long => q / mu1,
    };
    loop {
        let e: f64 = rng.sample(Exp1);
        if e > 0.0 {
            return e * mean;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub r: usize,
    pub policy: PolicyKind,
    /// Service rate of short jobs.
    pub mu1: f64,
    /// Ratio of long to short mean service time.
    pub q: f64,
    /// Probability that a job is long.
    pub p: f64,
    /// Poisson arrival rate.
    pub lambda: f64,
    pub seed: u64,
    pub warmup_jobs: usize,
    pub measured_jobs: usize,
    pub replications: usize,
    /// Optional cap on simulated time; exceeding it before every measured
    /// job has finished is a [`Error::SimulationUnderrun`].
    pub horizon: Option<f64>,
}

impl SimConfig {
    pub const DEFAULT_WARMUP: usize = 10_000;
    pub const DEFAULT_MEASURED: usize = 100_000;
    pub const DEFAULT_REPLICATIONS: usize = 20;

    pub fn new(
        policy: PolicyKind,
        n: usize,
        r: usize,
        mu1: f64,
        q: f64,
        p: f64,
        lambda: f64,
    ) -> Self {
        Self {
            n,
            r,
            policy,
            mu1,
            q,
            p,
            lambda,
            seed: 0,
            warmup_jobs: Self::DEFAULT_WARMUP,
            measured_jobs: Self::DEFAULT_MEASURED,
            replications: Self::DEFAULT_REPLICATIONS,
            horizon: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.n {
            return Err(invalid(format!(
                "need 1 <= r <= n, got n = {}, r = {}",
                self.n, self.r
            )));
        }
        if !(self.mu1 > 0.0 && self.mu1.is_finite()) {
            return Err(invalid(format!("mu1 must be positive, got {}", self.mu1)));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(invalid(format!("q must be at least 1, got {}", self.q)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.measured_jobs == 0 {
            return Err(invalid("need at least one measured job"));
        }
        if self.replications == 0 {
            return Err(invalid("need at least one replication"));
        }
        Ok(())
    }

    /// Mean service requirement of one job.
    pub fn mean_service(&self) -> f64 {
        ((1.0 - self.p) + self.p * self.q) / self.mu1
    }

    /// Offered load per server, `λ E[S] / n`. Only one copy of each job is
    /// ever served, so this is the true utilization.
    pub fn rho(&self) -> f64 {
        self.lambda * self.mean_service() / self.n as f64
    }

    /// Arrival rate giving utilization `rho`.
    pub fn lambda_for_rho(&self, rho: f64) -> f64 {
        rho * self.n as f64 / self.mean_service()
    }
}

pub type JobId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: JobId,
    pub arrival_time: f64,
    pub class: JobClass,
    /// Service requirement, drawn when the job is created.
    pub service_time: f64,
    /// Servers still holding a waiting copy; emptied when service starts.
    pub copy_locations: SmallVec<[usize; 8]>,
    pub start_time: Option<f64>,
    pub server: Option<usize>,
    pub completion_time: Option<f64>,
}

impl Job {
    pub fn new(id: JobId, arrival_time: f64, class: JobClass, service_time: f64) -> Self {
        Self {
            id,
            arrival_time,
            class,
            service_time,
            copy_locations: SmallVec::new(),
            start_time: None,
            server: None,
            completion_time: None,
        }
    }

    pub fn queuing_time(&self) -> Option<f64> {
        self.start_time.map(|s| s - self.arrival_time)
    }

    pub fn sojourn_time(&self) -> Option<f64> {
        self.completion_time.map(|c| c - self.arrival_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    Departure(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Default)]
struct Server {
    in_service: Option<JobId>,
    // Copies are removed lazily: entries whose job already started are
    // skipped when they reach the head. `live` counts the rest.
    queue: VecDeque<JobId>,
    live: usize,
}

/// Per-replication measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStats {
    pub mean_queuing_time: f64,
    pub mean_sojourn_time: f64,
    /// Time-average number of jobs in the system over the measurement window.
    pub mean_jobs_in_system: f64,
    pub jobs: usize,
    /// Fraction of measured jobs that found an idle selected server.
    pub immediate_fraction: f64,
}

/// One replication of the queueing system.
pub struct Engine {
    mu1: f64,
    q: f64,
    p: f64,
    lambda: f64,
    warmup: usize,
    measured: usize,
    horizon: Option<f64>,
    clock: f64,
    seq: u64,
    events: BinaryHeap<Event>,
    servers: Vec<Server>,
    jobs: Vec<Job>,
    policy: PolicyState,
    arrivals: ChaCha8Rng,
    in_system: usize,
    window: Option<(f64, Option<f64>)>,
    area: f64,
    measured_done: usize,
}

impl Engine {
    /// Engine for replication `replication` of `cfg`, seeded with `cfg.seed + replication`.
    /// No arrival is scheduled until [`Engine::start`].
    pub fn new(cfg: &SimConfig, replication: usize) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed.wrapping_add(replication as u64);
        Ok(Self {
            mu1: cfg.mu1,
            q: cfg.q,
            p: cfg.p,
            lambda: cfg.lambda,
            warmup: cfg.warmup_jobs,
            measured: cfg.measured_jobs,
            horizon: cfg.horizon,
            clock: 0.0,
            seq: 0,
            events: BinaryHeap::new(),
            servers: vec![Server::default(); cfg.n],
            jobs: Vec::with_capacity(cfg.warmup_jobs + cfg.measured_jobs),
            policy: PolicyState::new(cfg.policy, cfg.n, cfg.r, seed)?,
            arrivals: stream_rng(seed, ARRIVAL_STREAM),
            in_system: 0,
            window: None,
            area: 0.0,
            measured_done: 0,
        })
    }

    fn total_jobs(&self) -> usize {
        self.warmup + self.measured
    }

    fn is_measured(&self, id: JobId) -> bool {
        id >= self.warmup && id < self.total_jobs()
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn job(&self, id: JobId) -> &Job {
        &self.jobs[id]
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    /// Copies waiting at `server`, excluding cancelled ones.
    pub fn queue_len(&self, server: usize) -> usize {
        self.servers[server].live
    }

    pub fn is_busy(&self, server: usize) -> bool {
        self.servers[server].in_service.is_some()
    }

    pub fn in_service(&self, server: usize) -> Option<JobId> {
        self.servers[server].in_service
    }

    pub fn jobs_in_system(&self) -> usize {
        self.in_system
    }

    pub fn pending_events(&self) -> usize {
        self.events.len()
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.events.push(Event { time, seq, kind });
    }

    pub fn start(&mut self) {
        let gap: f64 = self.arrivals.sample(Exp1);
        self.schedule(self.clock + gap / self.lambda, EventKind::Arrival);
    }

    /// Draws the next job's class and service requirement from the arrival stream.
    pub fn create_job(&mut self) -> Job {
        let class = if self.arrivals.random::<f64>() < self.p {
            JobClass::Long
        } else {
            JobClass::Short
        };
        let service = sample_service(class, self.mu1, self.q, &mut self.arrivals);
        Job::new(self.jobs.len(), self.clock, class, service)
    }

    /// Dispatches `job` to the policy's next selection and schedules the
    /// following arrival while more jobs are due.
    pub fn handle_arrival(&mut self, job: Job) -> JobId {
        let selection = self.policy.next_selection();
        let id = self.admit(job, &selection);
        if self.jobs.len() < self.total_jobs() {
            let gap: f64 = self.arrivals.sample(Exp1);
            self.schedule(self.clock + gap / self.lambda, EventKind::Arrival);
        }
        id
    }

    /// Places `job` on `selection` at the current clock: straight into
    /// service on the lowest-indexed idle selected server, or one copy
    /// per selected queue when all are busy.
    pub fn admit(&mut self, mut job: Job, selection: &[usize]) -> JobId {
        let id = self.jobs.len();
        job.id = id;
        job.arrival_time = self.clock;
        self.in_system += 1;
        let idle = selection
            .iter()
            .copied()
            .filter(|&s| self.servers[s].in_service.is_none())
            .min();
        self.jobs.push(job);
        match idle {
            Some(server) => self.begin_service(id, server),
            None => {
                for &s in selection {
                    let srv = &mut self.servers[s];
                    srv.queue.push_back(id);
                    srv.live += 1;
                }
                self.jobs[id].copy_locations = selection.iter().copied().collect();
            }
        }
        id
    }

    fn begin_service(&mut self, id: JobId, server: usize) {
        let locations = std::mem::take(&mut self.jobs[id].copy_locations);
        for s in locations {
            self.servers[s].live -= 1;
        }
        let job = &mut self.jobs[id];
        job.start_time = Some(self.clock);
        job.server = Some(server);
        let done = self.clock + job.service_time;
        self.servers[server].in_service = Some(id);
        self.schedule(done, EventKind::Departure(server));
    }

    /// Completes the job in service at `server` and starts the first
    /// still-waiting copy in its queue, cancelling that job's other copies.
    pub fn handle_departure(&mut self, server: usize) {
        let finished = self.servers[server]
            .in_service
            .take()
            .expect("departure from a server with no job in service");
        self.jobs[finished].completion_time = Some(self.clock);
        self.in_system -= 1;
        if self.is_measured(finished) {
            self.measured_done += 1;
        }
        while let Some(next) = self.servers[server].queue.pop_front() {
            let job = &self.jobs[next];
            if job.start_time.is_none() {
                assert!(
                    job.copy_locations.contains(&server),
                    "queued copy without a job record"
                );
                self.begin_service(next, server);
                return;
            }
        }
    }

    /// Processes the next event. Returns `false` when none is pending.
    pub fn step(&mut self) -> bool {
        let Some(ev) = self.events.pop() else {
            return false;
        };
        if let Some((_, None)) = self.window {
            self.area += self.in_system as f64 * (ev.time - self.clock);
        }
        self.clock = ev.time;
        match ev.kind {
            EventKind::Arrival => {
                let job = self.create_job();
                let id = job.id;
                if id == self.warmup {
                    self.window = Some((self.clock, None));
                }
                if id + 1 == self.total_jobs() {
                    if let Some((start, None)) = self.window {
                        self.window = Some((start, Some(self.clock)));
                    }
                }
                self.handle_arrival(job);
            }
            EventKind::Departure(server) => self.handle_departure(server),
        }
        true
    }

    /// Runs until every measured job has completed.
    pub fn run(mut self) -> Result<ReplicationStats> {
        self.start();
        while self.measured_done < self.measured {
            if let (Some(limit), Some(next)) = (self.horizon, self.events.peek()) {
                if next.time > limit {
                    return Err(self.underrun(format!("the time horizon {limit}")));
                }
            }
            if !self.step() {
                return Err(self.underrun("the event queue emptied".to_string()));
            }
        }
        Ok(self.summarize())
    }

    fn underrun(&self, reason: String) -> Error {
        let started = self
            .jobs
            .iter()
            .filter(|j| self.is_measured(j.id) && j.start_time.is_some())
            .count();
        Error::SimulationUnderrun {
            started,
            wanted: self.measured,
            reason,
        }
    }

    fn summarize(&self) -> ReplicationStats {
        let measured = &self.jobs[self.warmup..self.total_jobs()];
        let m = measured.len() as f64;
        let mut wq = 0.0;
        let mut sojourn = 0.0;
        let mut immediate = 0usize;
        for job in measured {
            let w = job.queuing_time().expect("measured job started");
            if w == 0.0 {
                immediate += 1;
            }
            wq += w;
            sojourn += job.sojourn_time().expect("measured job completed");
        }
        let l = match self.window {
            Some((start, Some(end))) if end > start => self.area / (end - start),
            _ => f64::NAN,
        };
        ReplicationStats {
            mean_queuing_time: wq / m,
            mean_sojourn_time: sojourn / m,
            mean_jobs_in_system: l,
            jobs: measured.len(),
            immediate_fraction: immediate as f64 / m,
        }
    }
}

/// Across-replication summary of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub policy: PolicyKind,
    pub n: usize,
    pub r: usize,
    pub mu1: f64,
    pub q: f64,
    pub p: f64,
    pub lambda: f64,
    pub rho: f64,
    pub seed: u64,
    pub mean_queuing_time: f64,
    /// Half-width of the 95% t-interval across replications (infinite with one replication).
    pub ci_halfwidth: f64,
    pub mean_sojourn_time: f64,
    pub mean_jobs_in_system: f64,
    /// `|L - λ W| / L`.
    pub little_residual: f64,
    pub replications: Vec<ReplicationStats>,
}

impl SimMetrics {
    pub fn ci_low(&self) -> f64 {
        self.mean_queuing_time - self.ci_halfwidth
    }

    pub fn ci_high(&self) -> f64 {
        self.mean_queuing_time + self.ci_halfwidth
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Half-width of the two-sided 95% Student-t interval for the mean of `xs`.
pub fn t_halfwidth_95(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::INFINITY;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    let df = (xs.len() - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, df)
        .expect("df >= 1")
        .inverse_cdf(0.975);
    t * (var / xs.len() as f64).sqrt()
}

/// Runs every replication of `cfg` and aggregates them. Replications run
/// in parallel but are reduced in index order, so results are bit-identical.
pub fn run_sim(cfg: &SimConfig) -> Result<SimMetrics> {
    cfg.validate()?;
    let reps: Vec<ReplicationStats> = (0..cfg.replications)
        .into_par_iter()
        .map(|j| Engine::new(cfg, j)?.run())
        .collect::<Result<_>>()?;
    let wq: Vec<f64> = reps.iter().map(|s| s.mean_queuing_time).collect();
    let sojourn: Vec<f64> = reps.iter().map(|s| s.mean_sojourn_time).collect();
    let l: Vec<f64> = reps.iter().map(|s| s.mean_jobs_in_system).collect();
    let mean_l = mean(&l);
    let mean_sojourn = mean(&sojourn);
    Ok(SimMetrics {
        policy: cfg.policy,
        n: cfg.n,
        r: cfg.r,
        mu1: cfg.mu1,
        q: cfg.q,
        p: cfg.p,
        lambda: cfg.lambda,
        rho: cfg.rho(),
        seed: cfg.seed,
        mean_queuing_time: mean(&wq),
        ci_halfwidth: t_halfwidth_95(&wq),
        mean_sojourn_time: mean_sojourn,
        mean_jobs_in_system: mean_l,
        little_residual: (mean_l - cfg.lambda * mean_sojourn).abs() / mean_l,
        replications: reps,
    })
}

/// One `(policy, λ)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: PolicyKind,
    pub lambda: f64,
    pub result: Result<SimMetrics>,
}

/// Runs `cfg` for every policy and arrival rate. All cells share the
/// replication seeds, hence the same arrival and service draws.
pub fn sweep(cfg: &SimConfig, policies: &[PolicyKind], lambdas: &[f64]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(policies.len() * lambdas.len());
    for &lambda in lambdas {
        for &policy in policies {
            let cell = SimConfig {
                policy,
                lambda,
                ..cfg.clone()
            };
            rows.push(SweepRow {
                policy,
                lambda,
                result: run_sim(&cell),
            });
        }
    }
    rows
}

/// Parameter tuples `(n, r, mu1, q, p)` of the reference queueing experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig5, Preset::Fig6, Preset::Fig7, Preset::Fig8];

    /// Utilization grid of the low-load panel.
    pub const LOW_RHO: (f64, f64) = (0.30, 0.60);
    /// Utilization grid of the high-load panel.
    pub const HIGH_RHO: (f64, f64) = (0.65, 0.95);
    pub const GRID_POINTS: usize = 8;

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
        }
    }

    /// `(n, r, mu1, q, p)`. fig8 defaults to `q = 50`; `q = 15` is the
    /// other common setting and callers can substitute it.
    pub fn tuple(self) -> (usize, usize, f64, f64, f64) {
        match self {
            Preset::Fig5 => (13, 4, 10.0, 10.0, 0.1),
            Preset::Fig6 => (21, 5, 10.0, 10.0, 0.1),
            Preset::Fig7 => (21, 5, 10.0, 50.0, 0.1),
            Preset::Fig8 => (21, 5, 10.0, 50.0, 0.5),
        }
    }

    pub fn config(self, policy: PolicyKind) -> SimConfig {
        let (n, r, mu1, q, p) = self.tuple();
        SimConfig::new(policy, n, r, mu1, q, p, 1.0)
    }

    /// Arrival rates of the low- and high-load panels for `cfg`.
    pub fn lambda_grids(cfg: &SimConfig) -> (Vec<f64>, Vec<f64>) {
        let grid = |(lo, hi): (f64, f64)| -> Vec<f64> {
            let steps = (Self::GRID_POINTS - 1) as f64;
            (0..Self::GRID_POINTS)
                .map(|i| cfg.lambda_for_rho(lo + (hi - lo) * i as f64 / steps))
                .collect()
        };
        (grid(Self::LOW_RHO), grid(Self::HIGH_RHO))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset {s:?} (expected fig5, fig6, fig7 or fig8)"))
    }
}
