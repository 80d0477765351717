//! Time stepping with a monolithic Newton-Raphson solve per step.

use log::{debug, trace};

use crate::deposition::constraints::{Dof, DofMap, NDOF};
use crate::deposition::mesh::{build_mesh, BuildPlan, EdgePoint, Mesh};
use crate::deposition::schedule::{make_schedule, ActivationSchedule, Phase};
use crate::deposition::activate;
use crate::error::{Error, Result};
use crate::fem::assembly::{assemble, StepContext};
use crate::fem::element::quadrature_stresses;
use crate::fem::snapshot::Snapshot;
use crate::fem::state::SimState;
use crate::linalg::{BandLu, BandMatrix};
use crate::material::{MaterialCache, MaterialParams};
use crate::sensitivity::{propagate_step, DesignVariable, SensitivityState};

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Relative residual tolerance against the first iteration of each step.
    pub tol: f64,
    pub abs_floor: f64,
    pub max_iterations: usize,
    /// Track sensitivities with respect to this variable.
    pub sensitivity: Option<DesignVariable>,
    /// Record a field snapshot every this many steps (and at the end).
    pub snapshot_interval: Option<usize>,
    /// Compute the largest quadrature stress of each element at its birth.
    pub check_birth_stress: bool,
    /// Keep the factored tangent across iterations and steps while the active
    /// mesh and step size are unchanged, refactoring when contraction stalls.
    /// Ignored when sensitivities are tracked.
    pub reuse_factorization: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            tol: 1e-8,
            abs_floor: 1e-12,
            max_iterations: 25,
            sensitivity: None,
            snapshot_interval: None,
            check_birth_stress: false,
            reuse_factorization: false,
        }
    }
}

/// Outcome of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub phase: Phase,
    pub iterations: usize,
    /// Momentum and energy residual norms per iteration.
    pub residuals: Vec<(f64, f64)>,
    /// Largest stress component at the birth of the element activated this step.
    pub birth_stress: Option<f64>,
}

/// Aggregate statistics of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub end_time: f64,
    pub newton_iterations: usize,
    pub max_iterations_per_step: usize,
    pub max_birth_stress: f64,
    pub max_final_temperature_deviation: f64,
    /// Full factorizations of the tangent.
    pub factorizations: usize,
    /// Factorizations that only redid the rows touched by a birth.
    pub partial_factorizations: usize,
}

/// A print simulation that can be stepped or run to completion.
pub struct Simulation {
    pub plan: BuildPlan,
    pub mesh: Mesh,
    pub schedule: ActivationSchedule,
    pub params: MaterialParams,
    pub options: SimOptions,
    pub state: SimState,
    pub sensitivity: Option<SensitivityState>,
    pub snapshots: Vec<Snapshot>,
    pub summary: RunSummary,
    material: MaterialCache,
    dofs: DofMap,
    edges: Vec<Vec<EdgePoint>>,
    bandwidth: usize,
    topology: u64,
    tail_from: Option<usize>,
    cached: Option<CachedFactor>,
}

struct CachedFactor {
    lu: BandLu,
    topology: u64,
    dt: f64,
}

impl Simulation {
    pub fn new(plan: &BuildPlan, params: &MaterialParams, options: SimOptions) -> Result<Self> {
        params.validate()?;
        let mesh = build_mesh(plan)?;
        let schedule = make_schedule(plan, &mesh)?;
        let state = SimState::new(mesh.n_nodes(), mesh.n_elements());
        let sensitivity = match options.sensitivity {
            Some(var) => Some(SensitivityState::new(var, mesh.n_nodes(), mesh.n_elements())?),
            None => None,
        };
        let dofs = DofMap::for_mesh(&mesh, &state.node_active, params.theta_inf)?;
        Ok(Simulation {
            plan: plan.clone(),
            edges: vec![Vec::new(); mesh.n_elements()],
            mesh,
            schedule,
            params: params.clone(),
            options,
            state,
            sensitivity,
            snapshots: Vec::new(),
            summary: RunSummary::default(),
            material: MaterialCache::new(params),
            dofs,
            bandwidth: 0,
            topology: 0,
            tail_from: None,
            cached: None,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.schedule.n_steps()
    }

    /// Rebuilds the equation numbering and convection points after a birth.
    ///
    /// When the old numbering survives as a prefix, records the first
    /// equation whose row changed so a cached factorization can be extended.
    fn refresh_topology(&mut self, born: usize) -> Result<()> {
        let dofs = DofMap::for_mesh(&self.mesh, &self.state.node_active, self.params.theta_inf)?;
        let n_active = self.state.n_active;
        let mut edges = vec![Vec::new(); self.mesh.n_elements()];
        for seg in self.mesh.exposed_segments(n_active) {
            let el = &self.mesh.elements[seg.element];
            edges[seg.element].extend(seg.gauss_points(el));
        }
        let prefix = self.dofs.dofs.iter().zip(&dofs.dofs).all(|(o, nw)| {
            (0..NDOF).all(|c| !matches!(o[c], Dof::Free(_)) || o[c] == nw[c])
        });
        self.tail_from = prefix.then(|| {
            let mut first = dofs.n_eq;
            let mut buf = Vec::new();
            let changed = (0..n_active).filter(|&e| e == born || edges[e] != self.edges[e]);
            for e in changed {
                for &nd in &self.mesh.elements[e].nodes {
                    for c in 0..NDOF {
                        dofs.expand(nd, c, &mut buf);
                        first = buf.iter().fold(first, |m, &(eq, _)| m.min(eq));
                    }
                }
            }
            first
        });
        self.bandwidth = dofs.bandwidth(self.mesh.elements[..n_active].iter().map(|e| &e.nodes));
        self.dofs = dofs;
        self.edges = edges;
        self.topology += 1;
        Ok(())
    }

    /// Largest quadrature stress component of element `e` in the current state.
    pub fn element_stress_max(&self, e: usize, dt: f64) -> Result<f64> {
        let ctx = self.context(&self.state, dt);
        let st = ctx.element_state(&self.state, e);
        Ok(quadrature_stresses(&st, &self.params, &self.material)?
            .iter()
            .fold(0.0f64, |m, s| m.max(s.amax())))
    }

    fn context<'a>(&'a self, prev: &'a SimState, dt: f64) -> StepContext<'a> {
        StepContext {
            mesh: &self.mesh,
            params: &self.params,
            material: &self.material,
            dofs: &self.dofs,
            edges: &self.edges,
            prev,
            dt,
        }
    }

    /// Activates this step's element and solves for the end-of-step state.
    pub fn advance_step(&mut self) -> Result<StepReport> {
        if self.is_finished() {
            return Err(Error::Internal("simulation already finished".into()));
        }
        let n = self.state.step + 1;
        let step = *self.schedule.step(n);
        let dt = step.dt;
        let mut birth_stress = None;
        if let Some(e) = step.activate {
            let was_active = self.mesh.elements[e].nodes.map(|nd| self.state.node_active[nd]);
            activate(e, &mut self.state, &self.mesh, &self.params)?;
            if let Some(s) = self.sensitivity.as_mut() {
                s.on_activate(&self.mesh, e, was_active)?;
            }
            self.refresh_topology(e)?;
            if self.options.check_birth_stress {
                let s = self.element_stress_max(e, dt)?;
                self.summary.max_birth_stress = self.summary.max_birth_stress.max(s);
                birth_stress = Some(s);
            }
        }
        if self.state.n_active == 0 {
            return Err(Error::Schedule(format!("step {n} has no active material")));
        }

        let prev = self.state.clone();
        let mut cur = self.state.clone();
        let n_eq = self.dofs.n_eq;
        let bw = self.bandwidth;
        let reuse = self.options.reuse_factorization && self.sensitivity.is_none();
        let mut cached = self.cached.take().filter(|c| {
            reuse
                && c.dt == dt
                && (c.topology == self.topology
                    || (c.topology + 1 == self.topology && self.tail_from.is_some()))
        });
        // Rows from this equation on must be refactored before the cache is used.
        let mut pending_tail = match &cached {
            Some(c) if c.topology != self.topology => self.tail_from,
            _ => None,
        };
        let mut lu: Option<BandLu> = None;
        let mut history = Vec::new();
        let mut reference = [0.0; 2];
        let mut converged = false;
        let mut last_ratio = 0.0;
        let (mut full, mut partial) = (0, 0);
        let opts = &self.options;
        {
            let ctx = self.context(&prev, dt);
            for it in 0..=opts.max_iterations {
                let mut k: Option<BandMatrix> = None;
                let res = if !reuse || cached.is_none() || pending_tail.is_some() {
                    let mut m = BandMatrix::zeros(n_eq, bw, bw);
                    let r = assemble(&ctx, &cur, Some(&mut m))?;
                    k = Some(m);
                    r
                } else {
                    assemble(&ctx, &cur, None)?
                };
                let norms = res.norms();
                if it == 0 {
                    reference = norms;
                }
                let scaled = |nm: [f64; 2]| {
                    (0..2)
                        .map(|i| if reference[i] > 0.0 { nm[i] / reference[i] } else { 0.0 })
                        .fold(0.0, f64::max)
                };
                // The first update moves from the predictor, so contraction is
                // only judged between corrected iterates.
                if let (true, Some(&(a, b))) = (history.len() >= 2, history.last()) {
                    let before = scaled([a, b]);
                    last_ratio = if before > 0.0 { scaled(norms) / before } else { 0.0 };
                }
                history.push((norms[0], norms[1]));
                trace!("step {n} iteration {it}: residuals {norms:?}");
                let done = (0..2).all(|i| {
                    let floor = opts.abs_floor.max(opts.abs_floor * res.magnitude[i]);
                    norms[i] <= (opts.tol * reference[i]).max(floor)
                });
                if done {
                    converged = true;
                    if lu.is_none() && self.sensitivity.is_some() {
                        let k = k.expect("tangent assembled without reuse");
                        lu = Some(k.factor().map_err(|eq| Error::SingularSystem { step: n, equation: eq })?);
                        full += 1;
                    }
                    break;
                }
                if it == opts.max_iterations {
                    break;
                }
                let mut dx: Vec<f64> = res.r.iter().map(|v| -v).collect();
                if k.is_none() && last_ratio > 0.1 {
                    let mut m = BandMatrix::zeros(n_eq, bw, bw);
                    assemble(&ctx, &cur, Some(&mut m))?;
                    k = Some(m);
                }
                if let (Some(i0), Some(kt)) = (pending_tail.take(), k.as_ref()) {
                    let old = cached.take().expect("cached factor");
                    if let Ok(f) = old.lu.refactor_tail(kt, i0) {
                        partial += 1;
                        cached = Some(CachedFactor { lu: f, topology: self.topology, dt });
                        k = None;
                    }
                }
                if let Some(k) = k {
                    full += 1;
                    let f = k
                        .factor()
                        .map_err(|eq| Error::SingularSystem { step: n, equation: eq })?;
                    f.solve_in_place(&mut dx);
                    if reuse {
                        cached = Some(CachedFactor { lu: f, topology: self.topology, dt });
                    } else {
                        lu = Some(f);
                    }
                } else {
                    cached.as_ref().expect("cached factor").lu.solve_in_place(&mut dx);
                }
                if dx.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NoConvergence {
                        step: n,
                        iterations: it + 1,
                        history,
                    });
                }
                self.dofs.scatter_add(&dx, &mut cur.u, &mut cur.theta);
            }
        }
        self.cached = cached;
        self.summary.factorizations += full;
        self.summary.partial_factorizations += partial;
        if !converged {
            return Err(Error::NoConvergence {
                step: n,
                iterations: history.len() - 1,
                history,
            });
        }

        for nd in 0..cur.u.len() {
            if !cur.node_active[nd] {
                continue;
            }
            for c in 0..2 {
                let du = cur.u[nd][c] - prev.u[nd][c];
                cur.v[nd][c] = 2.0 / dt * du - prev.v[nd][c];
                cur.a[nd][c] = 4.0 / (dt * dt) * (du - dt * prev.v[nd][c]) - prev.a[nd][c];
            }
            cur.theta_dot[nd] = (cur.theta[nd] - prev.theta[nd]) / dt;
        }

        if let Some(mut sens) = self.sensitivity.take() {
            let ctx = self.context(&prev, dt);
            let lu = lu.as_ref().expect("factorization kept for sensitivities");
            let out = propagate_step(&mut sens, &ctx, &cur, lu);
            self.sensitivity = Some(sens);
            out?;
        }

        cur.t = prev.t + dt;
        cur.step = n;
        self.state = cur;
        let iterations = history.len() - 1;
        self.summary.steps = n;
        self.summary.end_time = self.state.t;
        self.summary.newton_iterations += iterations;
        self.summary.max_iterations_per_step = self.summary.max_iterations_per_step.max(iterations);
        if let Some(k) = self.options.snapshot_interval {
            if k > 0 && (n % k == 0 || self.is_finished()) {
                self.snapshots.push(Snapshot::capture(&self.mesh, &self.state));
            }
        }
        debug!("step {n} ({:?}) t = {:.4} converged in {iterations} iterations", step.phase, self.state.t);
        Ok(StepReport {
            step: n,
            t: self.state.t,
            phase: step.phase,
            iterations,
            residuals: history,
            birth_stress,
        })
    }

    /// Runs all remaining steps.
    pub fn run(&mut self) -> Result<&RunSummary> {
        while !self.is_finished() {
            self.advance_step()?;
        }
        self.summary.max_final_temperature_deviation =
            self.state.max_temperature_deviation(self.params.theta_inf);
        Ok(&self.summary)
    }
}

/// Runs a full print and returns the finished simulation.
pub fn run_simulation(plan: &BuildPlan, params: &MaterialParams, options: SimOptions) -> Result<Simulation> {
    let mut sim = Simulation::new(plan, params, options)?;
    sim.run()?;
    Ok(sim)
}
