#![allow(dead_code)]

use amopt_core::deposition::mesh::EdgePoint;
use amopt_core::deposition::{build_mesh, BuildPlan, DofMap, Mesh};
use amopt_core::fem::assembly::StepContext;
use amopt_core::fem::SimState;
use amopt_core::material::{MaterialCache, MaterialParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fully active mesh with a random prior state and history.
pub struct Patch {
    pub mesh: Mesh,
    pub params: MaterialParams,
    pub material: MaterialCache,
    pub dofs: DofMap,
    pub edges: Vec<Vec<EdgePoint>>,
    pub prev: SimState,
    pub dt: f64,
}

impl Patch {
    pub fn new(plan: &BuildPlan, seed: u64) -> Patch {
        let params = MaterialParams::default();
        let mesh = build_mesh(plan).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prev = SimState::new(mesh.n_nodes(), mesh.n_elements());
        prev.node_active = vec![true; mesh.n_nodes()];
        prev.n_active = mesh.n_elements();
        for n in 0..mesh.n_nodes() {
            if mesh.nodes[n].level == 0 {
                prev.theta[n] = params.theta_inf;
                continue;
            }
            for c in 0..2 {
                prev.u[n][c] = rng.gen_range(-2e-3..2e-3);
                prev.v[n][c] = rng.gen_range(-0.1..0.1);
                prev.a[n][c] = rng.gen_range(-10.0..10.0);
            }
            prev.theta[n] = rng.gen_range(330.0..500.0);
        }
        for e in 0..mesh.n_elements() {
            for a in 0..4 {
                let n = mesh.elements[e].nodes[a];
                for c in 0..2 {
                    prev.history.u_his[e][a][c] = prev.u[n][c] + rng.gen_range(-1e-3..1e-3);
                }
                prev.history.theta_his[e][a] = rng.gen_range(400.0..500.0);
            }
        }
        let dofs = DofMap::for_mesh(&mesh, &prev.node_active, params.theta_inf).unwrap();
        dofs.enforce(&mut prev.u, &mut prev.theta);
        let mut edges = vec![Vec::new(); mesh.n_elements()];
        for seg in mesh.exposed_segments(mesh.n_elements()) {
            edges[seg.element].extend(seg.gauss_points(&mesh.elements[seg.element]));
        }
        Patch {
            material: MaterialCache::new(&params),
            params,
            mesh,
            dofs,
            edges,
            prev,
            dt: 0.01,
        }
    }

    pub fn ctx(&self) -> StepContext<'_> {
        StepContext {
            mesh: &self.mesh,
            params: &self.params,
            material: &self.material,
            dofs: &self.dofs,
            edges: &self.edges,
            prev: &self.prev,
            dt: self.dt,
        }
    }

    /// Random current iterate near the prior state.
    pub fn perturbed(&self, seed: u64) -> SimState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dx = vec![0.0; self.dofs.n_eq];
        for (i, v) in dx.iter_mut().enumerate() {
            *v = if i % 3 == 2 {
                rng.gen_range(-5.0..5.0)
            } else {
                rng.gen_range(-1e-3..1e-3)
            };
        }
        let mut cur = self.prev.clone();
        self.dofs.scatter_add(&dx, &mut cur.u, &mut cur.theta);
        cur
    }

    /// `state` moved by `h` along equation `eq`.
    pub fn shifted(&self, state: &SimState, eq: usize, h: f64) -> SimState {
        let mut dx = vec![0.0; self.dofs.n_eq];
        dx[eq] = h;
        let mut s = state.clone();
        self.dofs.scatter_add(&dx, &mut s.u, &mut s.theta);
        s
    }
}
