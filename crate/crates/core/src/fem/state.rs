//! Nodal fields and history variables of a running simulation.

/// Values frozen when an element is born.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryVars {
    /// Displacement of each element corner at birth.
    pub u_his: Vec<[[f64; 2]; 4]>,
    /// Temperature of each element corner at birth.
    pub theta_his: Vec<[f64; 4]>,
}

impl HistoryVars {
    pub fn new(n_elements: usize) -> Self {
        HistoryVars {
            u_his: vec![[[0.0; 2]; 4]; n_elements],
            theta_his: vec![[0.0; 4]; n_elements],
        }
    }

    /// Element referential temperature as the mean of its corner values at birth.
    pub fn theta_ref(&self, element: usize) -> f64 {
        self.theta_his[element].iter().sum::<f64>() / 4.0
    }
}

/// Full nodal state; entries of inactive nodes are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub u: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
    pub a: Vec<[f64; 2]>,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub t: f64,
    /// Index of the last completed step (0 before the first).
    pub step: usize,
    pub node_active: Vec<bool>,
    /// Active elements form a prefix of the print order.
    pub n_active: usize,
    pub history: HistoryVars,
}

impl SimState {
    pub fn new(n_nodes: usize, n_elements: usize) -> Self {
        SimState {
            u: vec![[0.0; 2]; n_nodes],
            v: vec![[0.0; 2]; n_nodes],
            a: vec![[0.0; 2]; n_nodes],
            theta: vec![0.0; n_nodes],
            theta_dot: vec![0.0; n_nodes],
            t: 0.0,
            step: 0,
            node_active: vec![false; n_nodes],
            n_active: 0,
            history: HistoryVars::new(n_elements),
        }
    }

    pub fn n_active_nodes(&self) -> usize {
        self.node_active.iter().filter(|&&a| a).count()
    }

    /// Largest |theta - reference| over active nodes.
    pub fn max_temperature_deviation(&self, reference: f64) -> f64 {
        self.theta
            .iter()
            .zip(&self.node_active)
            .filter(|(_, &a)| a)
            .fold(0.0, |m, (t, _)| m.max((t - reference).abs()))
    }
}
