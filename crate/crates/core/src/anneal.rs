//! Simulated annealing with Metropolis acceptance and geometric cooling.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    pub initial_temperature: f64,
    pub cooling_rate: f64,
    pub iterations: u32,
    /// Probability that a layout move translates rather than rotates.
    pub translate_probability: f64,
    /// Translation step deviation as a fraction of the room diagonal.
    pub step_fraction: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            initial_temperature: 1000.0,
            cooling_rate: 0.95,
            iterations: 1000,
            translate_probability: 0.8,
            step_fraction: 0.05,
        }
    }
}

impl SaParams {
    pub fn is_valid(&self) -> bool {
        self.initial_temperature.is_finite()
            && self.initial_temperature > 0.0
            && self.cooling_rate > 0.0
            && self.cooling_rate < 1.0
            && (0.0..=1.0).contains(&self.translate_probability)
            && self.step_fraction >= 0.0
    }
}

/// One row of an annealing trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u32,
    pub temperature: f64,
    pub current: f64,
    pub best: f64,
}

#[derive(Debug, Clone)]
pub struct Annealed<S> {
    pub best: S,
    pub best_energy: f64,
    pub initial_energy: f64,
    pub accepted: u32,
    pub trace: Vec<TraceRow>,
}

/// Metropolis acceptance test for an energy change `delta` at temperature `t`.
pub fn accept<R: Rng + ?Sized>(delta: f64, t: f64, rng: &mut R) -> bool {
    if delta <= 0.0 {
        return true;
    }
    if t <= 0.0 {
        return false;
    }
    rng.random::<f64>() < (-delta / t).exp()
}

/// Minimizes `energy` from `init`. `neighbor` proposes a modified copy of the
/// current state; the best state ever visited is returned.
pub fn anneal<S, R, E, N>(
    init: S,
    params: &SaParams,
    rng: &mut R,
    record_trace: bool,
    mut energy: E,
    mut neighbor: N,
) -> Annealed<S>
where
    S: Clone,
    R: Rng + ?Sized,
    E: FnMut(&S) -> f64,
    N: FnMut(&S, &mut R) -> S,
{
    let initial_energy = energy(&init);
    let mut current = init.clone();
    let mut current_e = initial_energy;
    let mut best = init;
    let mut best_e = initial_energy;
    let mut t = params.initial_temperature;
    let mut accepted = 0;
    let mut trace = Vec::new();
    for iteration in 0..params.iterations {
        let cand = neighbor(&current, rng);
        let e = energy(&cand);
        if accept(e - current_e, t, rng) {
            current = cand;
            current_e = e;
            accepted += 1;
            if current_e < best_e {
                best = current.clone();
                best_e = current_e;
            }
        }
        if record_trace {
            trace.push(TraceRow { iteration, temperature: t, current: current_e, best: best_e });
        }
        t *= params.cooling_rate;
    }
    Annealed { best, best_energy: best_e, initial_energy, accepted, trace }
}
