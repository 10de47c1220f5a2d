#![allow(dead_code)]

pub mod oracle;

use distill_core::{Ensemble, Group, Spectrum, Subsystem};
use oracle::RationalQubit;

pub fn qubits(p: [f64; 2], g: [f64; 2], count: u64) -> Ensemble {
    let s = Subsystem::incoherent(Spectrum::from_gibbs_weights(&g, 1.0).unwrap(), p.to_vec()).unwrap();
    Ensemble::identical(s, count).unwrap()
}

pub fn rational_ensemble(systems: &[RationalQubit], beta: f64) -> Ensemble {
    let groups = systems
        .iter()
        .map(|q| Group {
            subsystem: Subsystem::incoherent(Spectrum::from_gibbs_weights(&q.gibbs(), beta).unwrap(), q.populations.to_vec())
                .unwrap(),
            count: 1,
        })
        .collect();
    Ensemble::new(groups).unwrap()
}
