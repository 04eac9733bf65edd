#![allow(dead_code)]

use gridcascade::network::PowerNetwork;
use rand::Rng;

pub struct RandomCase {
    pub kinds: Vec<char>,
    pub injections: Vec<f64>,
    /// (from, to, reactance, threshold) with one-based bus ids.
    pub branches: Vec<(usize, usize, f64, f64)>,
}

impl RandomCase {
    pub fn to_json(&self) -> String {
        let buses: Vec<String> = self
            .kinds
            .iter()
            .zip(&self.injections)
            .enumerate()
            .map(|(i, (k, p))| format!(r#"{{"id":{},"type":"{}","injection":{:?}}}"#, i + 1, k, p))
            .collect();
        let branches: Vec<String> = self
            .branches
            .iter()
            .enumerate()
            .map(|(l, (f, t, x, c))| {
                format!(
                    r#"{{"id":{},"from":{},"to":{},"reactance":{:?},"threshold":{:?}}}"#,
                    l + 1,
                    f,
                    t,
                    x,
                    c
                )
            })
            .collect();
        format!(
            r#"{{"base_mva":100,"buses":[{}],"branches":[{}]}}"#,
            buses.join(","),
            branches.join(",")
        )
    }

    pub fn network(&self) -> PowerNetwork {
        PowerNetwork::from_json_str(&self.to_json()).expect("generated case is valid")
    }
}

/// Connected graph: a random spanning tree plus a few extra edges. Bus 1 is
/// the reference, roughly a third of the rest are generators, and the
/// injections sum to zero.
pub fn random_connected<R: Rng>(rng: &mut R, buses: usize, extra: usize) -> RandomCase {
    let mut kinds = vec!['L'; buses];
    kinds[0] = 'R';
    for k in kinds.iter_mut().skip(1) {
        if rng.gen_bool(0.35) {
            *k = 'G';
        }
    }
    let mut injections: Vec<f64> = kinds
        .iter()
        .map(|k| match k {
            'L' => -rng.gen_range(0.0..1.5),
            _ => rng.gen_range(0.0..2.0),
        })
        .collect();
    let total: f64 = injections.iter().sum();
    injections[0] -= total;

    let mut pairs = std::collections::HashSet::new();
    let mut branches = Vec::new();
    for b in 2..=buses {
        let a = rng.gen_range(1..b);
        pairs.insert((a, b));
        branches.push((a, b));
    }
    let mut tries = 0;
    while branches.len() < buses - 1 + extra && tries < 100 {
        tries += 1;
        let a = rng.gen_range(1..=buses);
        let b = rng.gen_range(1..=buses);
        if a == b || pairs.contains(&(a.min(b), a.max(b))) {
            continue;
        }
        pairs.insert((a.min(b), a.max(b)));
        branches.push((a, b));
    }
    let branches = branches
        .into_iter()
        .map(|(a, b)| {
            let (f, t) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            (f, t, rng.gen_range(0.03..0.4), rng.gen_range(0.5..3.0))
        })
        .collect();
    RandomCase {
        kinds,
        injections,
        branches,
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}
