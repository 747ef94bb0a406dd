use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::DesignMatrices;

/// Random design with an intercept in the last column of each equation.
pub fn random_design(seed: u64, n: usize, ki: usize, ka: usize) -> DesignMatrices {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |k: usize| {
        DMatrix::from_fn(n, k, |_, j| {
            if j + 1 == k {
                1.0
            } else {
                rng.sample::<f64, _>(StandardNormal)
            }
        })
    };
    let x_invite = fill(ki);
    let x_accept = fill(ka);
    let z = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.3)))).collect();
    let names = |p: &str, k: usize| {
        (0..k)
            .map(|j| if j + 1 == k { "intercept".to_string() } else { format!("{p}{j}") })
            .collect()
    };
    DesignMatrices {
        x_invite,
        x_accept,
        z,
        cluster_id: (0..n).map(|i| i / 3).collect(),
        cluster_labels: (0..n.div_ceil(3)).map(|c| format!("s{c}")).collect(),
        invite_names: names("i", ki),
        accept_names: names("a", ka),
        dropped_missing: 0,
    }
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn random_vec(seed: u64, k: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws from the partial-observability model. The invite equation uses
/// `(x1, x2, 1)` and the accept equation `(x1, x3, 1)`; clusters have five rows.
pub fn simulate_biprobit(seed: u64, n: usize, beta_i: [f64; 3], beta_a: [f64; 3], rho: f64) -> DesignMatrices {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xi = DMatrix::zeros(n, 3);
    let mut xa = DMatrix::zeros(n, 3);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let (x1, x2, x3) = (normal(&mut rng), normal(&mut rng), normal(&mut rng));
        xi.row_mut(i).copy_from_slice(&[x1, x2, 1.0]);
        xa.row_mut(i).copy_from_slice(&[x1, x3, 1.0]);
        let e1 = normal(&mut rng);
        let e2 = rho * e1 + (1.0 - rho * rho).sqrt() * normal(&mut rng);
        let a = beta_i[0] * x1 + beta_i[1] * x2 + beta_i[2] + e1 > 0.0;
        let b = beta_a[0] * x1 + beta_a[1] * x3 + beta_a[2] + e2 > 0.0;
        z.push(f64::from(u8::from(a && b)));
    }
    let g = n.div_ceil(5);
    DesignMatrices {
        x_invite: xi,
        x_accept: xa,
        z,
        cluster_id: (0..n).map(|i| i / 5).collect(),
        cluster_labels: (0..g).map(|c| format!("s{c}")).collect(),
        invite_names: vec!["x1".into(), "x2".into(), "intercept".into()],
        accept_names: vec!["x1".into(), "x3".into(), "intercept".into()],
        dropped_missing: 0,
    }
}
