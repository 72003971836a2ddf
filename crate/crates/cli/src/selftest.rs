use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use carnot_coarea::projection::conjugation_identity_residual;
use carnot_coarea::{AlgebraVector, Error, Group, Point};

/// Largest relative defect of each group law identity over random samples.
#[derive(Debug, Serialize)]
pub struct SelftestReport {
    pub schema: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub step: usize,
    pub homogeneous_dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub associativity: f64,
    pub inverse: f64,
    pub dilation: f64,
    pub jacobi: f64,
    pub conjugation: f64,
}

impl SelftestReport {
    pub fn max_defect(&self) -> f64 {
        [self.associativity, self.inverse, self.dilation, self.jacobi, self.conjugation]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn defect(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs() / (1.0 + u.abs().max(v.abs()))).fold(0.0, f64::max)
}

fn sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn run(group: &Group, samples: usize, seed: u64) -> Result<SelftestReport, Error> {
    let n = group.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = SelftestReport {
        schema: group.name().to_string(),
        n,
        step: group.step(),
        homogeneous_dim: group.homogeneous_dim(),
        samples,
        seed,
        associativity: 0.0,
        inverse: 0.0,
        dilation: 0.0,
        jacobi: 0.0,
        conjugation: 0.0,
    };
    for _ in 0..samples {
        let (x, y, z) = (sample(&mut rng, n), sample(&mut rng, n), sample(&mut rng, n));
        // Dyadic factors scale exactly, so any defect comes from the bracket terms.
        let lambda = 2f64.powi(rng.random_range(-3..=3));

        let left = group.product(&group.product(&x, &y), &z);
        let right = group.product(&x, &group.product(&y, &z));
        r.associativity = r.associativity.max(defect(&left, &right));

        let xp = Point::new(x.clone());
        let inv = group.inverse(&xp);
        r.inverse = r.inverse.max(defect(&group.product(&x, inv.coords()), &vec![0.0; n]));

        let a = group.dilate_raw(lambda, &group.product(&x, &y));
        let b = group.product(&group.dilate_raw(lambda, &x), &group.dilate_raw(lambda, &y));
        r.dilation = r.dilation.max(defect(&a, &b));

        let (u, v, w) = (AlgebraVector::new(x.clone()), AlgebraVector::new(y.clone()), AlgebraVector::new(z));
        let cyc = |a: &AlgebraVector, b: &AlgebraVector, c: &AlgebraVector| -> Result<Vec<f64>, Error> {
            Ok(group.bracket(a, &group.bracket(b, c)?)?.into_vec())
        };
        let terms = [cyc(&u, &v, &w)?, cyc(&v, &w, &u)?, cyc(&w, &u, &v)?];
        let sum: Vec<f64> = (0..n).map(|k| terms.iter().map(|t| t[k]).sum()).collect();
        r.jacobi = r.jacobi.max(defect(&sum, &vec![0.0; n]));

        let yp = Point::new(y);
        for j in 0..group.horizontal_dim() {
            r.conjugation = r.conjugation.max(conjugation_identity_residual(group, &xp, &yp, j)?);
        }
    }
    Ok(r)
}
