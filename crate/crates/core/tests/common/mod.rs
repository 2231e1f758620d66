#![allow(dead_code)]

use doamap::array_model::{steering_vector, ArrayGeometry};
use doamap::estimator::{oblique_projector, per_angle_cost, per_angle_quantities, sample_stats, SampleStats};
use doamap::linalg::{c64, CMat};
use doamap::scenario::PriorSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im)
    })
}

pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Relative error of two determinants given their logarithms.
pub fn det_rel_err(ln_a: f64, ln_b: f64) -> f64 {
    (ln_a - ln_b).exp_m1().abs()
}

pub fn inv(x: &CMat) -> CMat {
    x.clone().try_inverse().expect("invertible")
}

/// `ln |det X|` through an LU determinant.
pub fn ln_abs_det(x: &CMat) -> f64 {
    x.clone().determinant().norm().ln()
}

/// A random problem: array, distinct angles, sample statistics.
pub struct Instance {
    pub geom: ArrayGeometry,
    pub thetas: Vec<f64>,
    pub a: CMat,
    pub stats: SampleStats,
    pub y: CMat,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let m = rng.random_range(3..=8);
    let d = rng.random_range(1..=4.min(m - 1));
    let geom = ArrayGeometry::new(m, 0.5).unwrap();
    let mut thetas: Vec<f64> = Vec::with_capacity(d);
    while thetas.len() < d {
        let t = rng.random_range(-1.4..1.4);
        if thetas.iter().all(|&o: &f64| (o - t).abs() > 0.05) {
            thetas.push(t);
        }
    }
    let mut a = CMat::zeros(m, d);
    for (i, &t) in thetas.iter().enumerate() {
        a.set_column(i, &steering_vector(t, &geom).unwrap());
    }
    // Colored noise so that Q0 is far from the identity.
    let mix = randn(m, m, rng) + CMat::identity(m, m).scale(0.5);
    let m_noise = rng.random_range(m..=3 * m + 5);
    let n = rng.random_range(1..=40);
    let y_bar = &mix * randn(m, m_noise, rng);
    let y = &a * randn(d, n, rng) + &mix * randn(m, n, rng);
    let stats = sample_stats(&y_bar, &y).unwrap();
    Instance { geom, thetas, a, stats, y }
}

pub fn columns_except(a: &CMat, skip: usize) -> CMat {
    let keep: Vec<usize> = (0..a.ncols()).filter(|&j| j != skip).collect();
    a.select_columns(&keep)
}

/// `ln |I + α Q0⁻¹ Φ⊥_A R0|` recomputed with explicit inverses and an LU determinant.
pub fn direct_logdet(a: &CMat, stats: &SampleStats) -> f64 {
    let m = stats.m();
    let phi_perp = CMat::identity(m, m) - oblique_projector(a, &stats.q0).unwrap();
    let x = CMat::identity(m, m) + (inv(&stats.q0) * phi_perp * &stats.r0).scale(stats.alpha);
    ln_abs_det(&x)
}

/// Largest relative error of each identity on one instance.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityErrors {
    pub idempotence: f64,
    pub metric_hermitian: f64,
    pub fixed_point: f64,
    pub decomposition: f64,
    pub sylvester: f64,
    pub determinant_split: f64,
    pub workspace_definition: f64,
}

impl IdentityErrors {
    pub fn max(&self) -> f64 {
        [
            self.idempotence,
            self.metric_hermitian,
            self.fixed_point,
            self.decomposition,
            self.sylvester,
            self.determinant_split,
            self.workspace_definition,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn merge(&mut self, o: &IdentityErrors) {
        self.idempotence = self.idempotence.max(o.idempotence);
        self.metric_hermitian = self.metric_hermitian.max(o.metric_hermitian);
        self.fixed_point = self.fixed_point.max(o.fixed_point);
        self.decomposition = self.decomposition.max(o.decomposition);
        self.sylvester = self.sylvester.max(o.sylvester);
        self.determinant_split = self.determinant_split.max(o.determinant_split);
        self.workspace_definition = self.workspace_definition.max(o.workspace_definition);
    }
}

pub fn identity_errors(inst: &Instance, rng: &mut ChaCha8Rng) -> IdentityErrors {
    let stats = &inst.stats;
    let m = stats.m();
    let q0_inv = inv(&stats.q0);
    let phi = oblique_projector(&inst.a, &stats.q0).unwrap();
    let mut e = IdentityErrors {
        idempotence: rel_err(&(&phi * &phi), &phi),
        metric_hermitian: rel_err(&(&q0_inv * &phi).adjoint(), &(&q0_inv * &phi)),
        fixed_point: rel_err(&(&phi * &inst.a), &inst.a),
        ..Default::default()
    };

    // |I_m + M⁻¹ Q0⁻¹ E E*| = |I_N + M⁻¹ E* Q0⁻¹ E|
    let cols = inst.y.ncols();
    let e_mat = randn(m, cols, rng);
    let scale = 1.0 / stats.m_noise as f64;
    let lhs = ln_abs_det(&(CMat::identity(m, m) + (&q0_inv * &e_mat * e_mat.adjoint()).scale(scale)));
    let rhs = ln_abs_det(&(CMat::identity(cols, cols) + (e_mat.adjoint() * &q0_inv * &e_mat).scale(scale)));
    e.sylvester = det_rel_err(lhs, rhs);

    let full = direct_logdet(&inst.a, stats);
    for i in 0..inst.a.ncols() {
        let a_i = columns_except(&inst.a, i);
        let col = inst.a.column(i).into_owned();
        let phi_i = oblique_projector(&a_i, &stats.q0).unwrap();
        let a_tilde = &col - &phi_i * &col;
        let phi_tilde = oblique_projector(&CMat::from_column_slice(m, 1, a_tilde.as_slice()), &stats.q0).unwrap();
        e.decomposition = e.decomposition.max(rel_err(&(&phi_i + phi_tilde), &phi));

        let ws = per_angle_quantities(&a_i, &inst.geom, stats).unwrap();
        let g = &q0_inv * (CMat::identity(m, m) - &phi_i);
        let gr = &g * &stats.r0;
        let psi = &gr * inv(&(CMat::identity(m, m) + gr.scale(stats.alpha))) * &g;
        e.workspace_definition = e
            .workspace_definition
            .max(rel_err(ws.g(), &g))
            .max(rel_err(ws.psi(), &psi))
            .max(det_rel_err(ws.logdet_base, ln_abs_det(&(CMat::identity(m, m) + gr.scale(stats.alpha)))));

        // Direct split with the test's own G and Ψ, then through the library.
        let af = |x: &CMat| (col.adjoint() * x * &col)[(0, 0)].re;
        // G - αΨ = (I + αGR0)^-1 G, no subtraction.
        let shrunk = inv(&(CMat::identity(m, m) + gr.scale(stats.alpha))) * &g;
        let split = ln_abs_det(&(CMat::identity(m, m) + gr.scale(stats.alpha))) + (af(&shrunk) / af(&g)).ln();
        let lib = ws.logdet_base + per_angle_cost(inst.thetas[i], &ws, &PriorSpec::noninformative(), stats.gamma);
        e.determinant_split = e.determinant_split.max(det_rel_err(split, full)).max(det_rel_err(lib, full));
    }
    e
}

/// Scenario for the exhaustive-search comparison: two noninformative
/// sources at −20° and 25°, six sensors, 10 dB SNR, colored noise.
pub fn oracle_scenario() -> doamap::Scenario {
    doamap::ScenarioConfig::from_json(
        r#"{
            "m": 6,
            "priors": [{"mu_deg": 0}, {"mu_deg": 0}],
            "true_thetas_fixed_deg": [-20, 25],
            "noise_a": 0.5,
            "snr_db": 10,
            "N": 50, "M": 50
        }"#,
    )
    .unwrap()
    .build()
    .unwrap()
}

pub struct OracleTrial {
    pub alternating: f64,
    pub exhaustive: f64,
    pub monotone_violations: usize,
}

/// Alternating-projections cost on a single 181-point level against the
/// minimum over every admissible pair of the same grid.
pub fn oracle_trial(scn: &doamap::Scenario, seed: u64) -> OracleTrial {
    use doamap::estimator::{concentrated_cost, map_estimate_with_stats, Grid, MapConfig};
    use rand::SeedableRng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = doamap::generate_dataset(scn, &mut rng).unwrap();
    let stats = sample_stats(&ds.y_bar, &ds.y).unwrap();
    let cfg = MapConfig::new(181, 1);
    let res = map_estimate_with_stats(&stats, &ds.y, scn.priors(), scn.geom(), &cfg).unwrap();
    let alternating = concentrated_cost(&res.theta_hat, scn.geom(), &stats, scn.priors()).unwrap();

    let grid = Grid::initial(181);
    let pts: Vec<f64> = grid.points().collect();
    let mut exhaustive = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 2..pts.len() {
            if let Ok(c) = concentrated_cost(&[pts[i], pts[j]], scn.geom(), &stats, scn.priors()) {
                exhaustive = exhaustive.min(c);
            }
        }
    }
    OracleTrial {
        alternating,
        exhaustive,
        monotone_violations: res.monotone_violations(),
    }
}
