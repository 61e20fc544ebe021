//! Random-instance check that the term-by-term and factored correlation
//! evaluators agree.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::correlation::{ObjectSpec, eq1_bruteforce, eq1_factored};
use crate::error::Result;
use crate::optics::{PlaneGrid, PropagatorMatrix};
use crate::rng::{Domain, keyed_stream, unit_f64};

pub const MAX_INSTANCE_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Eq1Instance {
    pub g_obj: PropagatorMatrix,
    pub g_ccd: PropagatorMatrix,
    pub object: ObjectSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eq1Check {
    pub n_s: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub max_relative_error: f64,
}

fn size(rng: &mut ChaCha8Rng) -> usize {
    1 + (unit_f64(rng) * MAX_INSTANCE_SIZE as f64) as usize
}

fn complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(2.0 * unit_f64(rng) - 1.0, 2.0 * unit_f64(rng) - 1.0)
}

/// Instance `index` of the verification stream for `seed`: random complex
/// propagators and a random object with `|t| <= 1`, all sizes in `1..=16`.
pub fn random_instance(seed: u64, index: u64) -> Eq1Instance {
    let mut rng = keyed_stream(seed, Domain::Verification, index, 0);
    let (n_s, n_x, n_y) = (size(&mut rng), size(&mut rng), size(&mut rng));
    let unit = |n| PlaneGrid::centered(n, 1.0).expect("valid grid");
    let mut matrix = |rows: usize| {
        let entries = (0..rows * n_s).map(|_| complex(&mut rng)).collect();
        PropagatorMatrix::from_entries(unit(n_s), unit(rows), entries, 1.0, 1.0).expect("valid shape")
    };
    let g_obj = matrix(n_x);
    let g_ccd = matrix(n_y);
    let t = (0..n_x)
        .map(|_| Complex64::from_polar(unit_f64(&mut rng), std::f64::consts::TAU * unit_f64(&mut rng)))
        .collect();
    let object = ObjectSpec::new(unit(n_x), t).expect("|t| <= 1");
    Eq1Instance { g_obj, g_ccd, object }
}

pub fn check_instance(inst: &Eq1Instance) -> Result<Eq1Check> {
    let mut worst = 0.0f64;
    for y in 0..inst.g_ccd.rows() {
        let brute = eq1_bruteforce(&inst.g_obj, &inst.g_ccd, &inst.object, y)?;
        let factored = eq1_factored(&inst.g_obj, &inst.g_ccd, &inst.object, y)?;
        let scale = brute.abs().max(factored.abs());
        if scale > 0.0 {
            worst = worst.max((brute - factored).abs() / scale);
        }
    }
    Ok(Eq1Check {
        n_s: inst.g_obj.cols(),
        n_x: inst.g_obj.rows(),
        n_y: inst.g_ccd.rows(),
        max_relative_error: worst,
    })
}
