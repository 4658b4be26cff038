//! Randomized sweep over the branch identities.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::flows::*;
use crate::netmodel::{Branch, BranchParams};

/// Sampling box for [`sweep`].
#[derive(Debug, Clone, Copy)]
pub struct SweepRanges {
    pub v: (f64, f64),
    pub angle: (f64, f64),
    pub r: (f64, f64),
    pub x: (f64, f64),
    pub b_charge: (f64, f64),
    pub tap: (f64, f64),
    pub shift: (f64, f64),
}

impl Default for SweepRanges {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        Self {
            v: (0.9, 1.1),
            angle: (-FRAC_PI_2, FRAC_PI_2),
            r: (0.0, 0.05),
            x: (0.01, 0.3),
            b_charge: (0.0, 0.5),
            tap: (0.9, 1.1),
            shift: (-0.2, 0.2),
        }
    }
}

impl SweepRanges {
    /// Same box with charging removed and an identity transformer.
    pub fn simple(self) -> Self {
        Self { b_charge: (0.0, 0.0), tap: (1.0, 1.0), shift: (0.0, 0.0), ..self }
    }
}

/// One random draw of the sweep.
#[derive(Debug, Clone, Copy)]
pub struct Draw {
    pub vi: Complex64,
    pub vj: Complex64,
    pub branch: BranchParams,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Deterministic stream of draws for a seed.
pub fn draws(seed: u64, n: usize, ranges: SweepRanges) -> impl Iterator<Item = Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(move |_| {
        let vi = Complex64::from_polar(uniform(&mut rng, ranges.v), uniform(&mut rng, ranges.angle));
        let vj = Complex64::from_polar(uniform(&mut rng, ranges.v), uniform(&mut rng, ranges.angle));
        let mut br = Branch::line(1, 2, uniform(&mut rng, ranges.r), uniform(&mut rng, ranges.x));
        br.b_charge = uniform(&mut rng, ranges.b_charge);
        br.tap = uniform(&mut rng, ranges.tap);
        br.shift = uniform(&mut rng, ranges.shift);
        let branch = BranchParams::of(&br).expect("x range excludes zero impedance");
        Draw { vi, vj, branch }
    })
}

/// Worst relative residual of each identity over a sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IdentityReport {
    pub draws: usize,
    pub seed: u64,
    pub line_loss: f64,
    pub voltage_drop: f64,
    pub abs_sq_current: f64,
    pub abs_sq_power: f64,
    pub abs_sq_voltage_product: f64,
    pub voltage_product_factorization: f64,
    /// Largest imaginary residue of the real-valued identities.
    pub imaginary_residue: f64,
}

impl IdentityReport {
    pub fn worst(&self) -> f64 {
        [
            self.line_loss,
            self.voltage_drop,
            self.abs_sq_current,
            self.abs_sq_power,
            self.abs_sq_voltage_product,
            self.voltage_product_factorization,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("line_loss", self.line_loss),
            ("voltage_drop", self.voltage_drop),
            ("abs_sq_current", self.abs_sq_current),
            ("abs_sq_power", self.abs_sq_power),
            ("abs_sq_voltage_product", self.abs_sq_voltage_product),
            ("voltage_product_factorization", self.voltage_product_factorization),
        ]
    }
}

/// Residuals of one draw, each divided by the magnitude of the terms it balances.
pub fn evaluate(d: &Draw) -> IdentityReport {
    let (vi, vj, p) = (d.vi, d.vj, &d.branch);
    let wi = vi.norm_sqr();
    let wj = vj.norm_sqr();
    let s_ij = branch_flow_from(vi, vj, p);
    let s_ji = branch_flow_to(vi, vj, p);
    let i_ij = branch_current(vi, vj, p);
    let diff = series_difference_sq(vi, vj, p);

    let loss = loss_identity_residual(vi, vj, p);
    let loss_scale = 1.0 + s_ij.norm() + s_ji.norm() + p.y.norm() * (wi / p.tap_sq + wj + 2.0 * (wi * wj).sqrt() / p.tap_sq.sqrt());

    let drop = voltage_drop_identity_residual_complex(vi, vj, p);
    let drop_scale = 1.0 + wi / p.tap_sq + wj + 2.0 * p.z.norm() * s_ij.norm() + diff.re.abs();

    let i_sq = i_ij.norm_sqr();
    let rhs = abs_sq_current_rhs(vi, vj, s_ij, p);
    let current_scale = 1.0 + i_sq + p.y_sq() * diff.re.abs() + p.b_charge * s_ij.im.abs();

    let s_sq = s_ij.norm_sqr();
    let power = s_sq - wi / p.tap_sq * i_sq;

    let vv = vi * vj.conj();
    let vv_sq = vv.norm_sqr() - wi * wj;

    let factored = vv_product(wi, s_ij, p) - vv;

    IdentityReport {
        draws: 1,
        seed: 0,
        line_loss: loss.norm() / loss_scale,
        voltage_drop: drop.re.abs() / drop_scale,
        abs_sq_current: (i_sq - rhs).abs() / current_scale,
        abs_sq_power: power.abs() / (1.0 + s_sq),
        abs_sq_voltage_product: vv_sq.abs() / (1.0 + wi * wj),
        voltage_product_factorization: factored.norm() / (1.0 + vv.norm()),
        imaginary_residue: drop.im.abs().max(diff.im.abs()),
    }
}

pub fn sweep(seed: u64, n: usize, ranges: SweepRanges) -> IdentityReport {
    let mut out = IdentityReport { draws: n, seed, ..Default::default() };
    for d in draws(seed, n, ranges) {
        let r = evaluate(&d);
        out.line_loss = out.line_loss.max(r.line_loss);
        out.voltage_drop = out.voltage_drop.max(r.voltage_drop);
        out.abs_sq_current = out.abs_sq_current.max(r.abs_sq_current);
        out.abs_sq_power = out.abs_sq_power.max(r.abs_sq_power);
        out.abs_sq_voltage_product = out.abs_sq_voltage_product.max(r.abs_sq_voltage_product);
        out.voltage_product_factorization = out.voltage_product_factorization.max(r.voltage_product_factorization);
        out.imaginary_residue = out.imaginary_residue.max(r.imaginary_residue);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_draw_has_negligible_residuals() {
        let d = draws(1, 1, SweepRanges { v: (1.0, 1.0), angle: (0.0, 0.0), ..SweepRanges::default().simple() })
            .next()
            .unwrap();
        assert!(evaluate(&d).worst() < 1e-15);
    }

    #[test]
    fn sweep_is_deterministic() {
        assert_eq!(sweep(7, 100, SweepRanges::default()), sweep(7, 100, SweepRanges::default()));
    }

    #[test]
    fn sweep_residuals_are_tiny() {
        let r = sweep(42, 2000, SweepRanges::default());
        assert!(r.worst() < 1e-11, "{r:?}");
        assert!(r.imaginary_residue < 1e-12, "{r:?}");
    }
}
