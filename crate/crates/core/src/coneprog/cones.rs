//! Product cone `R₊^l × Q^{q₁} × … × Q^{q_k}`: Jordan algebra, Nesterov–Todd
//! scaling and step lengths.

/// Layout of a product cone. The nonnegative orthant comes first, then each
/// second-order block in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ConeSpec {
    pub lp: usize,
    pub soc: Vec<usize>,
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        self.lp + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant coordinate, one per second-order block.
    pub fn degree(&self) -> usize {
        self.lp + self.soc.len()
    }

    /// `(offset, size)` of each second-order block.
    pub fn soc_blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.soc.iter().scan(self.lp, |off, &q| {
            let start = *off;
            *off += q;
            Some((start, q))
        })
    }

    pub fn unit(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[..self.lp].fill(1.0);
        for (o, _) in self.soc_blocks() {
            e[o] = 1.0;
        }
        e
    }

    /// Smallest spectral value of `v`; positive iff `v` is interior.
    pub fn min_eig(&self, v: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for &x in &v[..self.lp] {
            m = m.min(x);
        }
        for (o, q) in self.soc_blocks() {
            m = m.min(v[o] - norm(&v[o + 1..o + q]));
        }
        m
    }

    /// Moves `v` into the interior along the identity if needed.
    pub fn shift_interior(&self, v: &mut [f64]) {
        let alpha = -self.min_eig(v);
        if alpha >= 0.0 {
            let e = self.unit();
            for (x, e) in v.iter_mut().zip(e) {
                *x += (1.0 + alpha) * e;
            }
        }
    }

    pub fn jordan_product(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for k in 0..self.lp {
            out[k] = u[k] * v[k];
        }
        for (o, q) in self.soc_blocks() {
            let (u0, u1) = (u[o], &u[o + 1..o + q]);
            let (v0, v1) = (v[o], &v[o + 1..o + q]);
            out[o] = u0 * v0 + dot(u1, v1);
            for k in 1..q {
                out[o + k] = u0 * v[o + k] + v0 * u[o + k];
            }
        }
        out
    }

    /// `λ \ d`, the solution `u` of `λ ∘ u = d`.
    pub fn jordan_div(&self, lambda: &[f64], d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; d.len()];
        for k in 0..self.lp {
            out[k] = d[k] / lambda[k];
        }
        for (o, q) in self.soc_blocks() {
            let (l0, l1) = (lambda[o], &lambda[o + 1..o + q]);
            let (d0, d1) = (d[o], &d[o + 1..o + q]);
            let det = soc_residual(l0, l1);
            let u0 = (l0 * d0 - dot(l1, d1)) / det;
            out[o] = u0;
            for k in 1..q {
                out[o + k] = (d[o + k] - u0 * lambda[o + k]) / l0;
            }
        }
        out
    }

    /// Largest `α ≥ 0` with `u + α·du` in the cone, given interior `u`.
    pub fn max_step(&self, u: &[f64], du: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for k in 0..self.lp {
            if du[k] < 0.0 {
                alpha = alpha.min(-u[k] / du[k]);
            }
        }
        for (o, q) in self.soc_blocks() {
            alpha = alpha.min(soc_step(&u[o..o + q], &du[o..o + q]));
        }
        alpha
    }
}

fn soc_step(u: &[f64], d: &[f64]) -> f64 {
    // (u0 + α d0)² − ‖u1 + α d1‖² = a α² + 2b α + c ≥ 0
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let c = soc_residual(u[0], &u[1..]).max(0.0);
    let disc = b * b - a * c;
    let mut alpha = f64::INFINITY;
    if a < 0.0 || (b < 0.0 && disc >= 0.0) {
        alpha = c / (-b + disc.max(0.0).sqrt());
    }
    if d[0] < 0.0 {
        alpha = alpha.min(-u[0] / d[0]);
    }
    alpha.max(0.0)
}

/// `t² − ‖x‖²` in factored form.
fn soc_residual(t: f64, x: &[f64]) -> f64 {
    let nx = norm(x);
    (t - nx) * (t + nx)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Nesterov–Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    /// `√(s/z)` on orthant coordinates.
    lp: Vec<f64>,
    /// `(η, w̄)` per second-order block.
    soc: Vec<(f64, Vec<f64>)>,
    pub lambda: Vec<f64>,
}

impl Scaling {
    /// `None` unless both points are strictly interior.
    pub fn new(cones: &ConeSpec, s: &[f64], z: &[f64]) -> Option<Self> {
        let mut lp = Vec::with_capacity(cones.lp);
        for k in 0..cones.lp {
            if !(s[k] > 0.0 && z[k] > 0.0) {
                return None;
            }
            lp.push((s[k] / z[k]).sqrt());
        }
        let mut soc = Vec::with_capacity(cones.soc.len());
        for (o, q) in cones.soc_blocks() {
            let (sb, zb) = (&s[o..o + q], &z[o..o + q]);
            let sres = soc_residual(sb[0], &sb[1..]);
            let zres = soc_residual(zb[0], &zb[1..]);
            if !(sres > 0.0 && zres > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                return None;
            }
            let (sn, zn) = (sres.sqrt(), zres.sqrt());
            let sbar: Vec<f64> = sb.iter().map(|v| v / sn).collect();
            let zbar: Vec<f64> = zb.iter().map(|v| v / zn).collect();
            let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
            let mut w = vec![0.0; q];
            w[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            for k in 1..q {
                w[k] = (sbar[k] - zbar[k]) / (2.0 * gamma);
            }
            // Keep w̄ on the unit hyperboloid against rounding.
            w[0] = (1.0 + dot(&w[1..], &w[1..])).sqrt();
            let eta = (sres / zres).sqrt().sqrt();
            soc.push((eta, w));
        }
        let mut out = Self { lp, soc, lambda: Vec::new() };
        out.lambda = out.apply(cones, z, false);
        Some(out)
    }

    /// `W v`, or `W⁻¹ v` when `inverse` is set.
    pub fn apply(&self, cones: &ConeSpec, v: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for k in 0..cones.lp {
            out[k] = if inverse { v[k] / self.lp[k] } else { v[k] * self.lp[k] };
        }
        for (b, (o, q)) in cones.soc_blocks().enumerate() {
            self.apply_block(b, &v[o..o + q], inverse, &mut out[o..o + q]);
        }
        out
    }

    /// `W v` or `W⁻¹ v` restricted to second-order block `b`.
    pub fn apply_block(&self, b: usize, v: &[f64], inverse: bool, out: &mut [f64]) {
        let (eta, w) = &self.soc[b];
        let sign = if inverse { -1.0 } else { 1.0 };
        let scale = if inverse { 1.0 / eta } else { *eta };
        let w1v1 = dot(&w[1..], &v[1..]);
        out[0] = scale * (w[0] * v[0] + sign * w1v1);
        let coef = sign * v[0] + w1v1 / (1.0 + w[0]);
        for k in 1..v.len() {
            out[k] = scale * (v[k] + coef * w[k]);
        }
    }

    /// `√(s/z)` on orthant coordinate `k`.
    pub fn lp_scale(&self, k: usize) -> f64 {
        self.lp[k]
    }

    /// `W²` on orthant coordinate `k`.
    #[cfg(test)]
    pub fn lp_w2(&self, k: usize) -> f64 {
        self.lp[k] * self.lp[k]
    }

    /// Dense `W² = η²(2w̄w̄ᵀ − J)` of second-order block `b`, row-major.
    #[cfg(test)]
    pub fn soc_w2(&self, b: usize) -> Vec<f64> {
        let (eta, w) = &self.soc[b];
        let q = w.len();
        let e2 = eta * eta;
        let mut m = vec![0.0; q * q];
        for r in 0..q {
            for c in 0..q {
                let j = if r == c {
                    if r == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                };
                m[r * q + c] = e2 * (2.0 * w[r] * w[c] - j);
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cones() -> ConeSpec {
        ConeSpec { lp: 2, soc: vec![3, 4] }
    }

    fn interior_pair() -> (Vec<f64>, Vec<f64>) {
        let s = vec![0.5, 2.0, 3.0, 1.0, -1.5, 2.0, 0.3, 0.4, -0.5];
        let z = vec![1.5, 0.2, 1.2, -0.3, 0.6, 4.0, -1.0, 2.0, 1.0];
        (s, z)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn scaling_maps_z_and_s_to_same_point() {
        let c = cones();
        let (s, z) = interior_pair();
        let w = Scaling::new(&c, &s, &z).unwrap();
        let from_s = w.apply(&c, &s, true);
        close(&w.lambda, &from_s, 1e-12);
        assert!(c.min_eig(&w.lambda) > 0.0);
    }

    #[test]
    fn inverse_undoes_scaling() {
        let c = cones();
        let (s, z) = interior_pair();
        let w = Scaling::new(&c, &s, &z).unwrap();
        let v: Vec<f64> = (0..9).map(|k| (k as f64 * 0.7).sin()).collect();
        close(&w.apply(&c, &w.apply(&c, &v, false), true), &v, 1e-12);
    }

    #[test]
    fn dense_square_matches_double_application() {
        let c = cones();
        let (s, z) = interior_pair();
        let w = Scaling::new(&c, &s, &z).unwrap();
        let v: Vec<f64> = (0..9).map(|k| (k as f64 * 1.3).cos()).collect();
        let twice = w.apply(&c, &w.apply(&c, &v, false), false);
        for (b, (o, q)) in c.soc_blocks().enumerate() {
            let m = w.soc_w2(b);
            for r in 0..q {
                let row: f64 = (0..q).map(|k| m[r * q + k] * v[o + k]).sum();
                assert!((row - twice[o + r]).abs() < 1e-12);
            }
        }
        assert!((w.lp_w2(0) * v[0] - twice[0]).abs() < 1e-14);
    }

    #[test]
    fn division_inverts_product() {
        let c = cones();
        let (s, _) = interior_pair();
        let d: Vec<f64> = (0..9).map(|k| k as f64 - 3.0).collect();
        let u = c.jordan_div(&s, &d);
        close(&c.jordan_product(&s, &u), &d, 1e-12);
    }

    #[test]
    fn step_reaches_boundary() {
        let c = ConeSpec { lp: 0, soc: vec![3] };
        let u = [2.0, 0.0, 0.0];
        let d = [-1.0, 1.0, 0.0];
        let a = c.max_step(&u, &d);
        let p: Vec<f64> = u.iter().zip(&d).map(|(u, d)| u + a * d).collect();
        assert!((p[0] - norm(&p[1..])).abs() < 1e-12);
        assert_eq!(c.max_step(&u, &[1.0, 0.5, 0.0]), f64::INFINITY);
    }

    #[test]
    fn shift_makes_interior() {
        let c = cones();
        let mut v = vec![-1.0, 0.0, 0.0, 5.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        c.shift_interior(&mut v);
        assert!(c.min_eig(&v) > 0.0);
    }
}
