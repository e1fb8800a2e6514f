use super::{gradient, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::nfunction::NFunction;
use crate::numeric::pairwise_sum;

/// Luxemburg norm `inf{k > 0 : Σ wᵢ Φ(|uᵢ|/k) ≤ 1}` of weighted samples.
///
/// The modular `k ↦ Σ wΦ(|u|/k)` is nonincreasing, so the norm is found by
/// bisection on `k` inside `[1e-14·M, 10·M]`, `M = max(1, max|u|)`, with the
/// upper end expanded geometrically until the modular drops below one.
pub fn luxemburg_norm_samples(abs_values: &[f64], weights: &[f64], nf: &NFunction) -> Result<f64> {
    if abs_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite field value in Luxemburg norm".into()));
    }
    let max = abs_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    let modular = |k: f64| -> Result<f64> {
        let terms: Vec<f64> = abs_values
            .iter()
            .zip(weights)
            .map(|(u, w)| Ok(w * nf.value(u.abs() / k)?))
            .collect::<Result<_>>()?;
        Ok(pairwise_sum(&terms))
    };
    let m = max.max(1.0);
    let mut lo = 1e-14 * m;
    let mut hi = 10.0 * m;
    let mut expansions = 0;
    while modular(hi)? > 1.0 {
        lo = hi;
        hi *= 10.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Range("Luxemburg bracket expansion failed".into()));
        }
    }
    // relative tolerance: norms of small errors must keep their digits
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if modular(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Luxemburg norm of a scalar field, sampled at the quadrature points.
pub fn luxemburg_norm(u: &ScalarField, nf: &NFunction) -> Result<f64> {
    if u.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite nodal value in Luxemburg norm".into()));
    }
    let q = u.grid.quadrature();
    let vals: Vec<f64> = q.iter().map(|p| u.value_at_qp(p).abs()).collect();
    let w: Vec<f64> = q.iter().map(|p| p.weight).collect();
    luxemburg_norm_samples(&vals, &w, nf)
}

/// Luxemburg norm of the pointwise Euclidean magnitude of a vector field.
pub fn luxemburg_norm_vector(v: &VectorField, nf: &NFunction) -> Result<f64> {
    let dim = v.grid.dim();
    let vals: Vec<f64> = v
        .values
        .iter()
        .map(|g| if dim == 1 { g[0].abs() } else { g[0].hypot(g[1]) })
        .collect();
    let w: Vec<f64> = v.grid.quadrature().iter().map(|p| p.weight).collect();
    luxemburg_norm_samples(&vals, &w, nf)
}

/// `‖u‖ + Σᵢ ‖∂ᵢu‖` with every term a Luxemburg norm.
pub fn orlicz_sobolev_norm(u: &ScalarField, nf: &NFunction) -> Result<f64> {
    let mut total = luxemburg_norm(u, nf)?;
    let g = gradient(u);
    let w: Vec<f64> = u.grid.quadrature().iter().map(|p| p.weight).collect();
    for i in 0..u.grid.dim() {
        let comp: Vec<f64> = g.values.iter().map(|v| v[i].abs()).collect();
        total += luxemburg_norm_samples(&comp, &w, nf)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TensorGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_fields() {
        let g = TensorGrid::cell(2, 4).unwrap();
        let p2 = NFunction::power(2.0).unwrap();
        let s2 = NFunction::scaled_power(2.0).unwrap();
        let three = ScalarField::from_fn(&g, |_| 3.0);
        assert!((luxemburg_norm(&three, &p2).unwrap() - 3.0).abs() < 1e-12);
        let one = ScalarField::from_fn(&g, |_| 1.0);
        assert!((luxemburg_norm(&one, &s2).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(luxemburg_norm(&ScalarField::zeros(&g), &p2).unwrap(), 0.0);
        assert_eq!(orlicz_sobolev_norm(&ScalarField::zeros(&g), &p2).unwrap(), 0.0);
        assert!((orlicz_sobolev_norm(&three, &p2).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_is_domain_error() {
        let g = TensorGrid::cell(1, 4).unwrap();
        let mut u = ScalarField::zeros(&g);
        u.values[1] = f64::NAN;
        let p2 = NFunction::power(2.0).unwrap();
        assert!(matches!(luxemburg_norm(&u, &p2), Err(Error::Domain(_))));
    }

    #[test]
    fn power2_is_l2() {
        let g = TensorGrid::cell(1, 16).unwrap();
        let u = ScalarField::from_fn(&g, |x| (6.0 * x[0]).sin() + 0.3);
        let l2 = crate::grid::integrate_fn(&g, |x| u.value_at(x).powi(2)).sqrt();
        let lux = luxemburg_norm(&u, &NFunction::power(2.0).unwrap()).unwrap();
        assert!((lux - l2).abs() < 1e-12);
    }

    #[test]
    fn small_norms_keep_relative_accuracy() {
        let g = TensorGrid::cell(1, 8).unwrap();
        let u = ScalarField::from_fn(&g, |_| 3e-9);
        let lux = luxemburg_norm(&u, &NFunction::power(2.0).unwrap()).unwrap();
        assert!((lux / 3e-9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn x_one_minus_x_sobolev_norm() {
        let g = TensorGrid::unit_dirichlet(1, 128).unwrap();
        let u = ScalarField::from_fn(&g, |x| x[0] * (1.0 - x[0]));
        let n = orlicz_sobolev_norm(&u, &NFunction::power(2.0).unwrap()).unwrap();
        let exact = (1.0f64 / 30.0).sqrt() + (1.0f64 / 3.0).sqrt();
        assert!((n - exact).abs() < 1e-3, "{n} vs {exact}");
    }

    #[test]
    fn homogeneity_and_triangle() {
        let g = TensorGrid::cell(2, 6).unwrap();
        let nf = NFunction::power_log(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = ScalarField::from_fn(&g, |_| rng.gen_range(-2.0..2.0));
            let v = ScalarField::from_fn(&g, |_| rng.gen_range(-2.0..2.0));
            let nu = luxemburg_norm(&u, &nf).unwrap();
            for c in [0.5, 2.0, 10.0] {
                let nc = luxemburg_norm(&u.scaled(c), &nf).unwrap();
                assert!((nc - c * nu).abs() < 1e-10 * (1.0 + nc));
            }
            let nuv = luxemburg_norm(&u.add(&v).unwrap(), &nf).unwrap();
            assert!(nuv <= nu + luxemburg_norm(&v, &nf).unwrap() + 1e-9);
        }
    }
}
