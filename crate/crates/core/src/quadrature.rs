//! Adaptive Gauss–Kronrod quadrature and the fixed element rule used by the FEM.

use crate::scalar::{cst, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Three-point Gauss rule on `[0, 1]`: (abscissae, weights).
pub fn gauss3<T: Real>() -> ([T; 3], [T; 3]) {
    let r = cst::<T>(0.6).sqrt();
    let half = cst::<T>(0.5);
    (
        [half * (T::one() - r), half, half * (T::one() + r)],
        [cst(5.0 / 18.0), cst(8.0 / 18.0), cst(5.0 / 18.0)],
    )
}

fn kronrod15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let c = cst::<T>(0.5) * (a + b);
    let h = cst::<T>(0.5) * (b - a);
    let fc = f(c);
    let mut k = fc * cst(WGK[7]);
    let mut g = fc * cst(WG[3]);
    for j in 0..7 {
        let dx = h * cst(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        k = k + s * cst(WGK[j]);
        if j % 2 == 1 {
            g = g + s * cst(WG[j / 2]);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive G7K15 quadrature of `f` over `[a, b]` to `tol` (absolute or relative,
/// whichever is looser). Returns `(value, error_estimate)`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> (T, T) {
    let (v0, e0) = kronrod15(&f, a, b);
    let mut segs = vec![(a, b, v0, e0)];
    let mut total = v0;
    let mut err = e0;
    let floor = cst::<T>(64.0) * T::epsilon();
    for _ in 0..4000 {
        if err <= tol.max(tol * total.abs()) {
            break;
        }
        let (i, _) = segs
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, be), (i, s)| {
                if s.3 > be {
                    (i, s.3)
                } else {
                    (bi, be)
                }
            });
        let (sa, sb, sv, se) = segs.swap_remove(i);
        let mid = cst::<T>(0.5) * (sa + sb);
        if (sb - sa).abs() <= floor * (sa.abs() + sb.abs()) {
            segs.push((sa, sb, sv, T::zero()));
            err = err - se;
            continue;
        }
        let (v1, e1) = kronrod15(&f, sa, mid);
        let (v2, e2) = kronrod15(&f, mid, sb);
        total = total - sv + v1 + v2;
        err = err - se + e1 + e2;
        segs.push((sa, mid, v1, e1));
        segs.push((mid, sb, v2, e2));
    }
    // resum to shed cancellation from the running updates
    let total = segs.iter().fold(T::zero(), |acc, s| acc + s.2);
    let err = segs.iter().fold(T::zero(), |acc, s| acc + s.3);
    (total, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss3_exact_for_quintics() {
        let (x, w) = gauss3::<f64>();
        let q: f64 = (0..3).map(|i| w[i] * x[i].powi(5)).sum();
        assert!((q - 1.0 / 6.0).abs() < 1e-15);
        let q4: f64 = (0..3).map(|i| w[i] * x[i].powi(4)).sum();
        assert!((q4 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn adaptive_sech_and_gaussian() {
        let (v, _) = integrate(|x: f64| 1.0 / x.cosh(), 0.0, 40.0, 1e-14);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let (g, _) = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, 1e-14);
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn adaptive_f32() {
        let (v, _) = integrate(|x: f32| x * x, 0.0, 3.0, 1e-6);
        assert!((v - 9.0).abs() < 1e-4);
    }
}
