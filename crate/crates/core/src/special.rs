//! Special functions: modified Bessel function of the second kind and the
//! chi-square mode density.
//!
//! `K_nu(x)` follows Temme's method: the order is split as `nu = mu + l`
//! with `|mu| <= 1/2`; `K_mu` and `K_{mu+1}` come from Temme's series for
//! `x < 2` and from Steed's continued fraction otherwise, and the forward
//! recurrence lifts them to order `nu`.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{FpcrError, Result};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Taylor coefficients `c_k` of `1 / Gamma(z) = sum_k c_k z^k`, `k = 1..=28`.
#[allow(clippy::excessive_precision)]
const RGAMMA: [f64; 28] = [
    1.0,
    0.577_215_664_901_532_860_6,
    -0.655_878_071_520_253_881_1,
    -0.042_002_635_034_095_235_53,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_75,
    -0.009_621_971_527_876_973_562,
    0.007_218_943_246_663_099_542,
    -0.001_165_167_591_859_065_112,
    -0.000_215_241_674_114_950_972_8,
    0.000_128_050_282_388_116_186_2,
    -2.013_485_478_078_823_866e-5,
    -1.250_493_482_142_670_657e-6,
    1.133_027_231_981_695_882e-6,
    -2.056_338_416_977_607_103e-7,
    6.116_095_104_481_415_818e-9,
    5.002_007_644_469_222_930e-9,
    -1.181_274_570_487_020_145e-9,
    1.043_426_711_691_100_510e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783e-14,
    -5.348_122_539_423_017_982e-15,
    1.226_778_628_238_260_790e-15,
    -1.181_259_301_697_458_770e-16,
    1.186_692_254_751_600_333e-18,
    1.412_380_655_318_031_782e-18,
];

/// Temme's auxiliary gamma quantities for `|mu| <= 1/2`:
/// `(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu))` with
/// `gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)` and
/// `gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    // 1/Gamma(1+mu) = sum_k c_k mu^{k-1}; 1/Gamma(1-mu) = sum_k c_k (-mu)^{k-1}
    let mut even = 0.0; // sum over k even of c_k mu^{k-2}
    let mut odd = 0.0; // sum over k odd of c_k mu^{k-1}
    let mu2 = mu * mu;
    for (idx, c) in RGAMMA.iter().enumerate().rev() {
        let k = idx + 1;
        if k % 2 == 0 {
            even = even * mu2 + c;
        } else {
            odd = odd * mu2 + c;
        }
    }
    let gam1 = -even;
    let gam2 = odd;
    let gampl = odd + mu * even;
    let gammi = odd - mu * even;
    (gam1, gam2, gampl, gammi)
}

/// `(K_mu(x), K_{mu+1}(x))` for `|mu| <= 1/2`, `0 < x < 2`.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if pimu.abs() < EPS {
        1.0
    } else {
        pimu / pimu.sin()
    };
    let d = -x2.ln();
    let e = mu * d;
    let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let ee = e.exp();
    let mut p = 0.5 * ee / gampl;
    let mut q = 0.5 / (ee * gammi);
    let mut c = 1.0;
    let dd = x2 * x2;
    let mut sum1 = p;
    for i in 1..=MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= dd / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// `(K_mu(x), K_{mu+1}(x))` for `|mu| <= 1/2`, `x >= 2` (Steed's CF2).
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let kmu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let kmu1 = kmu * (mu + x + 0.5 - h) / x;
    (kmu, kmu1)
}

/// Modified Bessel function of the second kind `K_nu(x)` for `nu >= 0`, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(FpcrError::Domain(format!("K_nu requires x > 0, got {x}")));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(FpcrError::Domain(format!(
            "K_nu requires a finite order nu >= 0, got {nu}"
        )));
    }
    // K_{1/2} in closed form
    if (nu - 0.5).abs() < EPS {
        return Ok((PI / (2.0 * x)).sqrt() * (-x).exp());
    }
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let (mut kmu, mut kmu1) = if x < 2.0 {
        temme_series(mu, x)
    } else {
        steed_cf2(mu, x)
    };
    for i in 1..=nl {
        let next = (mu + i as f64) * (2.0 / x) * kmu1 + kmu;
        kmu = kmu1;
        kmu1 = next;
    }
    Ok(kmu)
}

/// Peak height of the chi-square density with `J > 2` degrees of freedom,
/// attained at `J - 2`, evaluated in log space.
pub fn chi_square_mode_density(j: usize) -> Result<f64> {
    if j <= 2 {
        return Err(FpcrError::Domain(format!(
            "chi-square mode density needs J > 2, got {j}"
        )));
    }
    let k = j as f64;
    let half = 0.5 * k;
    let log = -half * 2f64.ln() - ln_gamma(half) + (half - 1.0) * (k - 2.0).ln() - 0.5 * (k - 2.0);
    Ok(log.exp())
}
