//! Log-space binomial probabilities.
//!
//! The binomial log-pmf uses Loader's saddle-point decomposition
//! (`stirlerr` + `bd0`), which keeps full relative precision for trial
//! counts far beyond where factorials overflow.

const LN_2PI: f64 = 1.837_877_066_409_345_5;

const S0: f64 = 1.0 / 12.0;
const S1: f64 = 1.0 / 360.0;
const S2: f64 = 1.0 / 1260.0;
const S3: f64 = 1.0 / 1680.0;
const S4: f64 = 1.0 / 1188.0;

// stirlerr(n/2) for n = 0..=30
#[allow(clippy::excessive_precision)]
const SFERR_HALVES: [f64; 31] = [
    0.0,
    0.153_426_409_720_027_345_291_384_8,
    0.081_061_466_795_327_258_219_670_2,
    0.054_814_121_051_917_653_896_139_0,
    0.041_340_695_955_409_294_093_822_1,
    0.033_162_873_519_936_287_485_110_48,
    0.027_677_925_684_998_339_148_789_29,
    0.023_746_163_656_297_495_971_329_20,
    0.020_790_672_103_765_093_111_522_77,
    0.018_488_450_532_673_185_230_779_34,
    0.016_644_691_189_821_192_163_194_87,
    0.015_134_973_221_917_378_873_512_55,
    0.013_876_128_823_070_747_998_745_73,
    0.012_810_465_242_920_226_924_249_86,
    0.011_896_709_945_891_770_095_055_72,
    0.011_104_559_758_206_917_326_629_91,
    0.010_411_265_261_972_096_497_478_567,
    0.009_799_416_126_158_803_298_389_475,
    0.009_255_462_182_712_732_917_728_637,
    0.008_768_700_134_139_385_462_952_823,
    0.008_330_563_433_362_871_256_469_318,
    0.007_934_114_564_314_020_547_248_100,
    0.007_573_675_487_951_840_794_972_024,
    0.007_244_554_301_320_383_179_543_912,
    0.006_942_840_107_209_529_865_664_152,
    0.006_665_247_032_707_682_442_354_394,
    0.006_408_994_188_004_207_068_439_631,
    0.006_171_712_263_039_457_647_532_867,
    0.005_951_370_112_758_847_735_624_416,
    0.005_746_216_513_010_115_682_023_589,
    0.005_554_733_551_962_801_371_038_690,
];

/// ln(n!) - [(n + 1/2) ln n - n + ln(sqrt(2 pi))], the Stirling remainder.
fn stirlerr(n: u64) -> f64 {
    if n <= 15 {
        return SFERR_HALVES[(2 * n) as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term x ln(x/np) + np - x, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// ln P(X = k) for X ~ Binomial(n, p). Returns `-inf` outside the support.
pub fn ln_binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if k > n {
        return f64::NEG_INFINITY;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if k == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
    }
    if k == n {
        return if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
    }
    let kf = k as f64;
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = LN_2PI + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

pub fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    ln_binomial_pmf(k, n, p).exp()
}

/// ln(n!)
pub fn ln_factorial(n: u64) -> f64 {
    statrs::function::factorial::ln_factorial(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_pmf(k: u64, n: u64, p: f64) -> f64 {
        let mut c = 1.0f64;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }

    #[test]
    fn small_cases_match_direct_formula() {
        for n in 0..40u64 {
            for k in 0..=n {
                for &p in &[0.05, 0.25, 0.5, 0.9] {
                    let a = binomial_pmf(k, n, p);
                    let b = direct_pmf(k, n, p);
                    assert!((a - b).abs() <= 1e-13 * b.max(1e-300), "n={n} k={k} p={p}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn degenerate_probabilities() {
        assert_eq!(binomial_pmf(0, 10, 0.0), 1.0);
        assert_eq!(binomial_pmf(1, 10, 0.0), 0.0);
        assert_eq!(binomial_pmf(10, 10, 1.0), 1.0);
        assert_eq!(binomial_pmf(9, 10, 1.0), 0.0);
        assert_eq!(binomial_pmf(0, 0, 0.3), 1.0);
        assert_eq!(binomial_pmf(11, 10, 0.3), 0.0);
    }

    #[test]
    fn large_n_sums_to_one() {
        let n = 100_000u64;
        let p = 1.0 / 5000.0;
        let total: f64 = (0..=200).map(|k| binomial_pmf(k, n, p)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ln_factorial_agrees_with_sum_of_logs() {
        let direct: f64 = (1..=300u64).map(|i| (i as f64).ln()).sum();
        assert!((ln_factorial(300) - direct).abs() < 1e-9);
    }
}
