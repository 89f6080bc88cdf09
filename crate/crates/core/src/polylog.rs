//! Complete Bose–Einstein and Fermi–Dirac integrals of integer order.
//!
//! With the harmonic-trap density of states every reservoir quantity reduces to
//! polylogarithms of `±e^z`:
//!
//! ```text
//! bose(n, z)  =  Li_n(e^z),     z ≤ 0
//! fermi(n, z) = -Li_n(-e^z),    any z
//! ```
//!
//! `bose` sums the power series for `z < -1` and uses the logarithmic expansion
//! about `z = 0` otherwise. `fermi` reduces negative arguments to `bose` via the
//! duplication formula and positive ones through the inversion identity.

use std::f64::consts::PI;

const ZETA2: f64 = PI * PI / 6.0;
const ZETA3: f64 = 1.202_056_903_159_594_3;
const ZETA4: f64 = PI * PI * PI * PI / 90.0;

/// ζ(1 − 2j) for j = 1, 2, ... ; the even negative zeta values vanish.
const ZETA_NEG_ODD: [f64; 12] = [
    -1.0 / 12.0,
    1.0 / 120.0,
    -1.0 / 252.0,
    1.0 / 240.0,
    -1.0 / 132.0,
    691.0 / 32760.0,
    -1.0 / 12.0,
    3617.0 / 8160.0,
    -43867.0 / 14364.0,
    174611.0 / 6600.0,
    -77683.0 / 276.0,
    236364091.0 / 65520.0,
];

/// Orders supported by the closed-form paths.
pub const MIN_ORDER: u32 = 2;
pub const MAX_ORDER: u32 = 4;

fn zeta(s: i64) -> f64 {
    match s {
        2 => ZETA2,
        3 => ZETA3,
        4 => ZETA4,
        0 => -0.5,
        s if s < 0 && s % 2 == 0 => 0.0,
        s if s < 0 => ZETA_NEG_ODD[((1 - s) / 2 - 1) as usize],
        _ => unreachable!("zeta({s}) not tabulated"),
    }
}

fn check_order(n: u32) {
    assert!(
        (MIN_ORDER..=MAX_ORDER).contains(&n),
        "polylog order {n} outside {MIN_ORDER}..={MAX_ORDER}"
    );
}

/// `Li_n(e^z)` for `z ≤ 0`.
pub fn bose(n: u32, z: f64) -> f64 {
    check_order(n);
    assert!(z <= 0.0, "bose integral requires z <= 0, got {z}");
    if z < -1.0 {
        series(n, z.exp(), 1.0)
    } else {
        expansion_about_zero(n, z)
    }
}

/// `-Li_n(-e^z)` for any real `z`.
pub fn fermi(n: u32, z: f64) -> f64 {
    check_order(n);
    if z > 0.0 {
        return fermi_inverted(n, z);
    }
    if z < -1.0 {
        // alternating series, terms fall off like e^{kz}
        return -series(n, z.exp(), -1.0);
    }
    // Li_n(-x) = 2^{1-n} Li_n(x^2) - Li_n(x)
    let half_pow = 0.5f64.powi(n as i32 - 1);
    bose(n, z) - half_pow * bose(n, 2.0 * z)
}

/// Σ_k (s·x)^k / k^n for s = ±1 and 0 < x ≤ e^{-1}.
fn series(n: u32, x: f64, sign: f64) -> f64 {
    let sx = sign * x;
    let mut pow = sx;
    let mut sum = 0.0;
    for k in 1..200u32 {
        let term = pow / f64::from(k).powi(n as i32);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        pow *= sx;
    }
    sum
}

fn expansion_about_zero(n: u32, z: f64) -> f64 {
    let n = n as i64;
    let mut sum = 0.0;
    let mut z_pow = 1.0;
    let mut fact = 1.0;
    // k runs until the tabulated negative zeta values are exhausted
    let k_max = n + 2 * ZETA_NEG_ODD.len() as i64;
    for k in 0..=k_max {
        if k > 0 {
            z_pow *= z;
            fact *= k as f64;
        }
        if k == n - 1 {
            let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
            let log_term = if z == 0.0 { 0.0 } else { (-z).ln() };
            sum += z_pow / fact * (harmonic - log_term);
        } else {
            sum += zeta(n - k) * z_pow / fact;
        }
    }
    sum
}

/// Inversion identities, valid for z > 0:
/// F_2(z) = π²/6 + z²/2 − F_2(−z), F_3(z) = π²z/6 + z³/6 + F_3(−z),
/// F_4(z) = 7π⁴/360 + π²z²/12 + z⁴/24 − F_4(−z).
fn fermi_inverted(n: u32, z: f64) -> f64 {
    let mirror = fermi(n, -z);
    match n {
        2 => ZETA2 + 0.5 * z * z - mirror,
        3 => ZETA2 * z + z * z * z / 6.0 + mirror,
        4 => 7.0 * PI.powi(4) / 360.0 + ZETA2 * z * z / 2.0 + z.powi(4) / 24.0 - mirror,
        _ => unreachable!(),
    }
}
