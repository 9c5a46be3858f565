//! Sweep that calibrates the remainder constants of the two sandwich
//! bounds. The results are frozen in `ipmflow::weighted_step`.

use ipmflow::weighted_step::{power_ratio, sandwich_ratios, EdgeState, SandwichConstants};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const P_VALUES: [u32; 4] = [2, 4, 6, 8];

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// A random edge with `f` and `f + δ` inside the box `|x| ≤ min(û⁺, û⁻)/10`
/// and `δ ≥ 0`.
pub fn sample_val_case(rng: &mut ChaCha8Rng) -> (EdgeState, f64, f64) {
    let edge = EdgeState {
        up: log_uniform(rng, 0.5, 20.0),
        um: log_uniform(rng, 0.5, 20.0),
        wp: log_uniform(rng, 0.1, 10.0),
        wm: log_uniform(rng, 0.1, 10.0),
    };
    let ell = edge.up.min(edge.um) / 10.0;
    let f = rng.gen_range(-ell..ell);
    let delta = rng.gen_range(0.0..(ell - f));
    (edge, f, delta)
}

/// `f, δ ∈ [-1, 1]`; the power bound is homogeneous so the scale is free.
pub fn sample_power_case(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Observed extremes of the remainder ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub lo_min: f64,
    pub hi_max: f64,
}

impl Extremes {
    /// Constants with a factor-2 margin on the safe side of each extreme,
    /// rounded outward to three significant digits.
    pub fn with_margin(&self) -> SandwichConstants {
        let widen_down = |x: f64| if x > 0.0 { x / 2.0 } else { x * 2.0 };
        let widen_up = |x: f64| if x > 0.0 { x * 2.0 } else { x / 2.0 };
        SandwichConstants {
            c_lo: round_sig(widen_down(self.lo_min), f64::floor),
            c_hi: round_sig(widen_up(self.hi_max), f64::ceil),
        }
    }
}

fn round_sig(x: f64, dir: fn(f64) -> f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(x.abs().log10().floor() as i32 - 2);
    dir(x / scale) * scale
}

pub fn sweep_val(p: u32, samples: usize, seed: u64) -> Extremes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ex = Extremes { lo_min: f64::INFINITY, hi_max: f64::NEG_INFINITY };
    for _ in 0..samples {
        let (edge, f, delta) = sample_val_case(&mut rng);
        if let Some((lo, hi)) = sandwich_ratios(&edge, f, delta, p) {
            ex.lo_min = ex.lo_min.min(lo);
            ex.hi_max = ex.hi_max.max(hi);
        }
    }
    ex
}

pub fn sweep_power(p: u32, samples: usize, seed: u64) -> Extremes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ex = Extremes { lo_min: f64::INFINITY, hi_max: f64::NEG_INFINITY };
    for _ in 0..samples {
        let (f, delta) = sample_power_case(&mut rng);
        if let Some(r) = power_ratio(f, delta, p) {
            ex.lo_min = ex.lo_min.min(r);
            ex.hi_max = ex.hi_max.max(r);
        }
    }
    ex
}

/// Runs both sweeps for every `p` and renders the two constant tables as
/// Rust source.
pub fn calibrate(samples: usize, seed: u64) -> String {
    let mut out = String::new();
    for (name, power) in [("VAL_CONSTANTS", false), ("POWER_CONSTANTS", true)] {
        out.push_str(&format!("pub const {name}: [(u32, SandwichConstants); 4] = [\n"));
        for p in P_VALUES {
            let ex = if power { sweep_power(p, samples, seed) } else { sweep_val(p, samples, seed) };
            let k = ex.with_margin();
            out.push_str(&format!(
                "    ({p}, SandwichConstants {{ c_lo: {:.3e}, c_hi: {:.3e} }}),\n",
                k.c_lo, k.c_hi
            ));
        }
        out.push_str("];\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ipmflow::weighted_step::{lookup, POWER_CONSTANTS, VAL_CONSTANTS};

    #[test]
    fn frozen_constants_enclose_a_fresh_sweep() {
        for p in P_VALUES {
            let v = sweep_val(p, 20_000, 99);
            let k = lookup(&VAL_CONSTANTS, p).unwrap();
            assert!(k.c_lo <= v.lo_min && v.hi_max <= k.c_hi, "p = {p}: {v:?} vs {k:?}");
            let w = sweep_power(p, 20_000, 99);
            let k = lookup(&POWER_CONSTANTS, p).unwrap();
            assert!(k.c_lo <= w.lo_min && w.hi_max <= k.c_hi, "p = {p}: {w:?} vs {k:?}");
        }
    }

    #[test]
    fn rounding_goes_outward() {
        assert_eq!(round_sig(1.2345, f64::floor), 1.23);
        assert_eq!(round_sig(1.2345, f64::ceil), 1.24);
        let k = Extremes { lo_min: 0.3, hi_max: 5.0 }.with_margin();
        assert!(k.c_lo <= 0.15 && k.c_hi >= 10.0);
    }
}
