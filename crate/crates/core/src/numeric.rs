//! Small numeric helpers shared across modules.

use crate::C64;

/// Default relative tolerance for agreement between two computed values.
pub const REL_TOL: f64 = 1e-10;
/// Absolute floor under which differences are treated as zero.
pub const ABS_FLOOR: f64 = 1e-12;

/// `|a - b| <= max(rel * max(|a|, |b|), ABS_FLOOR)`.
pub fn close(a: C64, b: C64, rel: f64) -> bool {
    let scale = a.norm().max(b.norm());
    (a - b).norm() <= (rel * scale).max(ABS_FLOOR)
}

/// Real-valued variant of [`close`].
pub fn close_f64(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(ABS_FLOOR)
}

/// Scientific notation with 17 significant digits, identical across runs.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // fold -0.0 so outputs do not depend on the sign of a zero
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_has_absolute_floor() {
        assert!(close(C64::new(1e-13, 0.0), C64::new(0.0, 0.0), 0.0));
        assert!(!close(C64::new(1e-11, 0.0), C64::new(0.0, 0.0), 1e-10));
        assert!(close(C64::new(1.0, 1.0), C64::new(1.0 + 1e-11, 1.0), 1e-10));
        assert!(close_f64(1e6, 1e6 + 1e-5, 1e-10));
    }

    #[test]
    fn formatting_round_trips() {
        for x in [1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(-0.0), fmt_f64(0.0));
    }
}
