#![no_main]

use doamap::formats::parse_priors;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(priors) = parse_priors(text) {
            for p in priors {
                assert!(p.mu.is_finite() && p.mu.abs() <= std::f64::consts::FRAC_PI_2 + 1e-12);
                assert!(p.kappa >= 0.0);
            }
        }
    }
});
