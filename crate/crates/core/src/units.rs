//! Conversions from SI input units to the internal mm-N-s-K system.
//!
//! Internally energies are N mm (mJ), power is mW, density is t/mm^3.

/// W/(m K) to mW/(mm K). The factors cancel.
pub fn conductivity_from_si(k: f64) -> f64 {
    k
}

/// W/(m^2 K) to mW/(mm^2 K).
pub fn convection_from_si(h: f64) -> f64 {
    h * 1e-3
}

/// mW/(mm^2 K) back to W/(m^2 K).
pub fn convection_to_si(h: f64) -> f64 {
    h * 1e3
}

/// kg/m^3 to t/mm^3.
pub fn density_from_si(rho: f64) -> f64 {
    rho * 1e-12
}

/// J/(m^3 K) to mJ/(mm^3 K).
pub fn heat_capacity_from_si(c: f64) -> f64 {
    c * 1e-6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(convection_from_si(40.0), 0.04);
        assert!((convection_to_si(convection_from_si(37.5)) - 37.5).abs() < 1e-12);
        assert!((density_from_si(1050.0) - 1.05e-9).abs() < 1e-24);
        assert!((heat_capacity_from_si(2.1e6) - 2.1).abs() < 1e-12);
        assert_eq!(conductivity_from_si(0.25), 0.25);
    }
}
