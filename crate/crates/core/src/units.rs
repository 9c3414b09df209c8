//! Physical constants and dB/linear conversions.
//!
//! Everything downstream works in linear Watts; conversions happen here only.

pub const BOLTZMANN: f64 = 1.38e-23;
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

#[inline]
pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}
