//! Sample-size calibration from Hoeffding's inequality: with `n` i.i.d.
//! samples, true conformance is at least the empirical one minus
//! `sqrt(-ln(delta) / 2n)` with probability `1 - delta`.

use alloc::format;

use crate::error::ContractError;

fn check_fraction(name: &str, v: f64) -> Result<(), ContractError> {
    if !(v > 0.0 && v < 1.0) {
        return Err(ContractError::InvalidParam(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

/// `ceil(-ln(delta) / (2 epsilon^2))`.
pub fn required_samples(epsilon: f64, delta: f64) -> Result<usize, ContractError> {
    check_fraction("epsilon", epsilon)?;
    check_fraction("delta", delta)?;
    let n = -libm::log(delta) / (2.0 * epsilon * epsilon);
    Ok(libm::ceil(n) as usize)
}

/// Gap `sqrt(-ln(delta) / 2n)` achieved by a fixed training set of size `n`.
pub fn epsilon_for_samples(n: usize, delta: f64) -> Result<f64, ContractError> {
    if n == 0 {
        return Err(ContractError::InvalidParam("sample count must be at least 1".into()));
    }
    check_fraction("delta", delta)?;
    Ok(libm::sqrt(-libm::log(delta) / (2.0 * n as f64)))
}
