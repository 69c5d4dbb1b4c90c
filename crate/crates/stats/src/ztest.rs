use serde::{Deserialize, Serialize};

use crate::normal::normal_sf;
use crate::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTestResult {
    pub z: f64,
    pub p_one_sided: f64,
}

/// One-sided test of `x1/n1 > x2/n2` with the pooled-proportion standard error.
/// When both samples are all-success or all-failure the statistic is 0.
pub fn two_prop_z_one_sided(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<ZTestResult, StatsError> {
    if n1 == 0 || n2 == 0 || x1 > n1 || x2 > n2 {
        return Err(StatsError::InvalidCounts { x1, n1, x2, n2 });
    }
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let z = if se == 0.0 { 0.0 } else { (p1 - p2) / se };
    Ok(ZTestResult {
        z,
        p_one_sided: normal_sf(z),
    })
}
