use serde::{Deserialize, Serialize};

/// Billing month used for cost projections (24 × 30).
pub const HOURS_PER_MONTH: f64 = 720.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CapacityError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("insufficient capacity: {throughput} samples/s over {chunk_s}s chunks serves {clients_fractional:.2} clients")]
    InsufficientCapacity { throughput: f64, chunk_s: f64, clients_fractional: f64 },
}

/// How many residents one inference server can watch continuously, and
/// what that costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPlan {
    pub throughput: f64,
    pub chunk_s: f64,
    pub hourly_price: f64,
    pub clients_fractional: f64,
    pub clients: u64,
    pub monthly_cost: f64,
    /// Monthly cost divided by the fractional client count.
    pub cost_per_client: f64,
}

pub fn capacity_plan(throughput: f64, chunk_s: f64, hourly_price: f64) -> Result<CapacityPlan, CapacityError> {
    for (name, value) in [("throughput", throughput), ("chunk_s", chunk_s), ("hourly_price", hourly_price)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(CapacityError::NonPositive { name, value });
        }
    }
    let clients_fractional = throughput * chunk_s;
    // absorb representation error such as 0.29 * 100 = 28.999999999999996
    let clients = (clients_fractional + 1e-9).floor() as u64;
    if clients == 0 {
        return Err(CapacityError::InsufficientCapacity { throughput, chunk_s, clients_fractional });
    }
    let monthly_cost = hourly_price * HOURS_PER_MONTH;
    Ok(CapacityPlan {
        throughput,
        chunk_s,
        hourly_price,
        clients_fractional,
        clients,
        monthly_cost,
        cost_per_client: monthly_cost / clients_fractional,
    })
}
