use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::WorkerProfile;

/// Minimum job-success score for an established freelancer's bid to be considered.
pub const JOB_SUCCESS_FLOOR: f64 = 0.80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub bidder: WorkerProfile,
    pub price: f64,
    pub job_success: f64,
    #[serde(default)]
    pub is_newcomer: bool,
}

impl Bid {
    pub fn is_acceptable(&self) -> bool {
        self.price.is_finite()
            && self.price > 0.0
            && (self.is_newcomer || self.job_success >= JOB_SUCCESS_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("no acceptable bid among {0} received")]
    NoAcceptableBid(usize),
}

/// Lowest acceptable price, taken as-is. Ties go to the higher job success,
/// then to the smaller bidder id.
pub fn marketplace_select(bids: &[Bid]) -> Result<&Bid, MarketError> {
    bids.iter()
        .filter(|b| b.is_acceptable())
        .min_by(|a, b| {
            a.price
                .total_cmp(&b.price)
                .then_with(|| b.job_success.total_cmp(&a.job_success))
                .then_with(|| a.bidder.worker_id.cmp(&b.bidder.worker_id))
                .then(Ordering::Equal)
        })
        .ok_or(MarketError::NoAcceptableBid(bids.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workers::WorkerKind;

    fn bid(id: &str, price: f64, js: f64, newcomer: bool) -> Bid {
        Bid {
            bidder: WorkerProfile::new(id, WorkerKind::Expert, &["writing"], 20.0),
            price,
            job_success: js,
            is_newcomer: newcomer,
        }
    }

    #[test]
    fn cheapest_qualifying() {
        let bids = [bid("a", 30.0, 0.85, false), bid("b", 25.0, 0.60, false), bid("c", 40.0, 0.95, false)];
        assert_eq!(marketplace_select(&bids).unwrap().bidder.worker_id, "a");
    }

    #[test]
    fn single_bid() {
        let bids = [bid("a", 50.0, 0.9, false)];
        assert_eq!(marketplace_select(&bids).unwrap().price, 50.0);
    }

    #[test]
    fn none_acceptable() {
        let bids = [bid("a", 10.0, 0.5, false), bid("b", 12.0, 0.79, false)];
        assert_eq!(marketplace_select(&bids), Err(MarketError::NoAcceptableBid(2)));
        assert_eq!(marketplace_select(&[]), Err(MarketError::NoAcceptableBid(0)));
    }

    #[test]
    fn newcomer_admitted_and_ties_broken() {
        let bids = [bid("z", 20.0, 0.0, true), bid("y", 20.0, 0.9, false), bid("x", 20.0, 0.9, false)];
        assert_eq!(marketplace_select(&bids).unwrap().bidder.worker_id, "x");
        let bids = [bid("z", 19.0, 0.0, true), bid("y", 20.0, 0.9, false)];
        assert_eq!(marketplace_select(&bids).unwrap().bidder.worker_id, "z");
    }
}
