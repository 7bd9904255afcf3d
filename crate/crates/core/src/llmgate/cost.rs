use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::{LlmExchange, LlmModelSpec};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
    pub total_cost_dollars: f64,
}

impl CostReport {
    pub fn cents(&self) -> f64 {
        self.total_cost_dollars * 100.0
    }
}

impl Add for CostReport {
    type Output = CostReport;

    fn add(self, rhs: CostReport) -> CostReport {
        CostReport {
            total_input_tokens: self.total_input_tokens + rhs.total_input_tokens,
            total_output_tokens: self.total_output_tokens + rhs.total_output_tokens,
            total_cost_dollars: self.total_cost_dollars + rhs.total_cost_dollars,
        }
    }
}

/// Sums provider-reported usage and prices it.
pub fn accumulate_cost(spec: &LlmModelSpec, exchanges: &[LlmExchange]) -> CostReport {
    let total_input_tokens: u64 = exchanges.iter().map(|e| e.input_tokens).sum();
    let total_output_tokens: u64 = exchanges.iter().map(|e| e.output_tokens).sum();
    let total_cost_dollars = total_input_tokens as f64 * (spec.input_price_per_1m / 1e6)
        + total_output_tokens as f64 * (spec.output_price_per_1m / 1e6);
    CostReport { total_input_tokens, total_output_tokens, total_cost_dollars }
}
