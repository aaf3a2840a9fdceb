//! Operation counters for complexity accounting.
//!
//! Counts are unit operations per processing step: complex multiply-adds for
//! correlations and equalization, candidate comparisons for hard decisions,
//! and constellation-term evaluations for the likelihood data term.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    ChannelEstimation,
    SoftDataEstimation,
    HardDataDecision,
    SymbolEqualization,
    LocalizationPilot,
    /// Per-cell combining across nodes in the data term.
    LocalizationDataCombining,
    /// Per-cell constellation sum (or amplitude-level sum) in the data term.
    LocalizationDataConstellation,
}

impl Step {
    pub const ALL: [Step; 7] = [
        Step::ChannelEstimation,
        Step::SoftDataEstimation,
        Step::HardDataDecision,
        Step::SymbolEqualization,
        Step::LocalizationPilot,
        Step::LocalizationDataCombining,
        Step::LocalizationDataConstellation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Step::ChannelEstimation => "channel_estimation",
            Step::SoftDataEstimation => "soft_data_estimation",
            Step::HardDataDecision => "hard_data_decision",
            Step::SymbolEqualization => "symbol_equalization",
            Step::LocalizationPilot => "localization_pilot",
            Step::LocalizationDataCombining => "localization_data_combining",
            Step::LocalizationDataConstellation => "localization_data_constellation",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    counts: [u64; 7],
    /// Number of objective evaluations that contributed localization counts.
    pub evaluations: u64,
}

impl OpCounts {
    #[inline]
    pub fn add(&mut self, step: Step, n: u64) {
        self.counts[step as usize] += n;
    }

    pub fn get(&self, step: Step) -> u64 {
        self.counts[step as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: OpCounts) {
        for (a, b) in self.counts.iter_mut().zip(rhs.counts) {
            *a += b;
        }
        self.evaluations += rhs.evaluations;
    }
}
