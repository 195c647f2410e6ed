use crate::combinatorics::DEFAULT_CAP;

/// Knobs shared by every computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Relative tolerance of the floating-point rank rule. Ignored by the
    /// exact backend.
    pub tolerance: f64,
    /// Largest binomial coefficient C(n,k) any operation may enumerate.
    pub cap: u64,
    /// Seed of the randomized counterexample search.
    pub seed: u64,
    /// Random restarts per support in the counterexample search.
    pub search_restarts: usize,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_SEARCH_RESTARTS: usize = 200;

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tolerance: DEFAULT_TOLERANCE,
            cap: DEFAULT_CAP,
            seed: 0,
            search_restarts: DEFAULT_SEARCH_RESTARTS,
        }
    }
}

impl Settings {
    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_search_restarts(mut self, restarts: usize) -> Self {
        self.search_restarts = restarts;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}
