use std::time::Instant;

use qfl_core::federated::{Clock, Executor, Participant};
use rayon::prelude::*;

/// Local rounds on the rayon thread pool. Results keep participant order,
/// and the reduction that follows is sequential, so output does not depend
/// on the thread count.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Executor for Parallel {
    fn map<T: Send>(
        &self,
        participants: &[Participant],
        job: &(dyn Fn(&Participant) -> qfl_core::Result<T> + Sync),
    ) -> Vec<qfl_core::Result<T>> {
        participants.par_iter().map(job).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
