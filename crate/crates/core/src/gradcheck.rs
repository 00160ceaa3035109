//! Central-difference verification of tape gradients.
//!
//! The caller supplies analytic gradients and a loss closure; every entry
//! of every named parameter is perturbed both ways and compared. Entries
//! where both the analytic and numeric values sit under a floor are
//! skipped: such gradients are dominated by difference noise and carry no
//! information about correctness.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::state::ModelState;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct FdCheck {
    /// Perturbation size for the central difference.
    pub epsilon: f64,
    /// Maximum allowed relative error.
    pub tolerance: f64,
    /// Magnitude below which a pair of gradients counts as zero.
    pub floor: f64,
}

impl Default for FdCheck {
    fn default() -> Self {
        Self { epsilon: 1e-5, tolerance: 1e-4, floor: 1e-7 }
    }
}

/// One compared gradient entry.
#[derive(Clone, Debug, PartialEq)]
pub struct FdEntry {
    pub name: String,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct FdReport {
    pub checked: usize,
    pub skipped: usize,
    /// Largest relative error seen among checked entries.
    pub worst: Option<FdEntry>,
    /// Entries whose relative error exceeded the tolerance.
    pub failures: Vec<FdEntry>,
    pub tolerance: f64,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `|a - n| / max(|a|, |n|)`, or `None` when both magnitudes sit under
/// `floor`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> Option<f64> {
    if analytic.abs() < floor && numeric.abs() < floor {
        return None;
    }
    Some((analytic - numeric).abs() / analytic.abs().max(numeric.abs()))
}

/// Compares `analytic` against central differences of `loss` around
/// `state`, entry by entry. `loss` must be a deterministic function of the
/// parameters (dropout off).
pub fn check_gradients<F>(
    state: &ModelState,
    analytic: &BTreeMap<String, Tensor>,
    mut loss: F,
    cfg: &FdCheck,
) -> FdReport
where
    F: FnMut(&ModelState) -> f64,
{
    let mut work = state.clone();
    let mut report = FdReport {
        checked: 0,
        skipped: 0,
        worst: None,
        failures: Vec::new(),
        tolerance: cfg.tolerance,
    };
    let names: Vec<String> = state.names().map(String::from).collect();
    for name in &names {
        let grad = analytic
            .get(name)
            .unwrap_or_else(|| panic!("no analytic gradient for {name}"));
        let (rows, cols) = state.get(name).shape();
        assert_eq!(grad.shape(), (rows, cols), "gradient shape mismatch for {name}");
        for row in 0..rows {
            for col in 0..cols {
                let orig = work.get(name).at(row, col);
                work.get_mut(name).set(row, col, orig + cfg.epsilon);
                let up = loss(&work);
                work.get_mut(name).set(row, col, orig - cfg.epsilon);
                let down = loss(&work);
                work.get_mut(name).set(row, col, orig);
                let numeric = (up - down) / (2.0 * cfg.epsilon);
                let a = grad.at(row, col);
                let Some(rel) = relative_error(a, numeric, cfg.floor) else {
                    report.skipped += 1;
                    continue;
                };
                report.checked += 1;
                let entry = FdEntry {
                    name: name.clone(),
                    row,
                    col,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                };
                if report.worst.as_ref().map_or(true, |w| rel > w.rel_error) {
                    report.worst = Some(entry.clone());
                }
                if rel > cfg.tolerance {
                    report.failures.push(entry);
                }
            }
        }
    }
    report
}
