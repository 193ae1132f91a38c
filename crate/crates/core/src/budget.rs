use crate::error::{Error, Result};

/// Upper limit on the size of an exponential enumeration.
///
/// A single number is used for every kind of work (table cells, Gowers
/// products, polynomial family sizes, candidate tuples); operations document
/// what they count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Budget(pub u64);

impl Budget {
    /// Default cap on dense table sizes `p^n`.
    pub const TABLE_CELLS: Budget = Budget(1 << 22);
    /// Default cap on elementary products and enumeration work.
    pub const WORK: Budget = Budget(100_000_000);

    pub fn limit(self) -> u64 {
        self.0
    }

    /// Refuses with [`Error::BudgetExceeded`] when `required` is over the limit.
    pub fn check(self, what: &str, required: u128) -> Result<()> {
        self.check_with_hint(what, required, "")
    }

    pub fn check_with_hint(self, what: &str, required: u128, hint: &str) -> Result<()> {
        if required > self.0 as u128 {
            Err(Error::BudgetExceeded {
                what: what.to_string(),
                required,
                limit: self.0,
                hint: if hint.is_empty() {
                    String::new()
                } else {
                    format!("; {hint}")
                },
            })
        } else {
            Ok(())
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::WORK
    }
}

/// `base^exp` saturating at `u128::MAX`.
pub(crate) fn sat_pow(base: u128, exp: u64) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
        if acc == u128::MAX {
            break;
        }
    }
    acc
}
