use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::Contribution;

use super::AdapterError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hold {
    pub amount: i64,
    pub from: Vec<Contribution>,
    pub beneficiary: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Settlement {
    Released,
    Refunded,
}

/// Integer-unit balances plus per-agreement holds.
///
/// `total()` (balances plus held amounts) never changes across hold,
/// release and refund.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowLedger {
    pub balances: BTreeMap<String, i64>,
    pub holds: BTreeMap<String, Hold>,
    #[serde(default)]
    pub settled: BTreeMap<String, Settlement>,
}

impl EscrowLedger {
    pub fn with_balances<I, S>(balances: I) -> Self
    where
        I: IntoIterator<Item = (S, i64)>,
        S: Into<String>,
    {
        Self {
            balances: balances.into_iter().map(|(h, a)| (h.into(), a)).collect(),
            ..Self::default()
        }
    }

    pub fn balance(&self, handle: &str) -> i64 {
        self.balances.get(handle).copied().unwrap_or(0)
    }

    pub fn total(&self) -> i64 {
        self.balances.values().sum::<i64>() + self.holds.values().map(|h| h.amount).sum::<i64>()
    }

    pub fn hold(
        &mut self,
        agreement_id: &str,
        contributions: &[Contribution],
        beneficiary: &str,
    ) -> Result<(), AdapterError> {
        if beneficiary.trim().is_empty() {
            return Err(AdapterError::EmptyRecipient);
        }
        if self.holds.contains_key(agreement_id) || self.settled.contains_key(agreement_id) {
            return Err(AdapterError::DuplicateHold(agreement_id.to_string()));
        }
        let mut needed: BTreeMap<&str, i64> = BTreeMap::new();
        for c in contributions {
            if c.amount < 0 {
                return Err(AdapterError::NegativeAmount(c.amount));
            }
            *needed.entry(c.handle.as_str()).or_default() += c.amount;
        }
        for (handle, amount) in &needed {
            let available = self.balance(handle);
            if available < *amount {
                return Err(AdapterError::InsufficientFunds {
                    handle: handle.to_string(),
                    needed: *amount,
                    available,
                });
            }
        }
        for (handle, amount) in &needed {
            *self.balances.entry(handle.to_string()).or_default() -= amount;
        }
        self.holds.insert(
            agreement_id.to_string(),
            Hold {
                amount: needed.values().sum(),
                from: contributions.to_vec(),
                beneficiary: beneficiary.to_string(),
            },
        );
        Ok(())
    }

    fn take_hold(&mut self, agreement_id: &str, how: Settlement) -> Result<Hold, AdapterError> {
        if self.settled.contains_key(agreement_id) {
            return Err(AdapterError::DoubleSettle(agreement_id.to_string()));
        }
        let hold = self
            .holds
            .remove(agreement_id)
            .ok_or_else(|| AdapterError::UnknownHold(agreement_id.to_string()))?;
        self.settled.insert(agreement_id.to_string(), how);
        Ok(hold)
    }

    pub fn release(&mut self, agreement_id: &str) -> Result<i64, AdapterError> {
        let hold = self.take_hold(agreement_id, Settlement::Released)?;
        *self.balances.entry(hold.beneficiary).or_default() += hold.amount;
        Ok(hold.amount)
    }

    pub fn refund(&mut self, agreement_id: &str) -> Result<i64, AdapterError> {
        let hold = self.take_hold(agreement_id, Settlement::Refunded)?;
        for c in &hold.from {
            *self.balances.entry(c.handle.clone()).or_default() += c.amount;
        }
        Ok(hold.amount)
    }
}
