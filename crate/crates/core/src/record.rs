//! The merchant-week transaction row.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use chrono::NaiveDate;

use crate::category::Category;
use crate::geo::{city_of_postal, City};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Online,
    Offline,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Online => "ONLINE",
            Channel::Offline => "OFFLINE",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "ONLINE" => Ok(Channel::Online),
            "OFFLINE" => Ok(Channel::Offline),
            other => Err(Error::param("transaction_type", alloc::format!("`{other}`"))),
        }
    }
}

/// One merchant-week aggregate. `nb_transactions` is signed so that tables
/// read from outside can carry (and be flagged for) negative counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub id: u32,
    pub merchant_id: u32,
    pub date: NaiveDate,
    pub category: Category,
    pub postal_code: String,
    pub channel: Channel,
    pub spend_amount: f64,
    pub nb_transactions: i64,
}

impl TransactionRecord {
    pub fn city(&self) -> City {
        city_of_postal(&self.postal_code)
    }
}

/// Canonical column order of the transaction table.
pub const TRANSACTION_COLUMNS: [&str; 8] = [
    "id",
    "merchant_id",
    "date",
    "merch_category",
    "merch_postal_code",
    "transaction_type",
    "spendamt",
    "nb_transactions",
];
