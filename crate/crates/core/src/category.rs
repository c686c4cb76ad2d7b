//! Merchant categories, their generation profiles and analysis groupings.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Airlines,
    Bars,
    ComputerNetwork,
    DrugStores,
    GeneralRetail,
    Grocery,
    Hospitals,
    Hotels,
    Restaurants,
    Utilities,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Airlines,
        Category::Bars,
        Category::ComputerNetwork,
        Category::DrugStores,
        Category::GeneralRetail,
        Category::Grocery,
        Category::Hospitals,
        Category::Hotels,
        Category::Restaurants,
        Category::Utilities,
    ];

    /// Name as written in the `merch_category` column.
    pub fn name(self) -> &'static str {
        match self {
            Category::Airlines => "Airlines",
            Category::Bars => "Bars/Discotheques",
            Category::ComputerNetwork => "Computer Network/Information Services",
            Category::DrugStores => "Drug Stores/Pharmacies",
            Category::GeneralRetail => "General Retail Stores",
            Category::Grocery => "Grocery Stores/Supermarkets",
            Category::Hospitals => "Hospitals",
            Category::Hotels => "Hotels/Motels",
            Category::Restaurants => "Restaurants",
            Category::Utilities => "Utilities: Electric, Gas, Water",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Essential/luxury classification used by the adherence analysis.
    pub fn goods_class(self) -> Option<GoodsClass> {
        match self {
            Category::Utilities
            | Category::DrugStores
            | Category::Grocery
            | Category::Hospitals
            | Category::GeneralRetail => Some(GoodsClass::Essential),
            Category::Hotels | Category::Bars | Category::Restaurants => Some(GoodsClass::Luxury),
            Category::Airlines | Category::ComputerNetwork => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param("category", format!("unknown merchant category `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GoodsClass {
    Essential,
    Luxury,
}

/// Generation profile of one merchant category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryProfile {
    pub category: Category,
    /// Relative frequency of merchants in this category.
    pub share_weight: f64,
    /// Signed response of volume to normalized deaths.
    pub covid_multiplier: f64,
    /// Weeks between the death signal and the spending response (0..=3).
    pub response_lag: u32,
    /// Expected weekly transactions per merchant before any epidemic effect.
    pub base_volume: f64,
    /// Mean spend per transaction.
    pub typical_ticket: f64,
    /// Probability that a merchant sells online.
    pub online_share: f64,
}

impl CategoryProfile {
    pub fn validate(&self) -> Result<()> {
        let name = self.category.name();
        if !(self.share_weight > 0.0 && self.share_weight.is_finite()) {
            return Err(Error::param("share_weight", format!("{name}: must be > 0")));
        }
        if !self.covid_multiplier.is_finite() {
            return Err(Error::param("covid_multiplier", format!("{name}: must be finite")));
        }
        if self.response_lag > 3 {
            return Err(Error::param("response_lag", format!("{name}: must be in 0..=3")));
        }
        if !(self.base_volume > 0.0 && self.base_volume.is_finite()) {
            return Err(Error::param("base_volume", format!("{name}: must be > 0")));
        }
        if !(self.typical_ticket > 0.0 && self.typical_ticket.is_finite()) {
            return Err(Error::param("typical_ticket", format!("{name}: must be > 0")));
        }
        if !(0.0..=1.0).contains(&self.online_share) {
            return Err(Error::param("online_share", format!("{name}: must be in [0, 1]")));
        }
        Ok(())
    }
}

/// Default profiles for the ten categories. Share weights are uniform.
pub fn default_profiles() -> Vec<CategoryProfile> {
    use Category::*;
    // (category, multiplier, base volume, ticket, online share)
    let table = [
        (Airlines, -0.6, 20.0, 250.0, 0.60),
        (Bars, -0.8, 60.0, 25.0, 0.05),
        (ComputerNetwork, 0.2, 30.0, 80.0, 0.70),
        (DrugStores, 0.4, 70.0, 20.0, 0.20),
        (GeneralRetail, -0.4, 80.0, 40.0, 0.30),
        (Grocery, 0.3, 120.0, 35.0, 0.15),
        (Hospitals, 0.5, 25.0, 150.0, 0.05),
        (Hotels, -0.7, 15.0, 120.0, 0.50),
        (Restaurants, -0.7, 90.0, 18.0, 0.25),
        (Utilities, 0.0, 40.0, 60.0, 0.80),
    ];
    table
        .into_iter()
        .map(|(category, m, volume, ticket, online)| CategoryProfile {
            category,
            share_weight: 1.0,
            covid_multiplier: m,
            response_lag: if m == 0.0 { 0 } else { 1 },
            base_volume: volume,
            typical_ticket: ticket,
            online_share: online,
        })
        .collect()
}

/// Mobility-report style groupings of categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SuperCategory {
    RetailAndRecreation,
    GroceryAndPharmacy,
    TransitStations,
}

impl SuperCategory {
    pub const ALL: [SuperCategory; 3] = [
        SuperCategory::RetailAndRecreation,
        SuperCategory::GroceryAndPharmacy,
        SuperCategory::TransitStations,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuperCategory::RetailAndRecreation => "retail_and_recreation",
            SuperCategory::GroceryAndPharmacy => "grocery_and_pharmacy",
            SuperCategory::TransitStations => "transit_stations",
        }
    }
}

impl fmt::Display for SuperCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuperCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuperCategory::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::param("super_category", format!("unmapped super-category `{s}`")))
    }
}

/// Category to super-category assignment; unmapped categories are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperCategoryMap {
    map: BTreeMap<Category, SuperCategory>,
}

impl Default for SuperCategoryMap {
    fn default() -> Self {
        use Category::*;
        use SuperCategory::*;
        SuperCategoryMap::from_pairs([
            (GeneralRetail, RetailAndRecreation),
            (Bars, RetailAndRecreation),
            (Restaurants, RetailAndRecreation),
            (Hotels, RetailAndRecreation),
            (Grocery, GroceryAndPharmacy),
            (DrugStores, GroceryAndPharmacy),
            (Airlines, TransitStations),
        ])
    }
}

impl SuperCategoryMap {
    /// Later pairs overwrite earlier ones, so each category maps at most once.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Category, SuperCategory)>) -> Self {
        SuperCategoryMap {
            map: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, category: Category) -> Option<SuperCategory> {
        self.map.get(&category).copied()
    }

    pub fn members(&self, sc: SuperCategory) -> Vec<Category> {
        self.map.iter().filter(|(_, &s)| s == sc).map(|(&c, _)| c).collect()
    }
}
