//! Cities, their populations and the postal-code encoding that identifies them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum City {
    Medellin,
    Bogota,
    Brasilia,
    Santiago,
}

impl City {
    pub const ALL: [City; 4] = [City::Medellin, City::Bogota, City::Brasilia, City::Santiago];

    pub fn name(self) -> &'static str {
        match self {
            City::Medellin => "Medellin",
            City::Bogota => "Bogota",
            City::Brasilia => "Brasilia",
            City::Santiago => "Santiago",
        }
    }

    /// Country whose national epidemiological series drives this city.
    pub fn country(self) -> &'static str {
        match self {
            City::Medellin | City::Bogota => "Colombia",
            City::Brasilia => "Brazil",
            City::Santiago => "Chile",
        }
    }

    /// Returns true when `code` follows this city's postal pattern.
    pub fn matches_postal(self, code: &str) -> bool {
        city_of_postal(code) == self
    }
}

impl fmt::Display for City {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for City {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .map(|c| match c {
                'á' | 'Á' => 'a',
                'í' | 'Í' => 'i',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        match key.as_str() {
            "medellin" => Ok(City::Medellin),
            "bogota" | "bogota dc" | "bogota d.c." => Ok(City::Bogota),
            "brasilia" => Ok(City::Brasilia),
            "santiago" => Ok(City::Santiago),
            _ => Err(Error::param("city", format!("unknown city `{s}`"))),
        }
    }
}

/// Maps a postal code to its city: prefix `05` is Medellin, prefix `11` is
/// Bogota, suffix `-000` is Brasilia and anything else is Santiago.
pub fn city_of_postal(code: &str) -> City {
    if code.starts_with("05") {
        City::Medellin
    } else if code.starts_with("11") {
        City::Bogota
    } else if code.ends_with("-000") {
        City::Brasilia
    } else {
        City::Santiago
    }
}

pub const MAX_POSTAL_ZONES: u32 = 100;

/// Formats the postal code of zone `zone` (0-based, `< MAX_POSTAL_ZONES`).
pub fn postal_code(city: City, zone: u32) -> String {
    debug_assert!(zone < MAX_POSTAL_ZONES);
    match city {
        City::Medellin => format!("05{:03}", zone + 1),
        City::Bogota => format!("11{:03}", zone + 1),
        City::Brasilia => format!("70{:03}-000", zone),
        City::Santiago => format!("83{:02}000", zone),
    }
}

/// Draws a postal code for `city` uniformly among `zones` postal zones.
pub fn assign_postal_code<R: Rng + ?Sized>(city: City, zones: u32, rng: &mut R) -> String {
    let zones = zones.clamp(1, MAX_POSTAL_ZONES);
    postal_code(city, rng.random_range(0..zones))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CityEntry {
    pub city: City,
    pub population: u64,
}

/// Cities taking part in generation, with the population used for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct CityTable {
    pub entries: Vec<CityEntry>,
}

impl Default for CityTable {
    fn default() -> Self {
        CityTable {
            entries: alloc::vec![
                CityEntry { city: City::Medellin, population: 2_569_000 },
                CityEntry { city: City::Bogota, population: 7_181_000 },
                CityEntry { city: City::Brasilia, population: 4_935_000 },
                CityEntry { city: City::Santiago, population: 5_561_000 },
            ],
        }
    }
}

impl CityTable {
    pub fn cities(&self) -> impl Iterator<Item = City> + '_ {
        self.entries.iter().map(|e| e.city)
    }

    pub fn population(&self, city: City) -> Option<u64> {
        self.entries.iter().find(|e| e.city == city).map(|e| e.population)
    }
}

/// Percentage of the total population living in each city.
pub fn city_shares(table: &CityTable) -> Result<Vec<(City, f64)>> {
    if table.entries.is_empty() {
        return Err(Error::Degenerate("city table is empty".into()));
    }
    if let Some(e) = table.entries.iter().find(|e| e.population == 0) {
        return Err(Error::param("population", format!("{} has zero population", e.city)));
    }
    let total: f64 = table.entries.iter().map(|e| e.population as f64).sum();
    Ok(table
        .entries
        .iter()
        .map(|e| (e.city, e.population as f64 / total * 100.0))
        .collect())
}
