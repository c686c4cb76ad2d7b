//! File formats, configuration and the command-line front end for
//! `epidp-core`.

pub mod cli;
pub mod config;
mod error;
pub mod formats;
pub mod ingest;
pub mod svg;

use std::collections::BTreeMap;

use epidp_core::datagen::{GenerationConfig, Generator};
use epidp_core::epi::EpiWeeklySeries;
use epidp_core::record::TransactionRecord;
use rayon::prelude::*;

pub use error::{Error, Result};

/// Same table as [`epidp_core::datagen::generate`], with merchants spread
/// over the rayon pool. Each merchant owns its RNG stream, so the output
/// does not depend on the thread count.
pub fn generate_parallel(
    config: &GenerationConfig,
    epi: &BTreeMap<String, EpiWeeklySeries>,
) -> Result<Vec<TransactionRecord>> {
    let generator = Generator::new(config, epi)?;
    Ok((1..=config.merchant_count)
        .into_par_iter()
        .flat_map_iter(|id| generator.merchant_rows(id))
        .collect())
}
