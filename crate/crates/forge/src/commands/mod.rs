use std::path::Path;

use gkp_core::lattice::{lattice_from_input, LatticeInput};
use gkp_core::prelude::*;

use crate::report::{read_input, ForgeError};

pub mod compile;
pub mod group;
pub mod lrb;
pub mod sbs;
pub mod wigner;

/// A lattice flag names either a built-in code or a JSON file on disk.
pub fn resolve_lattice(spec: &str, modes: Option<usize>) -> Result<GkpLattice, ForgeError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = read_input(path)?;
        let mut input: LatticeInput = serde_json::from_str(&text).map_err(|err| {
            ForgeError::Config(format!("lattice file {}: {err}", path.display()))
        })?;
        if input.modes.is_none() {
            input.modes = modes;
        }
        return Ok(lattice_from_input(&input)?);
    }
    Ok(lattice_from_input(&LatticeInput {
        s: None,
        name: Some(spec.to_string()),
        modes,
    })?)
}

/// Thread-pool size for the sampling loop: flag, then environment, then all
/// available cores.  Returns the effective worker count.
pub fn configure_workers(flag: Option<usize>) -> Result<usize, ForgeError> {
    let requested = match flag {
        Some(n) => Some(n),
        None => match std::env::var("GKP_FORGE_WORKERS") {
            Ok(text) => Some(text.parse::<usize>().map_err(|_| {
                ForgeError::Config(format!("GKP_FORGE_WORKERS is not a number: {text:?}"))
            })?),
            Err(_) => None,
        },
    };
    if requested == Some(0) {
        return Err(ForgeError::Config("worker count must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    {
        let workers = requested.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|err| ForgeError::Runtime(format!("thread pool: {err}")))?;
        Ok(workers)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = requested;
        Ok(1)
    }
}
