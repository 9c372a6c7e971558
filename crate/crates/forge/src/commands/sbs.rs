use std::path::Path;

use gkp_core::envelope::initial_envelope;
use gkp_core::prelude::*;
use gkp_core::sbs::{sbs_circuit, SbsElement};
use gkp_core::symplectic::omega_real;
use serde::Serialize;
use serde_json::json;

use crate::commands::resolve_lattice;
use crate::report::{
    parse_f64_list, per_mode, read_input, to_json, vec_vals, EnvelopeOut, ForgeError, LatticeOut,
    Manifest, Sink,
};
use crate::SbsArgs;

#[derive(Serialize)]
#[serde(tag = "type")]
enum ElementOut {
    #[serde(rename = "CT")]
    Ct { vector: Vec<f64> },
    Rz { angle: f64 },
    Rx { angle: f64 },
}

#[derive(Serialize)]
struct RoundOut {
    index: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: f64,
    alpha_correction: f64,
    beta_correction: f64,
    gauge_angle: f64,
    ops: Vec<ElementOut>,
}

#[derive(Serialize)]
struct SbsOut {
    lattice: LatticeOut,
    envelope: EnvelopeOut,
    rounds: Vec<RoundOut>,
}

/// Frame spec: `identity`, `diag:a,b,...` (all 2N entries), `shear:c`
/// (lower-triangular per-mode shear), or a JSON matrix file.
fn parse_frame(text: &str, modes: usize) -> Result<RealMatrix, ForgeError> {
    let dim = 2 * modes;
    let m = if text == "identity" {
        RealMatrix::identity(dim, dim)
    } else if let Some(list) = text.strip_prefix("diag:") {
        let vals = parse_f64_list(list, "frame diagonal")?;
        if vals.len() != dim {
            return Err(ForgeError::Config(format!(
                "frame diagonal needs {dim} entries, got {}",
                vals.len()
            )));
        }
        RealMatrix::from_diagonal(&RealVector::from_row_slice(&vals))
    } else if let Some(c) = text.strip_prefix("shear:") {
        let c = c
            .trim()
            .parse::<f64>()
            .map_err(|_| ForgeError::Config(format!("invalid shear value {c:?}")))?;
        let mut m = RealMatrix::identity(dim, dim);
        for j in 0..modes {
            m[(modes + j, j)] = c;
        }
        m
    } else if Path::new(text).is_file() {
        let rows: Vec<Vec<f64>> = serde_json::from_str(&read_input(Path::new(text))?)
            .map_err(|err| ForgeError::Config(format!("frame file {text}: {err}")))?;
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(ForgeError::Config(format!(
                "frame matrix must be {dim}x{dim}"
            )));
        }
        RealMatrix::from_fn(dim, dim, |i, j| rows[i][j])
    } else {
        return Err(ForgeError::Config(format!(
            "unknown frame {text:?} (expected identity, diag:..., shear:..., or a file)"
        )));
    };
    let w = omega_real(modes);
    let defect = (&m * &w * m.transpose() - &w).abs().max();
    if defect > 1e-9 {
        return Err(ForgeError::Config(format!(
            "frame is not symplectic (defect {defect:.2e})"
        )));
    }
    Ok(m)
}

pub fn run(args: &SbsArgs) -> Result<(), ForgeError> {
    let lat = resolve_lattice(&args.lattice, args.modes)?;
    let dim = lat.dim();
    let epsilons = per_mode(parse_f64_list(&args.epsilon, "epsilon")?, lat.n, "epsilon")?;

    let mu_vals = parse_f64_list(&args.mu, "mu")?;
    let mu = if mu_vals.len() == 1 {
        RealVector::from_element(dim, mu_vals[0])
    } else if mu_vals.len() == dim {
        RealVector::from_row_slice(&mu_vals)
    } else {
        return Err(ForgeError::Config(format!(
            "mu needs 1 or {dim} values, got {}",
            mu_vals.len()
        )));
    };

    let frame = parse_frame(&args.frame, lat.n)?;
    let env0 = initial_envelope(&epsilons)?;
    let env = Envelope::new(&frame * &env0.sigma_e * frame.transpose(), mu)?;
    let circuit = sbs_circuit(&lat, &env)?;

    let out = SbsOut {
        lattice: LatticeOut::from(&lat),
        envelope: EnvelopeOut::from(&circuit.envelope),
        rounds: circuit
            .rounds
            .iter()
            .map(|r| RoundOut {
                index: r.index,
                alpha: vec_vals(&r.alpha),
                beta: vec_vals(&r.beta),
                gamma: r.gamma,
                alpha_correction: r.alpha_correction,
                beta_correction: r.beta_correction,
                gauge_angle: r.gauge_angle,
                ops: r
                    .elements
                    .iter()
                    .map(|el| match el {
                        SbsElement::ControlledTranslation(v) => {
                            ElementOut::Ct { vector: vec_vals(v) }
                        }
                        SbsElement::RotationZ(angle) => ElementOut::Rz { angle: *angle },
                        SbsElement::RotationX(angle) => ElementOut::Rx { angle: *angle },
                    })
                    .collect(),
            })
            .collect(),
    };

    let sink = Sink::from_opt(&args.out);
    let mut manifest = Manifest::new(
        "sbs",
        json!({
            "lattice": args.lattice,
            "modes": lat.n,
            "epsilons": epsilons,
            "mu": mu_vals,
            "M": args.frame,
        }),
    );
    manifest.record(sink.write(&to_json(&out)?)?);
    manifest.write(&sink, &args.manifest)
}
