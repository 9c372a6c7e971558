use gkp_core::envelope::initial_envelope;
use gkp_core::lattice::{lattice_from_input, LatticeInput};
use gkp_core::phase_sim::{
    numeric_wigner, prepare_logical_state, GridSpec, StateSpec, TruncationPolicy,
};
use gkp_core::prelude::*;
use serde::Deserialize;
use serde_json::json;

use crate::report::{parse_f64_list, per_mode, read_input, ForgeError, Manifest, Sink};
use crate::WignerArgs;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    lattice: LatticeField,
    #[serde(default)]
    logicals: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    gauge: Option<Vec<u8>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LatticeField {
    Name(String),
    Input(LatticeInput),
}

fn parse_grid(text: &str) -> Result<(f64, f64, usize), ForgeError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(ForgeError::Config(format!(
            "grid must be min:max:resolution, got {text:?}"
        )));
    }
    let min = parts[0]
        .parse::<f64>()
        .map_err(|_| ForgeError::Config(format!("invalid grid minimum {:?}", parts[0])))?;
    let max = parts[1]
        .parse::<f64>()
        .map_err(|_| ForgeError::Config(format!("invalid grid maximum {:?}", parts[1])))?;
    let res = parts[2]
        .parse::<usize>()
        .map_err(|_| ForgeError::Config(format!("invalid grid resolution {:?}", parts[2])))?;
    Ok((min, max, res))
}

pub fn run(args: &WignerArgs) -> Result<(), ForgeError> {
    let text = read_input(&args.state)?;
    let file: StateFile = serde_json::from_str(&text)
        .map_err(|err| ForgeError::Config(format!("state file {}: {err}", args.state.display())))?;

    let code = match &file.lattice {
        LatticeField::Name(name) => lattice_from_input(&LatticeInput {
            s: None,
            name: Some(name.clone()),
            modes: None,
        })?,
        LatticeField::Input(input) => lattice_from_input(input)?,
    };

    let dim = code.dim();
    let gauge = file.gauge.clone().unwrap_or_else(|| vec![0; dim]);
    let spec = match &file.logicals {
        Some(rows) if !rows.is_empty() => {
            let mut logicals = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                if row.len() != dim {
                    return Err(ForgeError::Config(format!(
                        "logical #{i} has {} entries, state dimension is {dim}",
                        row.len()
                    )));
                }
                logicals.push(RealVector::from_row_slice(row));
            }
            StateSpec::from_logicals(&code, &logicals, gauge)?
        }
        _ => {
            let zero = StateSpec::logical_zero(&code)?;
            StateSpec::new(zero.state_lattice, gauge)?
        }
    };

    let epsilons = per_mode(parse_f64_list(&args.epsilon, "epsilon")?, code.n, "epsilon")?;
    let env = initial_envelope(&epsilons)?;
    let state = prepare_logical_state(&spec, &env, &TruncationPolicy::default())?;

    let (min, max, resolution) = parse_grid(&args.grid)?;
    let axes = match &args.axes {
        Some(text) => {
            let parts: Vec<&str> = text.split(',').collect();
            let bad = || ForgeError::Config(format!("axes must be i,j, got {text:?}"));
            if parts.len() != 2 {
                return Err(bad());
            }
            let i = parts[0].trim().parse::<usize>().map_err(|_| bad())?;
            let j = parts[1].trim().parse::<usize>().map_err(|_| bad())?;
            (i, j)
        }
        None => (0, code.n),
    };
    let grid = GridSpec {
        axes,
        min,
        max,
        resolution,
        section: None,
    };
    let field = numeric_wigner(&state, &grid)?;

    let mut csv = String::from("x,p,W\n");
    for (i, &x) in field.xs.iter().enumerate() {
        for (j, &p) in field.ys.iter().enumerate() {
            csv.push_str(&format!("{x},{p},{}\n", field.values[(i, j)]));
        }
    }

    let sink = Sink::from_opt(&args.out);
    let mut manifest = Manifest::new(
        "wigner",
        json!({
            "state": args.state.display().to_string(),
            "epsilons": epsilons,
            "grid": {"min": min, "max": max, "resolution": resolution},
            "axes": [axes.0, axes.1],
            "peaks": state.num_peaks(),
        }),
    );
    manifest.record(sink.write(csv.as_bytes())?);
    manifest.write(&sink, &args.manifest)
}
