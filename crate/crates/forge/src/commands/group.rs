use gkp_core::lattice::pauli_cosets;
use gkp_core::stab_group::{build_generators, enumerate_walks};
use serde::Serialize;
use serde_json::json;

use crate::commands::resolve_lattice;
use crate::report::{int_rows, mat_rows, to_json, vec_vals, ForgeError, LatticeOut, Manifest, Sink};
use crate::GroupArgs;

#[derive(Serialize)]
struct CosetOut {
    index: usize,
    x: Vec<i64>,
    z: Vec<i64>,
    label: String,
}

#[derive(Serialize)]
struct GeneratorOut {
    name: String,
    #[serde(rename = "X")]
    x: Vec<Vec<i64>>,
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    coset: CosetOut,
}

#[derive(Serialize)]
struct WalkOut {
    word: Vec<(usize, i8)>,
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
    lambda: Vec<f64>,
}

#[derive(Serialize)]
struct GroupOut {
    lattice: LatticeOut,
    generators: Vec<GeneratorOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    walks: Option<Vec<WalkOut>>,
}

pub fn run(args: &GroupArgs) -> Result<(), ForgeError> {
    let lat = resolve_lattice(&args.lattice, args.modes)?;
    let gens = build_generators(&lat)?;
    let cosets = pauli_cosets(&lat)?;

    let generators = gens
        .iter()
        .map(|g| {
            let c = &cosets[g.coset_image];
            GeneratorOut {
                name: g.name.clone(),
                x: int_rows(&g.x.x),
                m: mat_rows(&g.op.m),
                lambda: vec_vals(&g.op.lambda),
                coset: CosetOut {
                    index: g.coset_image,
                    x: c.label.x.clone(),
                    z: c.label.z.clone(),
                    label: c.label.to_string(),
                },
            }
        })
        .collect();

    let walks = match args.walks {
        Some(n) => Some(
            enumerate_walks(&gens, n)?
                .into_iter()
                .map(|w| WalkOut {
                    word: w.sequence,
                    m: mat_rows(&w.resolved.m),
                    lambda: vec_vals(&w.resolved.lambda),
                })
                .collect(),
        ),
        None => None,
    };

    let out = GroupOut {
        lattice: LatticeOut::from(&lat),
        generators,
        walks,
    };

    let sink = Sink::from_opt(&args.out);
    let mut manifest = Manifest::new(
        "group",
        json!({
            "lattice": args.lattice,
            "modes": lat.n,
            "walks": args.walks,
        }),
    );
    manifest.record(sink.write(&to_json(&out)?)?);
    manifest.write(&sink, &args.manifest)
}
