use gkp_core::compiler::{circuit_total, compile_circuit, CompilerKind, LogicalGate};
use gkp_core::envelope::initial_envelope;
use gkp_core::stab_group::build_generators;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::resolve_lattice;
use crate::report::{
    fresh_seed, parse_f64_list, per_mode, read_input, to_json, EnvelopeOut, ForgeError, Manifest,
    OpOut, Sink,
};
use crate::CompileArgs;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GateIn {
    gate: String,
    #[serde(default)]
    qubits: Vec<usize>,
}

#[derive(Serialize)]
struct GateOut {
    gate: &'static str,
    qubits: Vec<usize>,
    word: Vec<(usize, i8)>,
    total: OpOut,
    d_sigma2: f64,
    d_mu2: f64,
}

#[derive(Serialize)]
struct CompileOut {
    kind: String,
    walk_bound: usize,
    gates: Vec<GateOut>,
    total: OpOut,
    final_envelope: EnvelopeOut,
    trajectory: Trajectory,
}

#[derive(Serialize)]
struct Trajectory {
    d_sigma2: Vec<f64>,
    d_mu2: Vec<f64>,
}

pub fn run(args: &CompileArgs) -> Result<(), ForgeError> {
    let text = read_input(&args.circuit)?;
    let specs: Vec<GateIn> = serde_json::from_str(&text).map_err(|err| {
        ForgeError::Config(format!("circuit file {}: {err}", args.circuit.display()))
    })?;
    if specs.is_empty() {
        return Err(ForgeError::Config("circuit is empty".into()));
    }
    let gates: Vec<LogicalGate> = specs
        .iter()
        .map(|g| Ok(LogicalGate::from_name(&g.gate, &g.qubits)?))
        .collect::<Result<_, ForgeError>>()?;

    let span = gates
        .iter()
        .flat_map(|g| g.qubits())
        .max()
        .map(|q| q + 1)
        .unwrap_or(1);
    let lat = resolve_lattice(&args.lattice, args.modes.or(Some(span)))?;
    for gate in &gates {
        gate.validate(lat.n).map_err(ForgeError::from)?;
    }

    let epsilons = per_mode(parse_f64_list(&args.epsilon, "epsilon")?, lat.n, "epsilon")?;
    let env0 = initial_envelope(&epsilons)?;
    let gens = build_generators(&lat)?;

    let mut seed_used = None;
    let kind = match args.kind.as_str() {
        "constant" => CompilerKind::Constant,
        "random" => {
            let seed = args.seed.unwrap_or_else(|| {
                let s = fresh_seed();
                eprintln!("seed: {s}");
                s
            });
            seed_used = Some(seed);
            CompilerKind::RandomWalk { seed }
        }
        "gs" => CompilerKind::GaussianStabilizer {
            walk_length: args.n,
        },
        other => return Err(ForgeError::Config(format!("unknown kind {other:?}"))),
    };

    let compiled = compile_circuit(&gates, &env0, kind, &lat, &gens)?;
    let total = circuit_total(&compiled, lat.n)?;

    let out = CompileOut {
        kind: args.kind.clone(),
        walk_bound: args.n,
        gates: gates
            .iter()
            .zip(&compiled)
            .map(|(g, c)| GateOut {
                gate: g.name(),
                qubits: g.qubits(),
                word: c.word.sequence.clone(),
                total: OpOut::from(&c.total),
                d_sigma2: c.metrics_after.0,
                d_mu2: c.metrics_after.1,
            })
            .collect(),
        total: OpOut::from(&total),
        final_envelope: EnvelopeOut::from(
            &compiled.last().expect("nonempty circuit").env_after,
        ),
        trajectory: Trajectory {
            d_sigma2: compiled.iter().map(|c| c.metrics_after.0).collect(),
            d_mu2: compiled.iter().map(|c| c.metrics_after.1).collect(),
        },
    };

    let sink = Sink::from_opt(&args.out);
    let mut manifest = Manifest::new(
        "compile",
        json!({
            "lattice": args.lattice,
            "modes": lat.n,
            "circuit": args.circuit.display().to_string(),
            "kind": args.kind,
            "walk_bound": args.n,
            "epsilons": epsilons,
        }),
    );
    manifest.seed = seed_used;
    manifest.record(sink.write(&to_json(&out)?)?);
    manifest.write(&sink, &args.manifest)
}
