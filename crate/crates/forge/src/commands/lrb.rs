use std::fmt::Write as _;
use std::path::PathBuf;

use gkp_core::compiler::{CompilerKind, DEFAULT_WALK_LENGTH};
use gkp_core::lrb::{amelioration_sweep, fit_decay, run_lrb, GateSet, LrbConfig, LrbRun};
use gkp_core::phase_sim::TruncationPolicy;
use gkp_core::prelude::*;
use gkp_core::stab_group::build_generators;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::commands::configure_workers;
use crate::report::{fresh_seed, parse_f64_list, read_input, to_json, ForgeError, Manifest, Sink};
use crate::LrbArgs;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n_qubits: usize,
    gamma: f64,
    #[serde(default)]
    gamma_phi: f64,
    #[serde(default)]
    epsilons: Option<Vec<f64>>,
    #[serde(default)]
    lengths: Option<Vec<usize>>,
    #[serde(default)]
    samples: Option<usize>,
    #[serde(default)]
    kind: Option<KindSpec>,
    #[serde(default)]
    kinds: Option<Vec<KindSpec>>,
    #[serde(default)]
    gate_set: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    include_inverse: Option<bool>,
    #[serde(default)]
    truncation: Option<TruncationFile>,
}

#[derive(Clone, Deserialize)]
#[serde(untagged)]
enum KindSpec {
    Name(String),
    Detail(KindDetail),
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct KindDetail {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    walk_length: Option<usize>,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruncationFile {
    #[serde(default)]
    rel_floor: Option<f64>,
    #[serde(default)]
    boundary: Option<f64>,
    #[serde(default)]
    max_peaks: Option<usize>,
}

fn resolve_kind(spec: &KindSpec) -> Result<(String, CompilerKind), ForgeError> {
    let detail = match spec {
        KindSpec::Name(name) => KindDetail {
            kind: name.clone(),
            seed: None,
            walk_length: None,
        },
        KindSpec::Detail(detail) => detail.clone(),
    };
    let kind = match detail.kind.as_str() {
        "constant" => CompilerKind::Constant,
        "random" | "rw" | "random_walk" => CompilerKind::RandomWalk {
            seed: detail.seed.unwrap_or(0),
        },
        "gs" | "gaussian_stabilizer" => CompilerKind::GaussianStabilizer {
            walk_length: detail.walk_length.unwrap_or(DEFAULT_WALK_LENGTH),
        },
        other => {
            return Err(ForgeError::Config(format!(
                "unknown compiler kind {other:?}"
            )))
        }
    };
    Ok((kind_name(&kind).to_string(), kind))
}

fn kind_name(kind: &CompilerKind) -> &'static str {
    match kind {
        CompilerKind::Constant => "constant",
        CompilerKind::RandomWalk { .. } => "random_walk",
        CompilerKind::GaussianStabilizer { .. } => "gaussian_stabilizer",
    }
}

fn kind_json(kind: &CompilerKind) -> Value {
    match kind {
        CompilerKind::Constant => json!({"type": "constant"}),
        CompilerKind::RandomWalk { seed } => json!({"type": "random_walk", "seed": seed}),
        CompilerKind::GaussianStabilizer { walk_length } => {
            json!({"type": "gaussian_stabilizer", "walk_length": walk_length})
        }
    }
}

struct Resolved {
    base: LrbConfig,
    kinds: Vec<(String, CompilerKind)>,
    gate_set_name: &'static str,
}

fn resolve_config(file: &ConfigFile, seed_flag: Option<u64>) -> Result<Resolved, ForgeError> {
    let specs: Vec<KindSpec> = match (&file.kind, &file.kinds) {
        (Some(_), Some(_)) => {
            return Err(ForgeError::Config(
                "config sets both \"kind\" and \"kinds\"".into(),
            ))
        }
        (Some(one), None) => vec![one.clone()],
        (None, Some(list)) if !list.is_empty() => list.clone(),
        _ => vec![
            KindSpec::Name("constant".into()),
            KindSpec::Name("random_walk".into()),
            KindSpec::Name("gaussian_stabilizer".into()),
        ],
    };
    let kinds = specs
        .iter()
        .map(resolve_kind)
        .collect::<Result<Vec<_>, _>>()?;
    for (i, (name, _)) in kinds.iter().enumerate() {
        if kinds[..i].iter().any(|(prev, _)| prev == name) {
            return Err(ForgeError::Config(format!("duplicate compiler kind {name}")));
        }
    }

    let (gate_set_name, gate_set) = match file.gate_set.as_deref() {
        None | Some("full") | Some("full_clifford") => ("full_clifford", GateSet::FullClifford),
        Some("two_qubit") | Some("two_qubit_only") => ("two_qubit_only", GateSet::TwoQubitOnly),
        Some(other) => {
            return Err(ForgeError::Config(format!("unknown gate set {other:?}")))
        }
    };

    let seed = match seed_flag.or(file.seed) {
        Some(seed) => seed,
        None => {
            let seed = fresh_seed();
            eprintln!("seed: {seed}");
            seed
        }
    };

    let defaults = TruncationPolicy::default();
    let truncation = match &file.truncation {
        Some(t) => TruncationPolicy {
            rel_floor: t.rel_floor.unwrap_or(defaults.rel_floor),
            boundary: t.boundary.unwrap_or(defaults.boundary),
            max_peaks: t.max_peaks.unwrap_or(defaults.max_peaks),
        },
        None => defaults,
    };

    let base = LrbConfig {
        n_qubits: file.n_qubits,
        gamma: file.gamma,
        gamma_phi: file.gamma_phi,
        epsilons: file
            .epsilons
            .clone()
            .unwrap_or_else(|| vec![0.1; file.n_qubits]),
        lengths: file.lengths.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32]),
        samples: file.samples.unwrap_or(100),
        kind: kinds[0].1.clone(),
        gate_set,
        seed,
        include_inverse: file.include_inverse.unwrap_or(true),
        truncation,
    };
    Ok(Resolved {
        base,
        kinds,
        gate_set_name,
    })
}

fn resolved_json(r: &Resolved, sweep: &Option<Vec<f64>>) -> Value {
    json!({
        "n_qubits": r.base.n_qubits,
        "gamma": r.base.gamma,
        "gamma_phi": r.base.gamma_phi,
        "epsilons": r.base.epsilons,
        "lengths": r.base.lengths,
        "samples": r.base.samples,
        "kinds": r.kinds.iter().map(|(_, k)| kind_json(k)).collect::<Vec<_>>(),
        "gate_set": r.gate_set_name,
        "seed": r.base.seed,
        "include_inverse": r.base.include_inverse,
        "truncation": {
            "rel_floor": r.base.truncation.rel_floor,
            "boundary": r.base.truncation.boundary,
            "max_peaks": r.base.truncation.max_peaks,
        },
        "sweep_gamma": sweep,
    })
}

fn push_cell(line: &mut String, value: Option<f64>) {
    if let Some(v) = value {
        let _ = write!(line, "{v}");
    }
}

fn curve_csv(runs: &[(String, LrbRun)]) -> String {
    let mut csv = String::from("kind,length,mean,stderr,n\n");
    for (name, run) in runs {
        let c = &run.curve;
        for i in 0..c.lengths.len() {
            let _ = writeln!(
                csv,
                "{name},{},{},{},{}",
                c.lengths[i], c.mean[i], c.stderr[i], c.counts[i]
            );
        }
    }
    csv
}

fn metrics_csv(runs: &[(String, LrbRun)]) -> String {
    let mut csv = String::from(
        "kind,length,mean_max_sigma,err_max_sigma,mean_max_mu,err_max_mu\n",
    );
    for (name, run) in runs {
        let m = &run.metrics;
        for i in 0..run.curve.lengths.len() {
            let _ = writeln!(
                csv,
                "{name},{},{},{},{},{}",
                run.curve.lengths[i],
                m.mean_max_sigma[i],
                m.err_max_sigma[i],
                m.mean_max_mu[i],
                m.err_max_mu[i]
            );
        }
    }
    csv
}

fn fits_json(runs: &[(String, LrbRun)]) -> Result<Vec<u8>, ForgeError> {
    let mut fits = serde_json::Map::new();
    for (name, run) in runs {
        let entry = match fit_decay(&run.curve) {
            Ok(fit) => json!({
                "amplitude": fit.amplitude,
                "a": fit.a,
                "b": fit.b,
                "baseline": fit.baseline,
                "lifetime": fit.lifetime,
                "lifetime_std": fit.lifetime_std,
                "residual": fit.residual,
            }),
            Err(err) => json!({"error": err.to_string()}),
        };
        fits.insert(name.clone(), entry);
    }
    to_json(&Value::Object(fits))
}

pub fn run(args: &LrbArgs) -> Result<(), ForgeError> {
    let text = read_input(&args.config)?;
    let file: ConfigFile = serde_json::from_str(&text)
        .map_err(|err| ForgeError::Config(format!("{}: {err}", args.config.display())))?;
    let sweep = match &args.sweep_gamma {
        Some(list) => Some(parse_f64_list(list, "sweep gamma")?),
        None => None,
    };
    let resolved = resolve_config(&file, args.seed)?;
    let workers = configure_workers(args.workers)?;

    let lat = GkpLattice::square(resolved.base.n_qubits)?;
    let gens = build_generators(&lat)?;

    let sink = Sink::file(&args.out);
    let mut manifest = Manifest::new("lrb", resolved_json(&resolved, &sweep));
    manifest.seed = Some(resolved.base.seed);
    manifest.workers = Some(workers);

    if let Some(gammas) = &sweep {
        let mut base = resolved.base.clone();
        // the sweep pins its own kinds; keep only a configured walk length
        let walk_length = resolved
            .kinds
            .iter()
            .find_map(|(_, k)| match k {
                CompilerKind::GaussianStabilizer { walk_length } => Some(*walk_length),
                _ => None,
            })
            .unwrap_or(DEFAULT_WALK_LENGTH);
        base.kind = CompilerKind::GaussianStabilizer { walk_length };
        let points = amelioration_sweep(&base, gammas, &lat, &gens)?;

        let mut csv = String::from("gamma,skipped,t_gs,t_rw,ratio\n");
        for p in &points {
            let mut line = format!("{},{},", p.gamma, p.skipped_noiseless);
            push_cell(&mut line, p.t_walk);
            line.push(',');
            push_cell(&mut line, p.t_random);
            line.push(',');
            push_cell(&mut line, p.ratio);
            csv.push_str(&line);
            csv.push('\n');
        }
        manifest.record(sink.write(csv.as_bytes())?);
        return manifest.write(&sink, &args.manifest);
    }

    let mut runs = Vec::with_capacity(resolved.kinds.len());
    for (name, kind) in &resolved.kinds {
        let mut cfg = resolved.base.clone();
        cfg.kind = kind.clone();
        runs.push((name.clone(), run_lrb(&cfg, &lat, &gens)?));
    }

    manifest.record(sink.write(curve_csv(&runs).as_bytes())?);

    let fits_path = match &args.fits {
        Some(path) => path.clone(),
        None => args
            .out
            .parent()
            .map(|dir| dir.join("fits.json"))
            .unwrap_or_else(|| PathBuf::from("fits.json")),
    };
    let fits_sink = Sink::file(&fits_path);
    manifest.record(fits_sink.write(&fits_json(&runs)?)?);

    if let Some(path) = &args.metrics {
        let metrics_sink = Sink::file(path);
        manifest.record(metrics_sink.write(metrics_csv(&runs).as_bytes())?);
    }

    manifest.write(&sink, &args.manifest)
}
