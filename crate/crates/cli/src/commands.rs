use std::fs;
use std::path::{Path, PathBuf};

use psicomplete::adversary::{attack_with_probe, theorem2_attack, AdversaryError};
use psicomplete::harness::{child_rng, haar_random_state, round_trip_sweep, ExperimentConfig};
use psicomplete::io::{
    self, CountsFile, ExpectationsFile, FormatError, PovmFile, ProbsFile,
};
use psicomplete::povm::{is_rank_one, Provenance};
use psicomplete::reconstruct::{
    certify_failure_set, reconstruct_from_expectations, reconstruct_from_frequencies,
    reconstruct_from_probabilities, AmbiguityCertificate, ReconstructError, ReconstructionReport,
    ReconstructionStatus, DEFAULT_FAILURE_TOL, DEFAULT_PATTERN_TOL,
};
use psicomplete::{probabilities, validate_povm, FscConstruction, Povm, PovmError};
use serde::Serialize;
use thiserror::Error;

use crate::GlobalOpts;

/// Tolerance used to decide that an input file really is the construction.
const CONSTRUCTION_MATCH_TOL: f64 = 1e-10;
/// Cap on (d-1)-subsets tried by `attack` without a probe.
const MAX_SUBSETS: usize = 256;
/// Random probes tried on POVMs that are not rank one.
const RANDOM_PROBES: u64 = 100;

/// Input errors; all map to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Povm(#[from] PovmError),

    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),

    #[error("{path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Default)]
pub struct CommandOutcome {
    /// 0 success, 1 verification outcome contrary to the default expectation.
    pub exit_code: u8,
    pub artifacts_written: Vec<PathBuf>,
}

impl CommandOutcome {
    fn new(exit_code: u8) -> Self {
        Self {
            exit_code,
            artifacts_written: Vec::new(),
        }
    }
}

pub enum DataSource {
    Probs(PathBuf),
    Counts(PathBuf),
    Expectations(PathBuf),
}

fn out_path(g: &GlobalOpts) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from("-"))
}

fn emit<T: Serialize>(path: &Path, value: &T, outcome: &mut CommandOutcome) -> Result<(), CliError> {
    io::write_json(path, value)?;
    if path != Path::new("-") {
        outcome.artifacts_written.push(path.to_path_buf());
    }
    Ok(())
}

fn companion_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.operators.json"))
}

pub fn build(g: &GlobalOpts, d: usize) -> Result<CommandOutcome, CliError> {
    if d < 2 {
        return Err(CliError::Usage(format!("-d {d}: the construction needs d >= 2")));
    }
    let construction = FscConstruction::new(d)?;
    let report = validate_povm(construction.povm());
    if !report.is_valid() {
        for v in &report.violations {
            eprintln!("invalid construction: {v}");
        }
        return Ok(CommandOutcome::new(1));
    }
    let mut outcome = CommandOutcome::new(0);
    let path = out_path(g);
    emit(&path, &PovmFile::from(construction.povm().clone()), &mut outcome)?;
    if path != Path::new("-") {
        let ops = PovmFile::from(construction.operators().as_povm());
        emit(&companion_path(&path), &ops, &mut outcome)?;
    }
    Ok(outcome)
}

pub fn probs(g: &GlobalOpts, povm_path: &Path, state_path: &Path) -> Result<CommandOutcome, CliError> {
    let povm = io::read_povm(povm_path)?;
    let state = io::read_state(state_path)?;
    if povm.dim() != state.dim() {
        return Err(PovmError::DimensionMismatch {
            expected: povm.dim(),
            found: state.dim(),
        }
        .into());
    }
    let report = validate_povm(&povm);
    if !report.is_valid() {
        for v in &report.violations {
            eprintln!("invalid POVM: {v}");
        }
        return Ok(CommandOutcome::new(1));
    }
    let p = probabilities(&povm, &state)?;
    println!("{}", p.iter().map(f64::to_string).collect::<Vec<_>>().join(" "));
    let mut outcome = CommandOutcome::new(0);
    if let Some(path) = g.out.as_deref().filter(|p| *p != Path::new("-")) {
        emit(path, &ProbsFile { probs: p }, &mut outcome)?;
    }
    Ok(outcome)
}

/// Rebuilds the construction for `povm` after checking that the file (or
/// its companion operator file) actually holds it.
fn construction_for(povm: &Povm, operators: Option<&Path>) -> Result<FscConstruction, CliError> {
    let construction = FscConstruction::new(povm.dim())?;
    let same = |a: &Povm, b: &Povm| {
        a.len() == b.len()
            && a.elements()
                .iter()
                .zip(b.elements())
                .all(|(x, y)| x.matrix().max_abs_diff(y.matrix()) <= CONSTRUCTION_MATCH_TOL)
    };
    match (povm.provenance(), operators) {
        (_, Some(path)) => {
            let ops = io::read_povm(path)?;
            if !same(&ops, &construction.operators().as_povm()) {
                return Err(CliError::Usage(format!(
                    "{}: operators are not the {}-element construction",
                    path.display(),
                    2 * povm.dim()
                )));
            }
            if !same(povm, construction.povm()) {
                return Err(CliError::Usage("POVM is not the normalization of the supplied operators".into()));
            }
        }
        (Provenance::ConstructedFsc, None) => {
            if !same(povm, construction.povm()) {
                return Err(CliError::Usage(
                    "POVM is marked ConstructedFSC but does not match the construction".into(),
                ));
            }
        }
        (_, None) => {
            return Err(CliError::Usage(
                "reconstruction needs a ConstructedFSC POVM or an --operators companion file".into(),
            ))
        }
    }
    Ok(construction)
}

#[derive(Serialize)]
struct ReconstructionOutput<'a> {
    #[serde(flatten)]
    report: &'a ReconstructionReport,
    certificates: Vec<AmbiguityCertificate>,
}

pub fn reconstruct(
    g: &GlobalOpts,
    povm_path: &Path,
    data: DataSource,
    operators: Option<&Path>,
) -> Result<CommandOutcome, CliError> {
    let povm = io::read_povm(povm_path)?;
    let construction = construction_for(&povm, operators)?;
    let tol = g.tol.unwrap_or(DEFAULT_PATTERN_TOL);
    let report = match data {
        DataSource::Probs(path) => {
            let f: ProbsFile = io::read_json(&path)?;
            reconstruct_from_probabilities(&construction, &f.probs, tol)?
        }
        DataSource::Counts(path) => {
            let f: CountsFile = io::read_json(&path)?;
            let freqs = f.frequencies().map_err(|m| CliError::Usage(format!("{}: {m}", path.display())))?;
            reconstruct_from_frequencies(&construction, &freqs, tol)?
        }
        DataSource::Expectations(path) => {
            let f: ExpectationsFile = io::read_json(&path)?;
            reconstruct_from_expectations(construction.operators(), &f.values, tol)?
        }
    };
    let certificates = if report.status == ReconstructionStatus::GaugeDegenerate {
        Vec::new()
    } else {
        certify_failure_set(&report.operator_frame, DEFAULT_FAILURE_TOL)?
    };
    eprintln!("status: {:?}", report.status);
    let code = if report.status.is_unique() { 0 } else { 1 };
    let mut outcome = CommandOutcome::new(code);
    emit(
        &out_path(g),
        &ReconstructionOutput {
            report: &report,
            certificates,
        },
        &mut outcome,
    )?;
    Ok(outcome)
}

pub fn certify(g: &GlobalOpts, state_path: &Path, povm_path: Option<&Path>) -> Result<CommandOutcome, CliError> {
    let state = io::read_state(state_path)?;
    let frame_state = match povm_path {
        Some(p) => {
            let povm = io::read_povm(p)?;
            if povm.dim() != state.dim() {
                return Err(PovmError::DimensionMismatch {
                    expected: povm.dim(),
                    found: state.dim(),
                }
                .into());
            }
            construction_for(&povm, None)?.to_operator_frame(&state)?
        }
        None => state,
    };
    let certificates = certify_failure_set(&frame_state, g.tol.unwrap_or(DEFAULT_FAILURE_TOL))?;
    eprintln!("{} certificate(s)", certificates.len());
    let mut outcome = CommandOutcome::new(if certificates.is_empty() { 0 } else { 1 });
    emit(&out_path(g), &certificates, &mut outcome)?;
    Ok(outcome)
}

/// Lexicographic k-subsets of 0..n.
fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = if k <= n { Some((0..k).collect()) } else { None };
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let mut next = out.clone();
        let mut i = k;
        let advanced = loop {
            if i == 0 {
                break false;
            }
            i -= 1;
            if next[i] < n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                break true;
            }
        };
        current = advanced.then_some(next);
        Some(out)
    })
}

pub fn attack(
    g: &GlobalOpts,
    povm_path: &Path,
    phi_path: Option<&Path>,
    subset: Option<&[usize]>,
) -> Result<CommandOutcome, CliError> {
    let povm = io::read_povm(povm_path)?;
    let d = povm.dim();

    let mut attempts = 0usize;
    let mut handle = |result: Result<_, AdversaryError>| -> Result<Option<_>, CliError> {
        attempts += 1;
        match result {
            Ok(pair) => Ok(Some(pair)),
            Err(
                AdversaryError::KPhiTooLarge { .. }
                | AdversaryError::NoNullVector { .. }
                | AdversaryError::ProbeNotAnnihilated { .. }
                | AdversaryError::VerificationFailed { .. },
            ) => Ok(None),
            Err(AdversaryError::Povm(e)) => Err(e.into()),
            Err(e) => Err(CliError::Usage(e.to_string())),
        }
    };

    let mut found = None;
    if let Some(path) = phi_path {
        let phi = io::read_state(path)?;
        found = handle(attack_with_probe(&povm, &phi))?;
    } else {
        let rank_one = povm
            .elements()
            .iter()
            .map(is_rank_one)
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .all(|r| r);
        if let Some(s) = subset {
            found = handle(theorem2_attack(&povm, Some(s)))?;
        } else if rank_one && povm.len() + 1 >= d {
            for s in combinations(povm.len(), d - 1).take(MAX_SUBSETS) {
                found = handle(theorem2_attack(&povm, Some(&s)))?;
                if found.is_some() {
                    break;
                }
            }
        } else {
            for k in 0..RANDOM_PROBES {
                let phi = haar_random_state(d, &mut child_rng(g.seed, k));
                found = handle(attack_with_probe(&povm, &phi))?;
                if found.is_some() {
                    break;
                }
            }
        }
    }

    match found {
        Some(pair) => {
            eprintln!(
                "counterexample: K_phi = {}, max probability gap {:e}, overlap {:e}",
                pair.k_phi, pair.max_prob_gap, pair.overlap
            );
            let mut outcome = CommandOutcome::new(0);
            emit(&out_path(g), &pair, &mut outcome)?;
            Ok(outcome)
        }
        None => {
            eprintln!(
                "no counterexample at {attempts} attempted probe(s); every probe is seen by at least {} elements (this does not prove the POVM identifies all pure states)",
                2 * d - 1
            );
            Ok(CommandOutcome::new(1))
        }
    }
}

fn parse_range(spec: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--d {spec}: expected N or LO..HI"));
    let (lo, hi) = match spec.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim_start_matches('=').trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let n = spec.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo < 2 || hi < lo {
        return Err(CliError::Usage(format!("--d {spec}: need 2 <= LO <= HI")));
    }
    Ok((lo, hi))
}

pub fn sweep(g: &GlobalOpts, d_spec: &str, samples: usize, shots: Option<u64>) -> Result<CommandOutcome, CliError> {
    let (lo, hi) = parse_range(d_spec)?;
    if samples == 0 || shots == Some(0) {
        return Err(CliError::Usage("--samples and --shots must be positive".into()));
    }
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    let mut outcome = CommandOutcome::new(0);
    for d in lo..=hi {
        let cfg = ExperimentConfig {
            d,
            samples,
            shots,
            seed: g.seed,
            tol: g.tol.unwrap_or(DEFAULT_PATTERN_TOL),
        };
        let result = round_trip_sweep(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
        let s = &result.summary;
        println!(
            "d={d} samples={samples} shots={} mean_infidelity={:e} max_infidelity={:e} failures={} gauge_degenerate={}",
            shots.map_or("exact".to_string(), |n| n.to_string()),
            s.mean_infidelity,
            s.max_infidelity,
            s.failure_count,
            s.gauge_degenerate_count
        );
        if shots.is_none() && s.failure_count > 0 {
            outcome.exit_code = 1;
        }
        let json = dir.join(format!("sweep_d{d}.json"));
        emit(&json, &result, &mut outcome)?;
        let csv_path = dir.join(format!("sweep_d{d}.csv"));
        let file = fs::File::create(&csv_path).map_err(|source| CliError::Write {
            path: csv_path.display().to_string(),
            source,
        })?;
        result.write_csv(file).map_err(|e| CliError::Usage(e.to_string()))?;
        outcome.artifacts_written.push(csv_path);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_in_order() {
        let all: Vec<_> = combinations(4, 2).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 0).count(), 1);
        assert_eq!(combinations(2, 3).count(), 0);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..4").unwrap(), (2, 4));
        assert_eq!(parse_range("3").unwrap(), (3, 3));
        assert!(parse_range("1..2").is_err());
        assert!(parse_range("4..2").is_err());
        assert!(parse_range("x").is_err());
    }
}
