//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use psicomplete::adversary::{
    annihilation_profile, attack_with_probe, theorem2_attack, AdversaryError, DEFAULT_ANNIHILATION_TOL,
};
use psicomplete::harness::{child_rng, haar_random_state, round_trip_sweep, ExperimentConfig, SampleStatus};
use psicomplete::povm::{expectations, is_rank_one};
use psicomplete::reconstruct::{
    certify_failure_set, reconstruct_from_expectations, FailureCondition, ReconstructionStatus,
    DEFAULT_FAILURE_TOL, DEFAULT_PATTERN_TOL,
};
use psicomplete::{
    build_fsc_operators, build_fsc_povm, probabilities, validate_povm, Complex64, FscConstruction, Povm,
    StateVector,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Expectation values of the construction's operators computed straight
/// from the defining vectors.
fn oracle_values(c: &[Complex64]) -> Vec<f64> {
    let i = Complex64::i();
    let mut v: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
    for z in &c[1..] {
        v.push((c[0] - i * z).norm_sqr());
    }
    v.push(c.iter().sum::<Complex64>().norm_sqr());
    v
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn pair_fidelity(a: &StateVector, b: &StateVector) -> f64 {
    let overlap = a.inner(b).norm();
    overlap * overlap / (a.norm().powi(2) * b.norm().powi(2))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    for d in 2..=8 {
        let povm = build_fsc_povm(d).map_err(|e| e.to_string())?;
        ensure(povm.len() == 2 * d, || format!("d={d}: {} elements", povm.len()))?;
        let report = validate_povm(&povm);
        ensure(report.is_valid(), || format!("d={d}: {:?}", report.violations))?;
        for (k, e) in povm.elements().iter().enumerate() {
            let rank_one = is_rank_one(e).map_err(|e| e.to_string())?;
            ensure(rank_one, || format!("d={d}: element {k} not rank one"))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("d=2..8 valid rank-one, {elapsed:?}"))
}

fn criterion_2() -> Outcome {
    let ops = build_fsc_operators(3).map_err(|e| e.to_string())?;
    let values = [25.0, 64.0, 16.0, 89.0, 41.0, 49.0];
    let report = reconstruct_from_expectations(&ops, &values, DEFAULT_PATTERN_TOL).map_err(|e| e.to_string())?;
    let c = report.recovered.coeffs();
    ensure(report.status == ReconstructionStatus::Unique, || format!("status {:?}", report.status))?;
    ensure(c[1].re == -8.0 && c[2].re == -4.0, || format!("Re c1 = {}, Re c2 = {}", c[1].re, c[2].re))?;
    Ok(format!("Re c1 = {}, Re c2 = {}", c[1].re, c[2].re))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for d in 2..=8 {
        let result = round_trip_sweep(&ExperimentConfig::exact(d, 1000, 2024)).map_err(|e| e.to_string())?;
        for r in &result.per_sample {
            ensure(r.status != SampleStatus::Ambiguous && r.status != SampleStatus::Error, || {
                format!("d={d} sample {}: {:?} {:?}", r.index, r.status, r.error)
            })?;
            ensure(r.fidelity >= 1.0 - 1e-8, || format!("d={d} sample {}: fidelity {}", r.index, r.fidelity))?;
        }
        worst = worst.max(result.summary.max_infidelity);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("7000 states, max infidelity {worst:e}, {elapsed:?}"))
}

/// A vector on the failure set: flipping `Re c_i` for `i ∈ subset` leaves
/// every value unchanged because the chosen sum vanishes.
fn failure_state(d: usize, k: u64) -> (StateVector, Vec<usize>, FailureCondition) {
    let base = haar_random_state(d, &mut child_rng(77, k)).gauge_fixed();
    let mut c = base.into_coeffs();
    // Re parts bounded away from zero so the flip is a real change.
    for (j, z) in c.iter_mut().enumerate().skip(1) {
        if z.re.abs() < 0.05 {
            z.re = if j % 2 == 0 { 0.1 } else { -0.1 };
        }
    }
    let masks = (1u64 << (d - 1)) - 1;
    let condition = if k.is_multiple_of(2) { FailureCondition::SumOverU } else { FailureCondition::SumOverE };
    let mut mask = 1 + (k / 2) % masks;
    let size = |m: u64| m.count_ones() as usize;
    match condition {
        // Needs two members in U.
        FailureCondition::SumOverU => {
            while size(mask) < 2 {
                mask = 1 + mask % masks;
            }
        }
        // Needs a member of the complement besides index 0.
        FailureCondition::SumOverE => {
            while size(mask) == d - 1 {
                mask = 1 + mask % masks;
            }
        }
    }
    let subset: Vec<usize> = (1..d).filter(|i| (mask >> (i - 1)) & 1 == 1).collect();
    let complement: Vec<usize> = (0..d).filter(|i| !subset.contains(i)).collect();
    let (group, adjust) = match condition {
        FailureCondition::SumOverU => (subset.clone(), *subset.last().unwrap()),
        FailureCondition::SumOverE => (complement.clone(), *complement.last().unwrap()),
    };
    let rest: f64 = group.iter().filter(|&&i| i != adjust).map(|&i| c[i].re).sum();
    c[adjust].re = -rest;
    (StateVector::new(c).unwrap(), subset, condition)
}

fn criterion_4() -> Outcome {
    let mut total = 0;
    let mut worst: f64 = 0.0;
    for d in 3..=6 {
        for k in 0..100 {
            let (psi, subset, condition) = failure_state(d, k);
            let certs = certify_failure_set(&psi, DEFAULT_FAILURE_TOL).map_err(|e| e.to_string())?;
            ensure(certs.iter().any(|c| c.subset_u == subset && c.condition == condition), || {
                format!("d={d} k={k}: {subset:?} {condition:?} not flagged")
            })?;
            let original = oracle_values(psi.coeffs());
            for cert in &certs {
                let gap = max_gap(&oracle_values(cert.alternative.coeffs()), &original);
                ensure(gap <= 1e-9, || format!("d={d} k={k}: alternative gap {gap:e}"))?;
                worst = worst.max(gap);
            }
            total += 1;
        }
    }
    Ok(format!("{total} constructed states flagged, worst alternative gap {worst:e}"))
}

fn check_pair(povm: &Povm, label: &str) -> Result<(f64, f64), String> {
    let pair = theorem2_attack(povm, None).map_err(|e| format!("{label}: {e}"))?;
    let plus = probabilities(povm, &pair.psi_plus).map_err(|e| e.to_string())?;
    let minus = probabilities(povm, &pair.psi_minus).map_err(|e| e.to_string())?;
    let gap = max_gap(&plus, &minus);
    let fid = pair_fidelity(&pair.psi_plus, &pair.psi_minus);
    ensure(gap <= 1e-9, || format!("{label}: gap {gap:e}"))?;
    ensure(fid <= 1.0 - 1e-6, || format!("{label}: fidelity {fid}"))?;
    Ok((gap, fid))
}

fn criterion_5() -> Outcome {
    let mut gap: f64 = 0.0;
    let mut fid: f64 = 0.0;
    for d in 2..=8 {
        let (g, f) = check_pair(&Povm::computational_basis(d), &format!("projective d={d}"))?;
        gap = gap.max(g);
        fid = fid.max(f);
    }
    for d in 3..=8 {
        let povm = build_fsc_povm(d).map_err(|e| e.to_string())?;
        let (g, f) = check_pair(&povm, &format!("FSC d={d}"))?;
        gap = gap.max(g);
        fid = fid.max(f);
    }
    Ok(format!("13 pairs, max gap {gap:e}, max pair fidelity {fid:e}"))
}

fn cli_exit(args: &[&str], dir: &Path) -> Result<i32, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_psicomplete"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?
        .status;
    status.code().ok_or_else(|| "killed by signal".to_string())
}

fn criterion_6() -> Outcome {
    for d in 3..=8 {
        let povm = build_fsc_povm(d).map_err(|e| e.to_string())?;
        theorem2_attack(&povm, None).map_err(|e| format!("FSC d={d}: {e}"))?;
    }
    for d in 2..=8 {
        theorem2_attack(&Povm::computational_basis(d), None).map_err(|e| format!("projective d={d}: {e}"))?;
    }

    let povm = build_fsc_povm(2).map_err(|e| e.to_string())?;
    let mut min_k = usize::MAX;
    for k in 0..100 {
        let phi = haar_random_state(2, &mut child_rng(6, k));
        let profile = annihilation_profile(&povm, &phi, DEFAULT_ANNIHILATION_TOL).map_err(|e| e.to_string())?;
        ensure(profile.k_phi >= 3, || format!("probe {k}: K_phi = {}", profile.k_phi))?;
        min_k = min_k.min(profile.k_phi);
        match attack_with_probe(&povm, &phi) {
            Err(AdversaryError::KPhiTooLarge { .. }) => {}
            other => return Err(format!("probe {k}: expected KPhiTooLarge, got {other:?}")),
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let codes = [
        cli_exit(&["build", "-d", "2", "-o", "p2.json"], dir.path())?,
        cli_exit(&["attack", "--povm", "p2.json", "-o", "pair2.json"], dir.path())?,
        cli_exit(&["build", "-d", "3", "-o", "p3.json"], dir.path())?,
        cli_exit(&["attack", "--povm", "p3.json", "-o", "pair3.json"], dir.path())?,
    ];
    ensure(codes == [0, 1, 0, 0], || format!("CLI exit codes {codes:?}, expected [0, 1, 0, 0]"))?;
    Ok(format!(
        "attacks succeed below 3d-2; FSC d=2 resists 100 probes (min K_phi {min_k}); CLI exits d=2 -> 1, d=3 -> 0"
    ))
}

/// (d-1)-subsets of 0..n in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for rest in subsets(n, k - 1) {
            if rest.first().is_none_or(|&r| r > first) {
                let mut s = vec![first];
                s.extend(rest);
                out.push(s);
            }
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let (mut pairs, mut degenerate) = (0, 0);
    for d in 3..=6 {
        let construction = FscConstruction::new(d).map_err(|e| e.to_string())?;
        let ops = construction.operators();
        for subset in subsets(2 * d, d - 1) {
            let pair = match theorem2_attack(construction.povm(), Some(&subset)) {
                Ok(p) => p,
                Err(AdversaryError::KPhiTooLarge { .. } | AdversaryError::NoNullVector { .. }) => continue,
                Err(e) => return Err(format!("d={d} {subset:?}: {e}")),
            };
            pairs += 1;
            for psi in [&pair.psi_plus, &pair.psi_minus] {
                let frame = construction.to_operator_frame(psi).map_err(|e| e.to_string())?.gauge_fixed();
                let values = expectations(ops, &frame).map_err(|e| e.to_string())?;
                let status = reconstruct_from_expectations(ops, &values, DEFAULT_PATTERN_TOL)
                    .map(|r| r.status)
                    .map_err(|e| format!("d={d} {subset:?}: {e}"))?;
                if status == ReconstructionStatus::GaugeDegenerate {
                    degenerate += 1;
                    continue;
                }
                let certs = certify_failure_set(&frame, DEFAULT_FAILURE_TOL).map_err(|e| e.to_string())?;
                ensure(!certs.is_empty(), || format!("d={d} {subset:?}: not flagged, status {status:?}"))?;
            }
        }
    }
    ensure(pairs > 0, || "no pairs constructed".into())?;
    Ok(format!("{pairs} pairs, every member flagged ({degenerate} gauge-degenerate)"))
}

fn criterion_8() -> Outcome {
    let mut means = Vec::new();
    for shots in [1_000u64, 10_000, 100_000, 1_000_000] {
        let cfg = ExperimentConfig::exact(3, 200, 8).with_shots(shots);
        means.push(round_trip_sweep(&cfg).map_err(|e| e.to_string())?.summary.mean_infidelity);
    }
    let decreasing = means.windows(2).filter(|w| w[1] < w[0]).count();
    ensure(decreasing == 3, || format!("mean infidelities {means:?}"))?;
    Ok(format!("mean infidelities {means:?}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("construction validity", criterion_1),
        ("worked example", criterion_2),
        ("random-state round trip", criterion_3),
        ("failure-set certification", criterion_4),
        ("equal-statistics pairs", criterion_5),
        ("element-count boundary", criterion_6),
        ("pairs land on the failure set", criterion_7),
        ("shot-noise convergence", criterion_8),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", n + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
