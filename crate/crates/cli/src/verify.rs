//! Verification sweeps. Each check covers a range of deck sizes. Checks of
//! proven facts pass or fail; checks of conjectures report the sizes where
//! the conjecture held and where it broke.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use shelflab_core::feedback::{
    conditional_transition, enumerated_feedback_reward, expected_reward_feedback, tau_pmf, TieBreak,
};
use shelflab_core::matrix::{
    nullspace_dimension, quarter_eigenvector, separation_distance, spectrum_probes,
    stochastic_report,
};
use shelflab_core::nofeedback::{asymptotic_breakdown, compare_with_matrix};
use shelflab_core::shuffle::{apply_single_shelf, convolve, enumerate_distribution, ChoiceVector};
use shelflab_core::{position_matrix, Dyadic, ExactMatrix, Shuffler};

use crate::{Artifact, ExperimentConfig};

pub type MatrixBuilder = fn(usize) -> shelflab_core::Result<ExactMatrix>;

pub const ENUMERATION_MAX: usize = 10;
pub const EIGEN_MAX: usize = 100;
pub const SPECTRUM_MAX: usize = 40;
pub const FEEDBACK_ENUMERATION_MAX: usize = 14;
pub const SEPARATION_MAX: usize = 6;
pub const SEPARATION_STEPS: usize = 6;
pub const S1_MAX: usize = 400;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub n_max: usize,
    /// Source of position matrices. Tests swap in a faulty one.
    pub matrix: MatrixBuilder,
}

impl VerifyOptions {
    pub fn new(n_max: usize) -> Self {
        VerifyOptions {
            n_max,
            matrix: position_matrix,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Proven,
    Conjecture,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Confirmed,
    Refuted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub id: &'static str,
    pub kind: Kind,
    pub status: Status,
    /// Deck sizes covered, as `lo..=hi`.
    pub range: String,
    /// Sizes where the check failed or the conjecture broke, with a note.
    pub failures: BTreeMap<usize, String>,
}

impl CheckResult {
    /// Only a failed proven check counts as a failure.
    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub n_max: usize,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failing_ids(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| c.failed())
            .map(|c| c.id)
            .collect()
    }

    pub fn ok(&self) -> bool {
        self.failing_ids().is_empty()
    }
}

type Probe = fn(&VerifyOptions, usize) -> Result<(), String>;

struct Spec {
    id: &'static str,
    kind: Kind,
    lo: usize,
    hi: usize,
    probe: Probe,
}

fn specs(o: &VerifyOptions) -> Vec<Spec> {
    let n = o.n_max;
    let spec = |id, kind, lo, hi, probe| Spec {
        id,
        kind,
        lo,
        hi,
        probe,
    };
    vec![
        spec(
            "appendix.conjecture",
            Kind::Conjecture,
            3,
            n,
            appendix_conjecture,
        ),
        spec(
            "appendix.proven-positions",
            Kind::Proven,
            3,
            n,
            appendix_proven,
        ),
        spec(
            "eigen.quarter",
            Kind::Conjecture,
            3,
            n.min(EIGEN_MAX),
            eigen_quarter,
        ),
        spec(
            "feedback.three-quarters",
            Kind::Proven,
            2,
            n.min(FEEDBACK_ENUMERATION_MAX),
            three_quarters,
        ),
        spec(
            "matrix.enumeration",
            Kind::Proven,
            1,
            n.min(ENUMERATION_MAX),
            matrix_enumeration,
        ),
        spec("matrix.structure", Kind::Proven, 1, n, matrix_structure),
        spec("multishelf.two-shelf", Kind::Proven, 1, n.min(5), two_shelf),
        spec(
            "nofeedback.s1-closed-form",
            Kind::Proven,
            12,
            n.min(S1_MAX),
            s1_closed_form,
        ),
        spec(
            "separation.monotone",
            Kind::Proven,
            1,
            n.min(SEPARATION_MAX),
            separation_monotone,
        ),
        spec(
            "spectrum.kernel",
            Kind::Conjecture,
            1,
            n.min(SPECTRUM_MAX),
            spectrum_kernel,
        ),
        spec(
            "spectrum.quarter-powers",
            Kind::Conjecture,
            1,
            n.min(SPECTRUM_MAX),
            spectrum_total,
        ),
        spec(
            "tau.enumeration",
            Kind::Proven,
            2,
            n.min(FEEDBACK_ENUMERATION_MAX),
            tau_enumeration,
        ),
        spec(
            "transition.enumeration",
            Kind::Proven,
            3,
            n.min(ENUMERATION_MAX),
            transition_enumeration,
        ),
    ]
}

fn run_spec(o: &VerifyOptions, s: &Spec) -> CheckResult {
    let failures: BTreeMap<usize, String> = (s.lo..=s.hi)
        .filter(|&n| s.id != "nofeedback.s1-closed-form" || n % 2 == 0)
        .filter_map(|n| (s.probe)(o, n).err().map(|e| (n, e)))
        .collect();
    let status = match (s.kind, failures.is_empty()) {
        (Kind::Proven, true) => Status::Pass,
        (Kind::Proven, false) => Status::Fail,
        (Kind::Conjecture, true) => Status::Confirmed,
        (Kind::Conjecture, false) => Status::Refuted,
    };
    CheckResult {
        id: s.id,
        kind: s.kind,
        status,
        range: if s.lo <= s.hi {
            format!("{}..={}", s.lo, s.hi)
        } else {
            "empty".into()
        },
        failures,
    }
}

pub fn verify(o: &VerifyOptions) -> Result<VerifyReport, String> {
    if o.n_max < 3 {
        return Err("--n-max must be at least 3".into());
    }
    let mut checks: Vec<CheckResult> = specs(o).par_iter().map(|s| run_spec(o, s)).collect();
    checks.sort_by_key(|c| c.id);
    Ok(VerifyReport {
        n_max: o.n_max,
        checks,
    })
}

pub fn run(cfg: &ExperimentConfig, o: &VerifyOptions) -> Artifact {
    let report = match verify(o) {
        Ok(r) => r,
        Err(e) => {
            return Artifact {
                text: String::new(),
                ok: false,
                errors: vec![e],
            }
        }
    };
    let text = cfg.render(
        || {
            let mut s = String::from("check,kind,status,range,failures\n");
            for c in &report.checks {
                let kind = if c.kind == Kind::Proven {
                    "proven"
                } else {
                    "conjecture"
                };
                let status = match c.status {
                    Status::Pass => "pass",
                    Status::Fail => "fail",
                    Status::Confirmed => "confirmed",
                    Status::Refuted => "refuted",
                };
                let failed: Vec<String> = c.failures.keys().map(usize::to_string).collect();
                writeln!(
                    s,
                    "{},{kind},{status},{},{}",
                    c.id,
                    c.range,
                    failed.join(" ")
                )
                .unwrap();
            }
            s
        },
        || json!({ "report": report }),
    );
    Artifact {
        text,
        ok: report.ok(),
        errors: report
            .failing_ids()
            .into_iter()
            .map(|id| format!("check failed: {id}"))
            .collect(),
    }
}

fn matrix(o: &VerifyOptions, n: usize) -> Result<ExactMatrix, String> {
    (o.matrix)(n).map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn matrix_enumeration(o: &VerifyOptions, n: usize) -> Result<(), String> {
    let m = matrix(o, n)?.to_rational_rows();
    let d = enumerate_distribution(n, Shuffler::SingleShelf).map_err(|e| e.to_string())?;
    ensure(m == d.marginals(), || {
        "differs from enumerated marginals".into()
    })
}

fn matrix_structure(o: &VerifyOptions, n: usize) -> Result<(), String> {
    let r = stochastic_report(&matrix(o, n)?);
    ensure(r.all_ok(), || format!("{r:?}"))
}

fn appendix_proven(o: &VerifyOptions, n: usize) -> Result<(), String> {
    let c = compare_with_matrix(&matrix(o, n)?).map_err(|e| e.to_string())?;
    ensure(c.proven_positions_match, || {
        "proven positions disagree".into()
    })
}

fn appendix_conjecture(o: &VerifyOptions, n: usize) -> Result<(), String> {
    let c = compare_with_matrix(&matrix(o, n)?).map_err(|e| e.to_string())?;
    match c.first_mismatch {
        None => Ok(()),
        Some(j) => Err(format!("first mismatch at position {j}")),
    }
}

fn eigen_quarter(o: &VerifyOptions, n: usize) -> Result<(), String> {
    let v = quarter_eigenvector(n).map_err(|e| e.to_string())?;
    let mv = matrix(o, n)?.mul_vec(&v).map_err(|e| e.to_string())?;
    ensure(mv == v.scale(&Dyadic::pow2_inv(2)), || {
        "M v != v / 4".into()
    })
}

fn dimension(m: &ExactMatrix, lambda: &BigRational) -> usize {
    nullspace_dimension(m, lambda)
}

fn spectrum_kernel(o: &VerifyOptions, n: usize) -> Result<(), String> {
    let m = matrix(o, n)?;
    let one = dimension(&m, &BigRational::from_integer(1.into()));
    let zero = dimension(&m, &BigRational::from_integer(0.into()));
    ensure(one == 1 && zero == n / 2, || {
        format!("dim ker(M - I) = {one}, dim ker M = {zero}")
    })
}

fn spectrum_total(o: &VerifyOptions, n: usize) -> Result<(), String> {
    let m = matrix(o, n)?;
    let total: usize = spectrum_probes(n).iter().map(|l| dimension(&m, l)).sum();
    ensure(total == n, || format!("probe dimensions sum to {total}"))
}

fn single_shelf_outcomes(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..1u64 << n).map(move |i| {
        apply_single_shelf(n, &ChoiceVector::from_index(n, i))
            .expect("valid choice vector")
            .into_vec()
    })
}

fn tau_enumeration(_: &VerifyOptions, n: usize) -> Result<(), String> {
    let mut counts = vec![0i64; n];
    for deck in single_shelf_outcomes(n) {
        let tau = deck
            .iter()
            .position(|&c| c + 1 >= n)
            .expect("n - 1 or n is dealt")
            + 1;
        counts[tau] += 1;
    }
    let t = tau_pmf(n).map_err(|e| e.to_string())?;
    for (k, &c) in counts.iter().enumerate() {
        let got = Dyadic::new(c, n as u32);
        if got != t.p(k) {
            return Err(format!("P(tau = {k}) is {got}, formula gives {}", t.p(k)));
        }
    }
    Ok(())
}

fn three_quarters(_: &VerifyOptions, n: usize) -> Result<(), String> {
    let want = expected_reward_feedback(n).map_err(|e| e.to_string())?;
    for tie in [TieBreak::Lower, TieBreak::Upper] {
        let got = enumerated_feedback_reward(n, tie).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("{tie:?}: mean {got}, expected {want}"));
        }
    }
    Ok(())
}

fn transition_enumeration(_: &VerifyOptions, n: usize) -> Result<(), String> {
    // (j, k) -> counts of the card at position j + 1, over decks with tau > j
    // and card k at position j.
    let mut table: BTreeMap<(usize, usize), Vec<i64>> = BTreeMap::new();
    for deck in single_shelf_outcomes(n) {
        for j in 1..n {
            let k = deck[j - 1];
            if k + 1 >= n {
                break;
            }
            table.entry((j, k)).or_insert_with(|| vec![0; n + 1])[deck[j]] += 1;
        }
    }
    for ((j, k), counts) in table {
        let total = Dyadic::from_int(counts.iter().sum());
        for (i, &c) in counts.iter().enumerate().skip(1) {
            let p = conditional_transition(n, k, i).map_err(|e| e.to_string())?;
            if Dyadic::from_int(c) != &p * &total {
                return Err(format!("state j={j}, k={k}: card {i} off"));
            }
        }
    }
    Ok(())
}

fn separation_monotone(_: &VerifyOptions, n: usize) -> Result<(), String> {
    let one = enumerate_distribution(n, Shuffler::SingleShelf).map_err(|e| e.to_string())?;
    let mut d = one.clone();
    let mut prev = separation_distance(&d).map_err(|e| e.to_string())?;
    for s in 2..=SEPARATION_STEPS {
        d = convolve(&d, &one).map_err(|e| e.to_string())?;
        let sep = separation_distance(&d).map_err(|e| e.to_string())?;
        if sep > prev {
            return Err(format!("sep rises from {prev} to {sep} at s = {s}"));
        }
        prev = sep;
    }
    Ok(())
}

fn s1_closed_form(_: &VerifyOptions, n: usize) -> Result<(), String> {
    let b = asymptotic_breakdown(n).map_err(|e| e.to_string())?;
    ensure(b.s1 == b.s1_closed, || {
        format!("S1 {} != closed form {}", b.s1, b.s1_closed)
    })
}

fn two_shelf(_: &VerifyOptions, n: usize) -> Result<(), String> {
    let one = enumerate_distribution(n, Shuffler::SingleShelf).map_err(|e| e.to_string())?;
    let two = enumerate_distribution(n, Shuffler::MShelf(2)).map_err(|e| e.to_string())?;
    let conv = convolve(&one, &one).map_err(|e| e.to_string())?;
    ensure(conv == two, || {
        "self-convolution differs from two shelves".into()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_sweep_passes() {
        let r = verify(&VerifyOptions::new(3)).unwrap();
        assert!(r.ok(), "{:?}", r.failing_ids());
        let ids: Vec<_> = r.checks.iter().map(|c| c.id).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert_eq!(r.check("nofeedback.s1-closed-form").unwrap().range, "empty");
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(verify(&VerifyOptions::new(2)).is_err());
    }

    fn perturbed(n: usize) -> shelflab_core::Result<ExactMatrix> {
        let mut m = position_matrix(n)?;
        if n >= 4 {
            let e = m.entry(2, 2) + &Dyadic::pow2_inv(20);
            m.set_entry(2, 2, e);
        }
        Ok(m)
    }

    #[test]
    fn injected_fault_is_caught() {
        let o = VerifyOptions {
            n_max: 8,
            matrix: perturbed,
        };
        let r = verify(&o).unwrap();
        let failing = r.failing_ids();
        assert!(failing.contains(&"matrix.enumeration"));
        assert!(failing.contains(&"matrix.structure"));
        assert_eq!(
            r.check("matrix.structure")
                .unwrap()
                .failures
                .keys()
                .copied()
                .collect::<Vec<_>>(),
            (4..=8).collect::<Vec<_>>()
        );
        assert!(!r.ok());
    }
}
