//! Acceptance criteria, one line each.
//!
//! Failing criteria are printed as FAIL and do not abort the run, so the rest
//! of `cargo test` still executes. Set `GAMMALAB_STRICT=1` to exit nonzero on
//! any failure.

use std::process::Command;
use std::time::Instant;

use gammalab::geometry::canonical_constants;
use gammalab::model_zoo::{model_by_name, LieModel};
use gammalab::verify::algebraic::{
    check_cd_inequality, check_cd_witness, check_commutation, check_condition_b, check_constants, check_ricci, CdParams,
    CommutationParams, CondBParams, ConstantsParams, RicciParams,
};
use gammalab::verify::analytic::{
    check_entropy_li_yau, check_gradient_bounds, check_harnack, check_kernel_decay, check_semigroup_fidelity, FidelityParams,
    GradientParams, HarnackParams, KernelDecayParams, LiYauParams,
};
use gammalab::verify::spectral::spectral_gap_su2_pair;
use gammalab::verify::suite::{run_suite, ScheduleParams};
use gammalab::verify::{CheckResult, CheckSpec, SuiteConfig, Verdict};

const SEED: u64 = 0;

struct Outcome {
    pass: bool,
    summary: String,
}

fn model(name: &str) -> LieModel {
    model_by_name(name).expect("shipped model")
}

fn find<'a>(rs: &'a [CheckResult], anchor: &str) -> &'a CheckResult {
    rs.iter().find(|r| r.anchor == anchor).unwrap_or_else(|| panic!("no result for {anchor}"))
}

fn within(secs: f64, limit: f64) -> bool {
    secs < limit
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let h = model("heisenberg");
    let p = CdParams::default();
    let sweep = check_cd_inequality(&h, &p, SEED).expect("sweep runs");
    let witness = check_cd_witness(&h, &p).expect("witness runs");
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: sweep.passed() && witness.passed() && within(secs, 60.0),
        summary: format!(
            "CD sweep {}×{}×{}: min residual/scale {:.3e} ≥ −1e−9; witness z at 0: |residual| {:.1e} ≤ 1e−12; {secs:.1} s < 60 s",
            p.functions,
            p.points,
            p.ell_steps,
            sweep.margin,
            -witness.margin
        ),
    }
}

fn criterion_2() -> Outcome {
    // Independent oracles: ρ₂,₀ = 1/(2(n−1)) on free nilpotent step 2, (ρ₁, ρ₂,₀) = (4ρ, ¼) on SU(2)×SU(2) with ρ = 1.
    let mut worst: f64 = 0.0;
    for n in [2usize, 3, 4] {
        let (_, k) = canonical_constants(&model(&format!("free_nilpotent_{n}"))).expect("constants");
        worst = worst.max((k.rho20 - 1.0 / (2.0 * (n as f64 - 1.0))).abs());
    }
    let (_, k) = canonical_constants(&model("su2_pair")).expect("constants");
    worst = worst.max((k.rho1 - 4.0).abs()).max((k.rho20 - 0.25).abs());
    let p = ConstantsParams::default();
    let mut all_pass = true;
    for name in &p.models {
        let rs = check_constants(&model(name), &p).expect("constants check");
        all_pass &= rs.iter().all(CheckResult::passed);
    }
    Outcome {
        pass: worst <= 1e-9 && all_pass,
        summary: format!("max deviation from closed forms {worst:.1e} ≤ 1e−9; declared constants and M_HV = M_∇v = 0 checks on {} models", p.models.len()),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let p = CondBParams::default();
    let mut pass = true;
    let mut worst_holding: f64 = 0.0;
    let mut engel_fraction = f64::NAN;
    for name in &p.models {
        let r = check_condition_b(&model(name), &p, SEED).expect("condition (B) runs");
        pass &= r.passed();
        if r.anchor == "condition_b.violation" {
            engel_fraction = r.details.get("violation_fraction").copied().unwrap_or(f64::NAN);
        } else {
            worst_holding = worst_holding.max(-r.margin);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: pass && within(secs, 30.0),
        summary: format!(
            "max residual on step-2 models {worst_holding:.1e} ≤ 1e−12; Engel violation fraction {engel_fraction:.2} ≥ 0.10; {secs:.1} s < 30 s"
        ),
    }
}

fn criterion_4() -> Outcome {
    let p = CommutationParams::default();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for name in &p.models {
        let r = check_commutation(&model(name), &p, SEED).expect("commutation runs");
        pass &= r.passed();
        worst = worst.max(-r.margin);
    }
    Outcome { pass, summary: format!("max relative residual {worst:.1e} ≤ 1e−9 over {} models × {} quartics", p.models.len(), p.samples) }
}

fn criterion_5() -> Outcome {
    let p = RicciParams::default();
    let mut pass = true;
    let mut stated: f64 = 0.0;
    let mut half: f64 = 0.0;
    for name in &p.models {
        let rs = check_ricci(&model(name), &p, SEED).expect("ricci runs");
        let r = find(&rs, "riemann_ricci");
        pass &= r.passed();
        stated = stated.max(-r.margin);
        half = half.max(-find(&rs, "riemann_ricci.half_coefficient").margin);
    }
    Outcome {
        pass,
        summary: format!("two-pipeline gap {stated:.3e} vs 1e−10 with the ¾ coefficient; {half:.1e} with coefficient ½"),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (gap, rate, bound) = spectral_gap_su2_pair(1.0, 2.0).expect("spectral oracle runs");
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: rate.passed() && bound.passed() && gap.stability <= 1e-9 && within(secs, 120.0),
        summary: format!(
            "−λ₁ = {:.6} ≥ 6/7 and ≥ 4/5; change j_max 2 → 3: {:.1e} ≤ 1e−9; {secs:.1} s < 120 s",
            -gap.lambda1, gap.stability
        ),
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let p = FidelityParams::default();
    let rs = check_semigroup_fidelity(&model("heisenberg"), &p, SEED).expect("fidelity runs");
    let secs = start.elapsed().as_secs_f64();
    let one = find(&rs, "stochastic_completeness");
    let moment = find(&rs, "semigroup.second_moment");
    Outcome {
        pass: one.passed() && moment.passed() && within(secs, 60.0),
        summary: format!(
            "max |P_t1 − 1| = {:.1e}; P_t(x²)(0) = {:.5} vs t = 1, |Δ| {:.2e} ≤ 3σ = {:.2e} ({} paths, {} steps); {secs:.1} s < 60 s",
            -one.margin,
            moment.details["estimate"],
            -moment.margin,
            moment.tolerance,
            p.paths,
            p.steps
        ),
    }
}

fn criterion_8() -> Outcome {
    let p = GradientParams::default();
    let rs = check_gradient_bounds(&model("heisenberg"), &p, SEED).expect("gradient bounds run");
    let names = ["gradient_bound.a", "gradient_bound.b", "vertical_gradient"];
    let pass = names.iter().all(|a| find(&rs, a).passed());
    let parts: Vec<String> = names.iter().map(|a| format!("{a} {:.3} (3σ {:.3})", find(&rs, a).margin, find(&rs, a).tolerance)).collect();
    Outcome { pass, summary: format!("worst margins over {} cases: {}", p.cases, parts.join(", ")) }
}

fn criterion_9() -> Outcome {
    let h = model("heisenberg");
    let ly = check_entropy_li_yau(&h, &LiYauParams::default()).expect("Li-Yau runs");
    let ly2 = find(&ly, "li_yau.optimized");
    let harnack = check_harnack(&h, &HarnackParams::default(), SEED).expect("Harnack runs");
    let pairs = find(&harnack, "harnack.parabolic");
    let decay = check_kernel_decay(&h, &KernelDecayParams::default()).expect("kernel decay runs");
    let monotone = find(&decay, "heat_kernel.scaled_monotone");
    let n = ly2.details["N"];
    Outcome {
        pass: ly2.passed() && pairs.passed() && monotone.passed(),
        summary: format!(
            "Li-Yau (N = {n:.3}, D = {:.3}) margin {:.3} ≥ −5% of N/t: {}; Harnack on 20 pairs: {}; t^(N/2)·p_t(0,0) non-increasing: {} (worst drop {:.3} of max, fitted exponent {:.2})",
            ly2.details["D"],
            ly2.margin,
            label(ly2.verdict),
            label(pairs.verdict),
            label(monotone.verdict),
            monotone.margin,
            monotone.details["fitted_exponent"]
        ),
    }
}

fn criterion_10() -> Outcome {
    let config = SuiteConfig { seed: SEED, checks: vec![CheckSpec::Schedules(ScheduleParams::default())], output: Default::default() };
    let report = run_suite(&config).expect("schedules run");
    let admissible: Vec<&CheckResult> = report.results.iter().filter(|r| r.check_id == "schedules").collect();
    let monotone: Vec<&CheckResult> = report.results.iter().filter(|r| r.check_id == "schedule_monotone").collect();
    let worst = admissible.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let refinement = admissible.iter().map(|r| r.details["refinement_change"]).fold(0.0, f64::max);
    let ratio = monotone.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Outcome {
        pass: admissible.iter().all(|r| r.passed()) && !monotone.is_empty() && ratio > 0.0,
        summary: format!(
            "{} schedules: min margin {worst:.2e} ≥ −1e−8, refinement change ≤ {refinement:.1e}; d/dt(a/ℓ) min {ratio:.3} > 0 on {} schedule(s)",
            admissible.len(),
            monotone.len()
        ),
    }
}

fn criterion_11() -> Outcome {
    let dir = std::env::temp_dir().join(format!("gammalab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let config = r#"{
  "seed": 17,
  "checks": [
    {"id": "cd_inequality", "functions": 200, "points": 5},
    {"id": "condition_b", "samples": 100},
    {"id": "semigroup_fidelity", "paths": 5000, "steps": 50},
    {"id": "gradient_bounds", "cases": 2, "paths": 2000, "steps": 20},
    {"id": "harnack", "samples": 4, "kernel_triples": 1, "pde": {"half_width": 4.0, "h": 0.25, "dt": 0.05, "flux_limit": 1e-2}}
  ]
}"#;
    let path = dir.join("config.json");
    std::fs::write(&path, config).expect("config written");
    let bin = env!("CARGO_BIN_EXE_gammalab");
    let run = |jobs: &str, out: &str| {
        let json = dir.join(out);
        let status = Command::new(bin)
            .args(["--jobs", jobs, "--json"])
            .arg(&json)
            .args(["suite", "run", "--config"])
            .arg(&path)
            .output()
            .expect("binary runs");
        (status.status.code(), std::fs::read(&json).unwrap_or_default())
    };
    let (code_a, a) = run("1", "a.json");
    let (code_b, b) = run("3", "b.json");
    std::fs::remove_dir_all(&dir).ok();
    let same = !a.is_empty() && a == b;
    Outcome {
        pass: same && code_a == code_b,
        summary: format!("two runs (1 and 3 threads): {} bytes vs {} bytes, identical: {same}; exit codes {code_a:?}/{code_b:?}", a.len(), b.len()),
    }
}

fn label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = Vec::new();
    for (id, f) in criteria {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {id:>2} {} [{secs:6.1} s] {}", if o.pass { "PASS" } else { "FAIL" }, o.summary);
        if !o.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} of 11 criteria pass; failing: {failed:?}", 11 - failed.len());
    if !failed.is_empty() && std::env::var("GAMMALAB_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
