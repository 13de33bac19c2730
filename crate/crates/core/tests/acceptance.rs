//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test -p mudlab --test acceptance -- --nocapture` to see
//! the per-criterion lines and measured values.

mod common;

use common::{exhaustive_oracle, qam_ser_quadrature, random_instance, InstanceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mudlab::analysis::{sub_ser, CONFIDENCE_BAND};
use mudlab::channel::PowerDelayProfile;
use mudlab::detectors::{
    omud_exhaustive, population_size, pso_detect, sigmoid, SwarmConfig, TruthWindow,
};
use mudlab::harness::{emit_results, run_scenario, run_sweep, ConfigFile, OutputFormat};
use mudlab::modem::Constellation;

fn scenario(text: &str) -> mudlab::harness::Scenario {
    let cfg = ConfigFile::parse(text).unwrap();
    cfg.scenario(None).unwrap().0
}

/// Criterion 1: the minimum bit-change probabilities of Table I.
#[test]
fn criterion_1_bit_change_probability_table() {
    let expect = [(1, 0.269), (2, 0.119), (3, 0.047), (4, 0.018), (5, 0.007)];
    for (vmax, want) in expect {
        let got = 1.0 - sigmoid(vmax as f64);
        let rounded = (got * 1000.0).round() / 1000.0;
        assert!(
            (rounded - want).abs() < 1e-12,
            "vmax={vmax}: 1-S = {got} rounds to {rounded}, want {want}"
        );
    }
    println!("acceptance 1 (bit-change probability table): PASS");
}

/// Criterion 2: population-size rule against an independent evaluation.
#[test]
fn criterion_2_population_sizes() {
    let cases = [(1usize, 1usize, 1usize, 10usize), (1, 15, 1, 30), (4, 15, 1, 60)];
    for (m, k, i, want) in cases {
        let got = population_size(m, k, i);
        // Independent route: compute the inner expression in extended steps.
        let dim = (m * k * i) as f64;
        let inner = (std::f64::consts::PI * (dim - 1.0)).sqrt() + 2.0;
        let independent = 10 * (0.3454 * inner).ceil() as i64;
        assert_eq!(got as i64, independent, "m={m} K={k} I={i}");
        assert_eq!(got, want, "m={m} K={k} I={i}");
    }
    println!("acceptance 2 (population sizes): PASS");
}

/// Criterion 3: single-user chain calibration against the analytic bound
/// with min-trials-driven budgets.
#[test]
fn criterion_3_chain_calibration() {
    let s = scenario(
        r#"
        [scenario.calibration]
        constellation = "bpsk"
        users = 1
        gain = 31
        ebn0_db = [0.0, 5.0, 10.0, 15.0, 20.0]
        seed = 1001
        detectors = ["cd"]
        "#,
    );
    let report = run_scenario(&s).unwrap();
    for p in &report.points {
        let sub = p.sub_ber.unwrap();
        let cd = p.cd.as_ref().unwrap();
        let ratio = cd.ber() / sub;
        assert!(
            (CONFIDENCE_BAND.0..=CONFIDENCE_BAND.1).contains(&ratio),
            "Eb/N0 = {} dB: CD {} vs SuB {sub}, ratio {ratio} outside {:?} ({} errors)",
            p.ebn0_db,
            cd.ber(),
            CONFIDENCE_BAND,
            cd.bit_errors
        );
        assert!(cd.bit_errors >= 80, "budget should target ~100 errors");
    }
    println!("acceptance 3 (chain calibration vs single-user bound): PASS");
}

/// Criterion 4: closed-form SER against the quadrature oracle, plus the
/// exact zero-SNR boundary.
#[test]
fn criterion_4_ser_bound_vs_quadrature() {
    for order in [4usize, 16] {
        let boundary = sub_ser(order, &[0.0]).unwrap();
        let want = 1.0 - 1.0 / order as f64;
        assert!(
            (boundary - want).abs() < 1e-15,
            "M={order} boundary {boundary} vs {want}"
        );
        let pd2 = PowerDelayProfile::pd2();
        for db in (0..=30).step_by(5) {
            let nu = 10f64.powf(db as f64 / 10.0);
            // L = 1.
            let closed = sub_ser(order, &[nu]).unwrap();
            let oracle = qam_ser_quadrature(order, &[nu]);
            assert!(
                (closed - oracle).abs() <= 1e-6 * oracle,
                "M={order} L=1 {db} dB: {closed} vs {oracle}"
            );
            // L = 2 with the two-path profile energies.
            let nus: Vec<f64> = pd2.energies().iter().map(|e| e * nu).collect();
            let closed = sub_ser(order, &nus).unwrap();
            let oracle = qam_ser_quadrature(order, &nus);
            assert!(
                (closed - oracle).abs() <= 1e-6 * oracle,
                "M={order} L=2 {db} dB: {closed} vs {oracle}"
            );
        }
    }
    println!("acceptance 4 (SER bound vs quadrature oracle): PASS");
}

/// Criterion 5: exhaustive detector equals an independent enumeration on
/// 100 noisy instances, and the swarm attains the same optimum in at least
/// 95 of them.
#[test]
fn criterion_5_small_instance_optimality() {
    let total = 100;
    let mut pso_hits = 0;
    for idx in 0..total {
        let (c, mut swarm) = if idx % 2 == 0 {
            (Constellation::bpsk(), SwarmConfig::flat_bpsk())
        } else {
            (Constellation::qpsk(), SwarmConfig::flat_qpsk())
        };
        swarm.iterations = 200;
        let users = 2 + idx % 3;
        let inst = random_instance(&InstanceConfig::flat(c, users, 8.0), 50_000 + idx as u64);

        let got = omud_exhaustive(&inst.ctx).unwrap();
        let (oracle_bits, oracle_fit) = exhaustive_oracle(&inst);
        assert_eq!(
            got.bits, oracle_bits,
            "instance {idx}: exhaustive detector disagrees with the oracle"
        );
        assert!(
            (got.fitness - oracle_fit).abs() <= 1e-9 * (1.0 + oracle_fit.abs()),
            "instance {idx}: fitness {} vs oracle {oracle_fit}",
            got.fitness
        );

        let mut rng = ChaCha8Rng::seed_from_u64(60_000 + idx as u64);
        let out = pso_detect(&inst.ctx, &inst.cd_bits, &swarm, &mut rng, None).unwrap();
        if (out.detection.fitness - got.fitness).abs() <= 1e-9 * (1.0 + got.fitness.abs()) {
            pso_hits += 1;
        }
    }
    assert!(
        pso_hits * 100 >= total * 95,
        "swarm found the optimum in only {pso_hits}/{total} instances"
    );
    println!(
        "acceptance 5 (small-instance optimality, swarm {pso_hits}/{total}): PASS"
    );
}

/// Criterion 6: monotone global-best traces and no regression below the
/// seed, across a spread of scenarios.
#[test]
fn criterion_6_monotone_convergence() {
    let mut runs = 0;
    for idx in 0..30u64 {
        let (c, base) = match idx % 3 {
            0 => (Constellation::bpsk(), SwarmConfig::flat_bpsk()),
            1 => (Constellation::qpsk(), SwarmConfig::flat_qpsk()),
            _ => (Constellation::qam16(), SwarmConfig::flat_qam16()),
        };
        let mut cfg = InstanceConfig::flat(c.clone(), 2 + (idx as usize % 4), 10.0);
        match idx % 4 {
            1 => {
                cfg.profile = PowerDelayProfile::pd2();
                cfg.fingers = 2;
                cfg.synchronous = false;
                cfg.symbols = 3;
            }
            2 => cfg.antennas = 2,
            3 => cfg.csi = (0.25, 0.25),
            _ => {}
        }
        let mut swarm = base;
        swarm.iterations = 40;
        let inst = random_instance(&cfg, 70_000 + idx);
        let seed_fitness = inst.ctx.fitness_of_bits(&inst.cd_bits);
        let truth = TruthWindow::full(inst.truth_bits.clone(), c.bits_per_symbol());
        let mut rng = ChaCha8Rng::seed_from_u64(80_000 + idx);
        let out = pso_detect(&inst.ctx, &inst.cd_bits, &swarm, &mut rng, Some(&truth)).unwrap();
        for w in out.trace.windows(2) {
            assert!(
                w[1].fitness >= w[0].fitness,
                "run {idx}: trace decreased at iteration {}",
                w[1].iteration
            );
        }
        assert!(
            out.detection.fitness >= seed_fitness,
            "run {idx}: final fitness below the seed"
        );
        assert_eq!(out.trace.len(), swarm.iterations + 1);
        runs += 1;
    }
    println!("acceptance 6 (monotone convergence over {runs} runs): PASS");
}

const FIG4_BASE: &str = r#"
    [scenario.fig4]
    constellation = "bpsk"
    users = 15
    gain = 31
    symbols = 3
    synchronous = false
    ebn0_db = [22.0]
    seed = 41

    [scenario.fig4.swarm]
    iterations = 30

    [sweep.omega]
    scenario = "fig4"
    parameter = "omega"
    values = [0.5, 1.0, 1.5]
"#;

/// Criterion 7a: the inertial-weight grid under common random numbers ranks
/// ω = 1 best at the iteration budget.
#[test]
fn criterion_7a_inertia_ordering() {
    let cfg = ConfigFile::parse(FIG4_BASE).unwrap();
    let (sweep, _) = cfg.sweep(None).unwrap();
    let report = run_sweep(&sweep).unwrap();
    let ber_of = |cell: &mudlab::harness::SweepCell| {
        cell.report.points[0]
            .pso
            .as_ref()
            .unwrap()
            .last()
            .unwrap()
            .ber()
    };
    let half = ber_of(&report.cells[0]);
    let unit = ber_of(&report.cells[1]);
    let heavy = ber_of(&report.cells[2]);
    // Common random numbers: identical physics in every cell.
    let cd0 = report.cells[0].report.points[0].cd.clone().unwrap();
    let cd1 = report.cells[1].report.points[0].cd.clone().unwrap();
    assert_eq!(cd0, cd1, "grid cells must share their channel draws");
    assert!(
        unit < half && unit < heavy,
        "ω=1 not best at budget: ω=0.5 → {half}, ω=1 → {unit}, ω=1.5 → {heavy}"
    );
    println!(
        "acceptance 7a (ω ordering: 0.5 → {half:.3e}, 1 → {unit:.3e}, 1.5 → {heavy:.3e}): PASS"
    );
}

/// Criterion 7b: swarm below conventional at every point from 5 dB up, and
/// near-far robustness of the weak users within 2× of equal power.
#[test]
fn criterion_7b_ber_curves_and_near_far() {
    let equal = scenario(
        r#"
        [scenario.fig10a]
        constellation = "bpsk"
        users = 15
        gain = 31
        symbols = 3
        synchronous = false
        ebn0_db = [5.0, 10.0, 15.0, 20.0]
        seed = 31
        [scenario.fig10a.swarm]
        iterations = 30
        "#,
    );
    let nfr = scenario(
        r#"
        [scenario.fig10b]
        constellation = "bpsk"
        users = 15
        gain = 31
        symbols = 3
        synchronous = false
        ebn0_db = [5.0, 10.0, 15.0, 20.0]
        seed = 31
        nfr = { offset_db = 6.0, strong_users = [1, 3, 5, 7, 9, 11, 13] }
        [scenario.fig10b.swarm]
        iterations = 30
        "#,
    );
    let eq_report = run_scenario(&equal).unwrap();
    let nfr_report = run_scenario(&nfr).unwrap();
    for (pe, pn) in eq_report.points.iter().zip(&nfr_report.points) {
        let cd = pe.cd.as_ref().unwrap().ber();
        let pso = pe.pso.as_ref().unwrap().last().unwrap().ber();
        assert!(
            pso < cd,
            "Eb/N0 = {} dB: swarm {pso} not below conventional {cd}",
            pe.ebn0_db
        );
        let weak = pn.pso.as_ref().unwrap().last().unwrap().ber();
        assert!(
            weak <= 2.0 * pso,
            "Eb/N0 = {} dB: weak-user swarm {weak} beyond 2× equal-power {pso}",
            pe.ebn0_db
        );
    }
    println!("acceptance 7b (swarm < conventional, near-far within 2×): PASS");
}

/// Criterion 7c: swarm BER decreases monotonically with path diversity
/// (L = 1, 2, 3 at D = L) and with receive antennas (Q = 1, 2, 3).
#[test]
fn criterion_7c_diversity_orderings() {
    let path_cell = |paths: usize, profile: &str| {
        let text = format!(
            r#"
            [scenario.fig11a]
            constellation = "bpsk"
            users = 15
            gain = 31
            symbols = 3
            synchronous = false
            paths = {paths}
            profile = "{profile}"
            ebn0_db = [15.0]
            seed = 21
            trials = {{ mode = "fixed", count = 2500 }}
            [scenario.fig11a.swarm]
            phi2 = 15.0
            iterations = 60
            "#
        );
        let report = run_scenario(&scenario(&text)).unwrap();
        report.points[0].pso.as_ref().unwrap().last().unwrap().ber()
    };
    let l1 = path_cell(1, "pd1");
    let l2 = path_cell(2, "pd2");
    let l3 = path_cell(3, "pd3");
    assert!(
        l1 > l2 && l2 > l3,
        "path diversity not monotone: L1 {l1}, L2 {l2}, L3 {l3}"
    );

    let antenna_cell = |antennas: usize| {
        let text = format!(
            r#"
            [scenario.fig11b]
            constellation = "bpsk"
            users = 15
            gain = 31
            antennas = {antennas}
            ebn0_db = [8.0]
            seed = 22
            trials = {{ mode = "fixed", count = 2500 }}
            [scenario.fig11b.swarm]
            phi2 = 15.0
            iterations = 60
            "#
        );
        let report = run_scenario(&scenario(&text)).unwrap();
        report.points[0].pso.as_ref().unwrap().last().unwrap().ber()
    };
    let q1 = antenna_cell(1);
    let q2 = antenna_cell(2);
    let q3 = antenna_cell(3);
    assert!(
        q1 > q2 && q2 > q3,
        "antenna diversity not monotone: Q1 {q1}, Q2 {q2}, Q3 {q3}"
    );
    println!(
        "acceptance 7c (diversity: L {l1:.2e}>{l2:.2e}>{l3:.2e}, Q {q1:.2e}>{q2:.2e}>{q3:.2e}): PASS"
    );
}

/// Criterion 8: byte-identical CSV under a fixed seed and shard-count
/// independence of the merged statistics.
#[test]
fn criterion_8_determinism_and_merge() {
    let s = scenario(
        r#"
        [scenario.det]
        constellation = "qpsk"
        users = 5
        gain = 31
        ebn0_db = [6.0, 10.0]
        seed = 77
        trials = { mode = "fixed", count = 200 }
        [scenario.det.swarm]
        iterations = 10
        "#,
    );
    let strip = |text: String| -> String {
        text.lines()
            .filter(|l| !l.starts_with("# generated="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let report_a = run_scenario(&s).unwrap();
    let report_b = run_scenario(&s).unwrap();
    let paths_a = emit_results(&report_a, OutputFormat::Csv, dir_a.path(), None).unwrap();
    let paths_b = emit_results(&report_b, OutputFormat::Csv, dir_b.path(), None).unwrap();
    let csv_a = strip(std::fs::read_to_string(&paths_a[0]).unwrap());
    let csv_b = strip(std::fs::read_to_string(&paths_b[0]).unwrap());
    assert_eq!(csv_a, csv_b, "same seed must give byte-identical CSV");

    let shard_runs: Vec<_> = [1usize, 4, 8]
        .iter()
        .map(|&jobs| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .unwrap()
                .install(|| run_scenario(&s).unwrap())
        })
        .collect();
    for run in &shard_runs[1..] {
        for (a, b) in shard_runs[0].points.iter().zip(&run.points) {
            assert_eq!(a.cd, b.cd, "shard count changed CD statistics");
            assert_eq!(a.pso, b.pso, "shard count changed swarm statistics");
        }
    }
    println!("acceptance 8 (determinism and shard merge): PASS");
}

/// Criterion 9: assembled correlation matrices equal the chip-level
/// brute-force oracle entrywise, with the block-tridiagonal and symmetry
/// structure.
#[test]
fn criterion_9_correlation_structure() {
    use mudlab::airlink::{compute_correlations, generate_sequences};
    use mudlab::channel::{draw_channel, FadingMode, Timing};

    let mut rng = ChaCha8Rng::seed_from_u64(0x0910);
    for trial in 0..100 {
        let users = 1 + rng.random_range(0..5);
        let fingers = 1 + rng.random_range(0..2);
        let count = 1 + rng.random_range(0..3);
        let gain = 31;
        let profile = if fingers == 1 {
            PowerDelayProfile::pd1()
        } else {
            PowerDelayProfile::pd2()
        };
        let s = generate_sequences(users, gain, &mut rng);
        let ch = draw_channel(
            &profile,
            users,
            count,
            1,
            FadingMode::Slow,
            Timing::Asynchronous {
                gain,
                per_antenna: false,
            },
            &mut rng,
        );
        let corr = compute_correlations(&s, &ch, fingers, 0).unwrap();
        let kd = users * fingers;
        let kid = kd * count;

        // Brute force: Gram matrix of the delayed, zero-padded sequences.
        let total = count * gain + ch.max_delay();
        let mut laid = vec![vec![0.0f64; total]; kid];
        for i in 0..count {
            for k in 0..users {
                for l in 0..fingers {
                    let a = (i * users + k) * fingers + l;
                    let start = i * gain + ch.delay(0, k, l);
                    for n in 0..gain {
                        laid[a][start + n] = s.chip(k, n);
                    }
                }
            }
        }
        for a in 0..kid {
            for b in 0..kid {
                let dot: f64 = laid[a]
                    .iter()
                    .zip(&laid[b])
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    / gain as f64;
                assert!(
                    (corr.full[[a, b]] - dot).abs() < 1e-12,
                    "trial {trial} entry ({a},{b}): {} vs {dot}",
                    corr.full[[a, b]]
                );
                // Block-tridiagonal per the one-shot structure.
                let (bi, bj) = (a / kd, b / kd);
                if bi.abs_diff(bj) >= 2 {
                    assert_eq!(corr.full[[a, b]], 0.0);
                }
            }
        }
        for a in 0..kd {
            assert_eq!(corr.r0[[a, a]], 1.0, "unit diagonal");
            for b in 0..kd {
                assert!(
                    (corr.r0[[a, b]] - corr.r0[[b, a]]).abs() < 1e-15,
                    "R[0] symmetry"
                );
            }
        }
    }
    println!("acceptance 9 (correlation structure vs chip oracle): PASS");
}
