//! Properties of the generated market: post-election drift follows the
//! winner's sector polarities, and nothing else depends on the election.

use edsmf_core::market::Sector;
use edsmf_core::political::{Candidate, SectorImpactTable};
use edsmf_core::synth::{generate_synthetic, SyntheticData, SyntheticSpec};

fn spec(drift: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_stocks: 33,
        train_steps: 1170,
        valid_steps: 390,
        test_steps: 1170,
        base_volatility: 1e-4,
        drift,
        seed,
        ..SyntheticSpec::default()
    }
}

/// Per-step log returns, `returns[step][stock]`, skipping step 0.
fn log_returns(data: &SyntheticData) -> Vec<Vec<f64>> {
    let n = data.universe.len();
    data.bars.chunks(n).map(|step| step.iter().map(|b| (b.close / b.open).ln()).collect()).collect()
}

/// Mean and standard error of (mean positive-impact return − mean
/// negative-impact return) over the given steps.
fn group_gap(data: &SyntheticData, steps: impl Iterator<Item = usize>) -> (f64, f64, usize) {
    let table = SectorImpactTable::default();
    let sign: Vec<i8> = data.universe.iter().map(|(_, s)| table.impact(Candidate::One, s)).collect();
    let returns = log_returns(data);
    let gaps: Vec<f64> = steps
        .map(|t| {
            let mean = |want: i8| {
                let v: Vec<f64> = (0..sign.len()).filter(|i| sign[*i] == want).map(|i| returns[t][i]).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            mean(1) - mean(-1)
        })
        .collect();
    let k = gaps.len() as f64;
    let m = gaps.iter().sum::<f64>() / k;
    let var = gaps.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt(), gaps.len())
}

fn election_step(data: &SyntheticData) -> usize {
    data.timestamps.iter().position(|ts| ts.date() >= data.election_day).unwrap()
}

#[test]
fn post_election_gap_follows_the_drift() {
    let data = generate_synthetic(&spec(3e-4, 11), &SectorImpactTable::default()).unwrap();
    let e = election_step(&data);
    let (post, se_post, k) = group_gap(&data, e..data.timestamps.len());
    assert!(k >= 1000, "{k} post-election steps");
    // positive-impact stocks drift +δ, negative ones −δ
    assert!(post > 0.0 && (post - 6e-4).abs() < 4.0 * se_post, "gap {post} ± {se_post}");
    let (pre, se_pre, _) = group_gap(&data, 0..e);
    assert!(pre.abs() < 4.0 * se_pre, "pre-election gap {pre} ± {se_pre}");
}

#[test]
fn winner_two_flips_the_gap() {
    let s = SyntheticSpec { winner: Candidate::Two, ..spec(3e-4, 12) };
    let data = generate_synthetic(&s, &SectorImpactTable::default()).unwrap();
    let (post, se, _) = group_gap(&data, election_step(&data)..data.timestamps.len());
    assert!((post + 6e-4).abs() < 4.0 * se, "gap {post} ± {se}");
}

#[test]
fn energy_drifts_up_when_candidate_one_wins() {
    // no noise: every post-election step of an Energy stock rises by exactly δ
    let s = SyntheticSpec { base_volatility: 0.0, ..spec(3e-4, 13) };
    let data = generate_synthetic(&s, &SectorImpactTable::default()).unwrap();
    let e = election_step(&data);
    let energy = data.universe.iter().position(|(_, s)| s == Sector::Energy).unwrap();
    let returns = log_returns(&data);
    for t in e..returns.len() {
        assert!((returns[t][energy] - 3e-4).abs() < 1e-12);
    }
    for row in &returns[..e] {
        assert_eq!(row[energy], 0.0);
    }
}

#[test]
fn zero_drift_ignores_the_election() {
    let table = SectorImpactTable::default();
    let a = generate_synthetic(&spec(0.0, 14), &table).unwrap();
    let b = generate_synthetic(&SyntheticSpec { election_day_index: Some(0), ..spec(0.0, 14) }, &table).unwrap();
    assert_ne!(a.election_day, b.election_day);
    assert_eq!(a.bars, b.bars);
}

#[test]
fn same_seed_same_bars() {
    let table = SectorImpactTable::default();
    let a = generate_synthetic(&spec(3e-4, 15), &table).unwrap();
    let b = generate_synthetic(&spec(3e-4, 15), &table).unwrap();
    let c = generate_synthetic(&spec(3e-4, 16), &table).unwrap();
    assert_eq!(a.bars, b.bars);
    assert_ne!(a.bars, c.bars);
}
